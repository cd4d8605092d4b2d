"""Builders shared by the test modules."""

from dialrex.corpus import WhitespaceTokenizer, expand_for_training
from dialrex.encoder import EncoderConfig
from dialrex.model import (
    ModelOptions,
    RelationModel,
    TrainConfig,
    build_vocabulary,
    prepare_examples,
    train,
)


def build_model(instances, relations, lexicon=None, d_h=16, layers=1, seed=0,
                max_positions=128, options=None):
    """Model plus prepared examples for a list of raw instances."""
    tokenizer = WhitespaceTokenizer()
    examples = prepare_examples(expand_for_training(instances), tokenizer,
                                relations, max_positions)
    vocab = build_vocabulary(examples, tokenizer, lexicon)
    config = EncoderConfig(d_h=d_h, layers=layers, max_positions=max_positions,
                           seed=seed)
    model = RelationModel(config, vocab, relations, tokenizer,
                          options or ModelOptions())
    return model, examples


def quick_train(model, examples, lexicon=None, epochs=30, lr=2e-3, seed=0,
                **config_kwargs):
    config = TrainConfig(learning_rate=lr, epochs=epochs, seed=seed,
                         **config_kwargs)
    return train(model, examples, config, lexicon)
