"""End-to-end relation model: encoder, pointer heads, fusion, classifier.

Assembles the three losses (relation cross-entropy, trigger pointer
cross-entropy, knowledge guidance), runs mini-batch training with a
decoupled-weight-decay Adam optimizer, and produces full predictions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .corpus import (
    DialogueInstance,
    IngestReport,
    RelationSet,
    TokenizedInput,
    WhitespaceTokenizer,
    build_input_sequence,
    tokenize_instance,
)
from .encoder import INIT_RANGE, EncodedSequence, Encoder, EncoderConfig, Vocabulary
from .fusion import AdaptiveGates, attend, mean_pool
from .knowledge import KnowledgeLexicon, guidance_loss, knowledge_feature
from .trigger import PointerHead, TriggerSpan, decode_span, trigger_loss


@dataclass
class TrainConfig:
    """Loss weights, optimizer settings, and training-path switches."""

    lambda_r: float = 1.0
    lambda_t: float = 0.3
    lambda_k: float = 0.1
    learning_rate: float = 3e-5
    batch_size: int = 12
    epochs: int = 20
    seed: int = 0
    max_span_len: int = 10
    weight_decay: float = 0.01
    # feed gold spans to the fusion attention when available (decoded otherwise)
    gold_spans_in_fusion: bool = True
    # apply guidance loss even when no gold trigger exists (uses decoded span)
    guidance_without_gold: bool = False
    # detach the knowledge feature so guidance only shapes the trigger path
    stop_knowledge_grad: bool = False
    # encode knowledge phrases once and freeze them (speed over fidelity)
    cache_knowledge: bool = False

    def __post_init__(self):
        if self.lambda_r <= 0:
            raise ValueError("lambda_r must be positive")
        if self.lambda_t < 0 or self.lambda_k < 0:
            raise ValueError("loss weights must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class ModelOptions:
    """Architecture variants recorded in every checkpoint and report."""

    disable_fusion: bool = False      # mean-pool the trigger tokens instead
    literal_attention: bool = False   # audit mode: attention collapses to query

    def fusion_mode(self) -> str:
        if self.disable_fusion:
            return "mean-pool"
        if self.literal_attention:
            return "literal"
        return "adaptive"


@dataclass(frozen=True)
class RelationPrediction:
    relation: str
    distribution: tuple[float, ...]
    trigger: TriggerSpan
    trigger_text: str


@dataclass(frozen=True)
class Example:
    """A tokenized single-relation training item."""

    tokenized: TokenizedInput
    relation_index: int
    relation: str
    instance_index: int


def prepare_examples(instances: list[DialogueInstance], tokenizer,
                     relations: RelationSet, max_len: int = 512,
                     report: Optional[IngestReport] = None) -> list[Example]:
    """Tokenize expanded instances and align their gold triggers."""
    examples = []
    for idx, inst in enumerate(instances):
        tokenized = tokenize_instance(inst, tokenizer, max_len, report=report)
        label = inst.relations[0]
        examples.append(Example(tokenized, relations.index(label), label, idx))
    return examples


def build_vocabulary(examples: list[Example], tokenizer,
                     lexicon: Optional[KnowledgeLexicon] = None) -> Vocabulary:
    """Vocabulary over training tokens plus all knowledge phrases."""
    streams = [ex.tokenized.tokens for ex in examples]
    if lexicon is not None:
        streams.extend(tokenizer(p) for phrases in lexicon.entries.values()
                       for p in phrases)
    return Vocabulary.build(streams)


def total_loss(loss_r: torch.Tensor, loss_t: torch.Tensor,
               loss_k: torch.Tensor, config: TrainConfig) -> torch.Tensor:
    """Weighted sum of the three component losses."""
    return (config.lambda_r * loss_r + config.lambda_t * loss_t
            + config.lambda_k * loss_k)


class RelationModel(nn.Module):
    """Full pipeline over one tokenized instance."""

    def __init__(self, encoder_config: EncoderConfig, vocab: Vocabulary,
                 relations: RelationSet, tokenizer=None,
                 options: Optional[ModelOptions] = None):
        super().__init__()
        self.relations = relations
        self.tokenizer = tokenizer if tokenizer is not None else WhitespaceTokenizer()
        self.options = options if options is not None else ModelOptions()
        self.encoder = Encoder(encoder_config, vocab)
        self.pointer = PointerHead(encoder_config.d_h)
        self.fusion = AdaptiveGates(encoder_config.d_h)
        self.classifier = nn.Linear(3 * encoder_config.d_h, len(relations))
        self.double()
        self.reset_parameters()

    @property
    def vocab(self) -> Vocabulary:
        return self.encoder.vocab

    def reset_parameters(self) -> None:
        """Seeded init: uniform matrices, zero vectors, unit layer-norm gains."""
        gen = torch.Generator().manual_seed(self.encoder.config.seed)
        for name, p in sorted(self.named_parameters()):
            if p.dim() >= 2:
                with torch.no_grad():
                    p.uniform_(-INIT_RANGE, INIT_RANGE, generator=gen)
            elif "norm.weight" in name:
                nn.init.ones_(p)
            else:
                nn.init.zeros_(p)

    def trigger_feature(self, encoded: EncodedSequence,
                        span: TriggerSpan) -> torch.Tensor:
        """Fused trigger feature from the span's hidden vectors."""
        vecs = encoded.hidden[span.start:span.end + 1]
        if self.options.disable_fusion:
            return mean_pool(vecs)
        h1 = attend(vecs, encoded.cls1, literal=self.options.literal_attention)
        h2 = attend(vecs, encoded.cls2, literal=self.options.literal_attention)
        return self.fusion.fuse_trigger(h1, h2)

    def relation_logits(self, cls1: torch.Tensor, t_feat: torch.Tensor,
                        cls2: torch.Tensor) -> torch.Tensor:
        return self.classifier(torch.cat([cls1, t_feat, cls2]))

    def classify(self, cls1: torch.Tensor, t_feat: torch.Tensor,
                 cls2: torch.Tensor) -> torch.Tensor:
        """Relation distribution from the concatenated feature."""
        return torch.softmax(self.relation_logits(cls1, t_feat, cls2), dim=0)

    def example_loss(self, example: Example, config: TrainConfig,
                     lexicon: Optional[KnowledgeLexicon] = None,
                     cache: Optional[dict] = None):
        """Total loss plus the unweighted component values for one example."""
        tokenized = example.tokenized
        encoded = self.encoder.encode(tokenized)
        scores = self.pointer(encoded)

        loss_t = trigger_loss(scores, tokenized.gold_trigger)

        gold = tokenized.gold_trigger
        if gold is not None and config.gold_spans_in_fusion:
            span = TriggerSpan(gold[0], gold[1])
        else:
            span = decode_span(scores, config.max_span_len)
        t_feat = self.trigger_feature(encoded, span)

        logits = self.relation_logits(encoded.cls1, t_feat, encoded.cls2)
        loss_r = -torch.log_softmax(logits, dim=0)[example.relation_index]

        loss_k = torch.zeros((), dtype=torch.float64)
        if config.lambda_k > 0 and (gold is not None or config.guidance_without_gold):
            if lexicon is None:
                raise ValueError("knowledge guidance enabled but no lexicon given")
            k_feat = knowledge_feature(example.relation, encoded.cls1,
                                       encoded.cls2, lexicon, self.encoder,
                                       self.tokenizer, self.fusion.mu_k, cache)
            if config.stop_knowledge_grad:
                k_feat = k_feat.detach()
            loss_k = guidance_loss(k_feat, t_feat)

        loss = total_loss(loss_r, loss_t, loss_k, config)
        parts = {
            "relation": loss_r.detach().item(),
            "trigger": loss_t.detach().item(),
            "knowledge": loss_k.detach().item(),
            "total": loss.detach().item(),
        }
        return loss, parts

    @torch.no_grad()
    def predict(self, instance: DialogueInstance,
                max_span_len: int = 10) -> RelationPrediction:
        """Full inference pipeline; the knowledge path is never run."""
        tokenized = build_input_sequence(instance, self.tokenizer,
                                         self.encoder.config.max_positions)
        return self.predict_tokenized(tokenized, max_span_len)

    @torch.no_grad()
    def predict_tokenized(self, tokenized: TokenizedInput,
                          max_span_len: int = 10) -> RelationPrediction:
        encoded = self.encoder.encode(tokenized)
        span = decode_span(self.pointer(encoded), max_span_len)
        t_feat = self.trigger_feature(encoded, span)
        probs = self.classify(encoded.cls1, t_feat, encoded.cls2)
        best = int(torch.argmax(probs))
        return RelationPrediction(
            relation=self.relations.labels[best],
            distribution=tuple(float(p) for p in probs),
            trigger=span,
            trigger_text=" ".join(tokenized.tokens[span.start:span.end + 1]),
        )


def make_optimizer(model: RelationModel, config: TrainConfig) -> torch.optim.Optimizer:
    return torch.optim.AdamW(
        model.parameters(),
        lr=config.learning_rate,
        betas=(0.9, 0.999),
        eps=1e-8,
        weight_decay=config.weight_decay,
    )


def train(model: RelationModel, examples: list[Example], config: TrainConfig,
          lexicon: Optional[KnowledgeLexicon] = None,
          optimizer: Optional[torch.optim.Optimizer] = None) -> list[dict]:
    """Seeded mini-batch training; returns the per-epoch loss log."""
    if not examples:
        raise ValueError("training corpus is empty")
    if config.lambda_k > 0 and lexicon is None:
        raise ValueError("lambda_k > 0 requires a knowledge lexicon")
    if optimizer is None:
        optimizer = make_optimizer(model, config)
    cache: Optional[dict] = {} if config.cache_knowledge else None
    rng = random.Random(config.seed)

    log = []
    for epoch in range(config.epochs):
        order = list(range(len(examples)))
        rng.shuffle(order)
        sums = {"relation": 0.0, "trigger": 0.0, "knowledge": 0.0, "total": 0.0}
        for at in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[at:at + config.batch_size]]
            optimizer.zero_grad()
            losses = []
            for ex in batch:
                loss, parts = model.example_loss(ex, config, lexicon, cache)
                if not torch.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite loss {loss.detach().item()} on instance "
                        f"{ex.instance_index} (relation {ex.relation!r})"
                    )
                losses.append(loss)
                for key in sums:
                    sums[key] += parts[key]
            torch.stack(losses).mean().backward()
            optimizer.step()
        n = len(examples)
        entry = {"epoch": epoch, **{f"loss_{k}": sums[k] / n for k in sums}}
        log.append(entry)
    return log
