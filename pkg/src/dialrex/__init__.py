"""Trigger-guided dialogue relation extraction.

Pipeline: DialogRE-format ingestion -> marked-sequence encoding ->
start/end trigger span prediction -> gated trigger fusion -> relation
classification, with label-knowledge guidance as a training-only loss.
"""

from .corpus import (
    DialogueInstance,
    IngestReport,
    RelationSet,
    TokenizedInput,
    WhitespaceTokenizer,
    align_trigger,
    anonymize_speakers,
    build_input_sequence,
    build_prefix_instance,
    expand_for_training,
    load_dialogre,
    save_dialogre,
)
from .encoder import EncodedSequence, Encoder, EncoderConfig, Vocabulary
from .evaluation import EvalReport, evaluate_f1c, evaluate_model, macro_f1
from .fusion import attend, gate_fuse, mean_pool
from .knowledge import KnowledgeLexicon, guidance_loss, knowledge_feature, load_lexicon
from .model import (
    Example,
    ModelOptions,
    RelationModel,
    RelationPrediction,
    TrainConfig,
    build_vocabulary,
    prepare_examples,
    total_loss,
    train,
)
from .trigger import PointerScores, TriggerSpan, decode_span, trigger_loss

__version__ = "0.1.0"
