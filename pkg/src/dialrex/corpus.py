"""DialogRE-format ingestion and input construction.

Handles loading/saving the dialogue annotation format, speaker
anonymization, building the marked token sequence fed to the encoder,
aligning character-level trigger annotations to token spans, and the
prefix truncation used by the dialogue-setting metric.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Optional

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
SPEAKER1_TOKEN = "[S1]"
SPEAKER2_TOKEN = "[S2]"
UNK_TOKEN = "[UNK]"

SPECIAL_TOKENS = (UNK_TOKEN, CLS_TOKEN, SEP_TOKEN, SPEAKER1_TOKEN, SPEAKER2_TOKEN)


class IngestionError(ValueError):
    """Raised when a data file violates the expected format."""


@dataclass(frozen=True)
class DialogueInstance:
    """One (dialogue, argument pair) annotation.

    ``triggers`` is parallel to ``relations``; an empty string means the
    annotation carries no trigger for that relation.
    """

    turns: tuple[tuple[str, str], ...]
    arg1: str
    arg2: str
    relations: tuple[str, ...]
    triggers: tuple[str, ...]

    def __post_init__(self):
        if not self.turns:
            raise ValueError("instance has no turns")
        if any(not spk for spk, _ in self.turns):
            raise ValueError("empty speaker id")
        if not self.relations:
            raise ValueError("instance has no relation label")
        if len(self.triggers) != len(self.relations):
            raise ValueError("triggers must be parallel to relations")


@dataclass(frozen=True)
class RelationSet:
    """Ordered label inventory; position defines the class index."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate relation labels")
        if len(self.labels) < 2:
            raise ValueError("need at least 2 relation labels")

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown relation label {label!r}") from None

    @classmethod
    def from_file(cls, path) -> "RelationSet":
        with open(path, encoding="utf-8") as f:
            labels = tuple(line.strip() for line in f if line.strip())
        return cls(labels)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for label in self.labels:
                f.write(label + "\n")


@dataclass(frozen=True)
class TokenizedInput:
    """Marked token sequence: [CLS] dialogue [SEP] arg1 [CLS] arg2.

    ``dialogue_region`` is the inclusive (start, end) interval of the
    dialogue tokens, or None if truncation removed all of them.
    ``gold_trigger`` is an inclusive token span inside that region.
    """

    tokens: tuple[str, ...]
    dialogue_region: Optional[tuple[int, int]]
    cls1_index: int
    sep_index: int
    cls2_index: int
    gold_trigger: Optional[tuple[int, int]] = None


class WhitespaceTokenizer:
    """Reference tokenizer: lowercase, split words and punctuation."""

    name = "whitespace"
    _pattern = re.compile(r"\w+|[^\w\s]")

    def __call__(self, text: str) -> list[str]:
        return self._pattern.findall(text.lower())


# registry used when reconstructing a model from a checkpoint
TOKENIZERS = {WhitespaceTokenizer.name: WhitespaceTokenizer}


@dataclass
class IngestReport:
    """Counts gathered while ingesting and preparing a corpus."""

    n_dialogues: int = 0
    n_instances: int = 0
    triggers_aligned: int = 0
    triggers_unaligned: int = 0
    triggers_absent: int = 0
    prefix_flagged: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _split_turn(utterance: str, entry_idx: int) -> tuple[str, str]:
    pos = utterance.find(": ")
    if pos >= 0:
        return utterance[:pos], utterance[pos + 2:]
    if utterance.endswith(":") and len(utterance) > 1:
        return utterance[:-1], ""
    raise IngestionError(
        f"entry {entry_idx}: utterance {utterance!r} has no 'speaker: ' prefix"
    )


def load_dialogre(path, relations: RelationSet,
                  report: Optional[IngestReport] = None) -> list[DialogueInstance]:
    """Load a DialogRE-format file into one instance per annotation record.

    Each entry is ``[[utterance, ...], [{"x", "y", "r", "t"}, ...]]``;
    records for the same entry share the parsed turns.
    """
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise IngestionError("top level must be a list of entries")

    instances = []
    for idx, entry in enumerate(data):
        if not (isinstance(entry, list) and len(entry) == 2):
            raise IngestionError(f"entry {idx}: expected [utterances, records] pair")
        utterances, records = entry
        if not isinstance(utterances, list) or not utterances:
            raise IngestionError(f"entry {idx}: empty or missing utterance list")
        turns = tuple(_split_turn(u, idx) for u in utterances)
        if not isinstance(records, list):
            raise IngestionError(f"entry {idx}: annotation records must be a list")
        for rec in records:
            if not isinstance(rec, dict) or not {"x", "y", "r"} <= rec.keys():
                raise IngestionError(f"entry {idx}: record missing x/y/r fields")
            if not isinstance(rec["r"], list) or not rec["r"]:
                raise IngestionError(f"entry {idx}: relation field must be a "
                                     "non-empty list")
            rels = tuple(rec["r"])
            for label in rels:
                if label not in relations:
                    raise IngestionError(
                        f"entry {idx}: unknown relation label {label!r}"
                    )
            trig = rec.get("t", [""] * len(rels))
            if not isinstance(trig, list) or len(trig) != len(rels):
                raise IngestionError(
                    f"entry {idx}: trigger list does not match the relation "
                    f"list of length {len(rels)}"
                )
            try:
                instances.append(
                    DialogueInstance(turns, rec["x"], rec["y"], rels, tuple(trig))
                )
            except ValueError as exc:
                raise IngestionError(f"entry {idx}: {exc}") from None
    if report is not None:
        report.n_dialogues += len(data)
        report.n_instances += len(instances)
    return instances


def save_dialogre(instances: list[DialogueInstance], path) -> None:
    """Serialize instances back to the DialogRE format.

    Consecutive instances sharing identical turns are grouped into one
    dialogue entry, inverting how ``load_dialogre`` unrolls records.
    """
    entries: list[list] = []
    prev_turns = None
    for inst in instances:
        if inst.turns != prev_turns:
            utts = [f"{spk}: {txt}" if txt else f"{spk}:" for spk, txt in inst.turns]
            entries.append([utts, []])
            prev_turns = inst.turns
        entries[-1][1].append({
            "x": inst.arg1,
            "y": inst.arg2,
            "r": list(inst.relations),
            "t": list(inst.triggers),
        })
    with open(path, "w", encoding="utf-8") as f:
        json.dump(entries, f, ensure_ascii=False, indent=1)


def expand_for_training(instances: list[DialogueInstance]) -> list[DialogueInstance]:
    """Unroll multi-relation annotations into single-relation instances."""
    out = []
    for inst in instances:
        for rel, trig in zip(inst.relations, inst.triggers):
            out.append(replace(inst, relations=(rel,), triggers=(trig,)))
    return out


def anonymize_speakers(instance: DialogueInstance):
    """Rewrite argument speakers to the [S1]/[S2] marker tokens.

    Returns ``(turns, arg1_token, arg2_token)`` where the argument token
    is the marker when the argument matched some speaker id (exact string
    equality) and the verbatim argument otherwise.  A speaker equal to
    both arguments becomes [S1]; the first case wins.
    """
    speakers = {spk for spk, _ in instance.turns}
    a1 = SPEAKER1_TOKEN if instance.arg1 in speakers else instance.arg1
    a2 = SPEAKER2_TOKEN if instance.arg2 in speakers else instance.arg2
    turns = []
    for spk, utt in instance.turns:
        if spk == instance.arg1:
            spk = SPEAKER1_TOKEN
        elif spk == instance.arg2:
            spk = SPEAKER2_TOKEN
        turns.append((spk, utt))
    return tuple(turns), a1, a2


def _piece_tokens(piece: str, tokenizer) -> list[str]:
    if piece in (SPEAKER1_TOKEN, SPEAKER2_TOKEN):
        return [piece]
    return tokenizer(piece)


def build_input_sequence(instance: DialogueInstance, tokenizer,
                         max_len: int = 512) -> TokenizedInput:
    """Build [CLS] dialogue [SEP] arg1 [CLS] arg2 with marker bookkeeping.

    Anonymization is applied first (it is idempotent, so already-rewritten
    instances pass through unchanged).  Truncation to ``max_len`` drops
    dialogue tokens from the end; the argument suffix is never cut.
    """
    turns, a1, a2 = anonymize_speakers(instance)

    dialogue: list[str] = []
    for spk, utt in turns:
        dialogue.extend(_piece_tokens(spk, tokenizer))
        dialogue.append(":")
        dialogue.extend(tokenizer(utt))

    a1_toks = _piece_tokens(a1, tokenizer)
    a2_toks = _piece_tokens(a2, tokenizer)
    suffix = [SEP_TOKEN] + a1_toks + [CLS_TOKEN] + a2_toks
    budget = max_len - 1 - len(suffix)
    if budget < 0:
        raise ValueError(
            f"argument suffix needs {1 + len(suffix)} tokens but max_len is {max_len}"
        )
    dialogue = dialogue[:budget]

    tokens = [CLS_TOKEN] + dialogue + suffix
    sep_index = 1 + len(dialogue)
    region = (1, len(dialogue)) if dialogue else None
    return TokenizedInput(
        tokens=tuple(tokens),
        dialogue_region=region,
        cls1_index=0,
        sep_index=sep_index,
        cls2_index=sep_index + 1 + len(a1_toks),
    )


def align_trigger(instance: DialogueInstance, tokenized: TokenizedInput,
                  tokenizer, relation_index: int = 0) -> Optional[tuple[int, int]]:
    """Locate the annotated trigger inside the dialogue region.

    Returns the earliest inclusive token span whose tokens equal the
    tokenized trigger text, or None when the trigger is empty or does not
    occur (unalignable triggers simply train without span supervision).
    """
    text = instance.triggers[relation_index]
    if not text or tokenized.dialogue_region is None:
        return None
    needle = tokenizer(text)
    if not needle:
        return None
    lo, hi = tokenized.dialogue_region
    toks = tokenized.tokens
    for i in range(lo, hi - len(needle) + 2):
        if list(toks[i:i + len(needle)]) == needle:
            return (i, i + len(needle) - 1)
    return None


def tokenize_instance(instance: DialogueInstance, tokenizer, max_len: int = 512,
                      relation_index: int = 0,
                      report: Optional[IngestReport] = None) -> TokenizedInput:
    """build_input_sequence + align_trigger, with report bookkeeping."""
    tokenized = build_input_sequence(instance, tokenizer, max_len)
    span = align_trigger(instance, tokenized, tokenizer, relation_index)
    if report is not None:
        if not instance.triggers[relation_index]:
            report.triggers_absent += 1
        elif span is None:
            report.triggers_unaligned += 1
        else:
            report.triggers_aligned += 1
    return replace(tokenized, gold_trigger=span)


def _mentions(arg: str, turn: tuple[str, str]) -> bool:
    spk, utt = turn
    return spk == arg or arg in utt


def build_prefix_instance(instance: DialogueInstance,
                          report: Optional[IngestReport] = None) -> DialogueInstance:
    """Truncate to the shortest turn prefix mentioning both arguments.

    An argument counts as mentioned in a turn when it equals the speaker
    id or occurs as a substring of the utterance.  If either argument
    never occurs the instance is returned unchanged and flagged.
    """
    seen1 = seen2 = False
    for i, turn in enumerate(instance.turns):
        seen1 = seen1 or _mentions(instance.arg1, turn)
        seen2 = seen2 or _mentions(instance.arg2, turn)
        if seen1 and seen2:
            return replace(instance, turns=instance.turns[:i + 1])
    if report is not None:
        report.prefix_flagged += 1
    return instance
