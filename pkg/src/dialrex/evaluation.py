"""Macro F1 and the dialogue-setting (prefix) variant.

A prediction counts as correct when it belongs to the instance's gold
label set; per-relation precision/recall/F1 come from TP/FP/FN counts
and the macro score averages relations that were seen at all (gold
support or predictions).  The dialogue-setting score re-runs prediction
on the shortest turn prefix mentioning both arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .corpus import DialogueInstance, IngestReport, RelationSet, build_prefix_instance

PREFIX_RULE = ("dialogue-setting inputs are truncated to the shortest turn "
               "prefix in which both arguments occur (as speaker id or as an "
               "utterance substring); instances lacking an argument are kept whole")


@dataclass
class EvalReport:
    macro_f1: float
    f1_c: Optional[float] = None
    per_relation: dict = field(default_factory=dict)
    n_instances: int = 0
    prefix_rule: str = PREFIX_RULE

    def to_dict(self) -> dict:
        return {
            "macro_f1": self.macro_f1,
            "f1_c": self.f1_c,
            "per_relation": self.per_relation,
            "n_instances": self.n_instances,
            "prefix_rule": self.prefix_rule,
        }

    def render(self) -> str:
        lines = [
            f"# {self.prefix_rule}",
            f"instances: {self.n_instances}",
            f"macro F1:  {self.macro_f1:.4f}",
        ]
        if self.f1_c is not None:
            lines.append(f"F1_c:      {self.f1_c:.4f}")
        lines.append("")
        header = f"{'relation':<24} {'tp':>4} {'fp':>4} {'fn':>4} {'prec':>7} {'rec':>7} {'f1':>7}"
        lines.append(header)
        lines.append("-" * len(header))
        for label, row in self.per_relation.items():
            lines.append(
                f"{label:<24} {row['tp']:>4} {row['fp']:>4} {row['fn']:>4} "
                f"{row['precision']:>7.4f} {row['recall']:>7.4f} {row['f1']:>7.4f}"
            )
        return "\n".join(lines) + "\n"


def relation_scores(predictions: list[str], golds: list[set[str] | frozenset[str]],
                    relations: RelationSet) -> dict:
    """Per-relation TP/FP/FN and P/R/F1 for relations seen in golds or preds."""
    if len(predictions) != len(golds):
        raise ValueError("predictions and golds must have equal length")
    if not predictions:
        raise ValueError("nothing to score")
    for pred in predictions:
        if pred not in relations:
            raise ValueError(f"unknown predicted label {pred!r}")
    tp = {label: 0 for label in relations.labels}
    fp = dict(tp)
    fn = dict(tp)
    for pred, gold in zip(predictions, golds):
        for label in gold:
            if label not in relations:
                raise ValueError(f"unknown gold label {label!r}")
        if pred in gold:
            tp[pred] += 1
        else:
            fp[pred] += 1
        for label in gold:
            if label != pred:
                fn[label] += 1
    table = {}
    for label in relations.labels:
        t, p, n = tp[label], fp[label], fn[label]
        if t + p + n == 0:
            continue      # never gold, never predicted: excluded from the macro
        precision = t / (t + p) if t + p else 0.0
        recall = t / (t + n) if t + n else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        table[label] = {"tp": t, "fp": p, "fn": n, "precision": precision,
                        "recall": recall, "f1": f1}
    return table


def macro_f1(predictions: list[str], golds: list[set[str] | frozenset[str]],
             relations: RelationSet) -> float:
    """Unweighted mean of per-relation F1 over the observed relations."""
    table = relation_scores(predictions, golds, relations)
    return sum(row["f1"] for row in table.values()) / len(table)


def predict_all(model, instances: list[DialogueInstance],
                max_span_len: int = 10) -> list:
    return [model.predict(inst, max_span_len) for inst in instances]


def evaluate_f1c(model, instances: list[DialogueInstance],
                 max_span_len: int = 10,
                 report: Optional[IngestReport] = None) -> float:
    """Macro F1 after truncating each instance to its argument prefix."""
    prefixed = [build_prefix_instance(inst, report) for inst in instances]
    preds = [p.relation for p in predict_all(model, prefixed, max_span_len)]
    golds = [set(inst.relations) for inst in instances]
    return macro_f1(preds, golds, model.relations)


def evaluate_model(model, instances: list[DialogueInstance],
                   max_span_len: int = 10, with_prefix: bool = True) -> EvalReport:
    """Full-dialogue macro F1 (and optionally F1_c) with the per-relation table."""
    preds = [p.relation for p in predict_all(model, instances, max_span_len)]
    golds = [set(inst.relations) for inst in instances]
    table = relation_scores(preds, golds, model.relations)
    score = sum(row["f1"] for row in table.values()) / len(table)
    f1c = evaluate_f1c(model, instances, max_span_len) if with_prefix else None
    return EvalReport(macro_f1=score, f1_c=f1c, per_relation=table,
                      n_instances=len(instances))


def relation_accuracy(model, instances: list[DialogueInstance],
                      max_span_len: int = 10) -> float:
    """Fraction of instances whose predicted relation is in the gold set."""
    if not instances:
        raise ValueError("nothing to score")
    hits = sum(
        model.predict(inst, max_span_len).relation in inst.relations
        for inst in instances
    )
    return hits / len(instances)


def span_exact_match(model, examples, max_span_len: int = 10) -> float:
    """Fraction of gold-trigger examples whose decoded span matches exactly."""
    import torch

    from .trigger import decode_span

    total = hits = 0
    with torch.no_grad():
        for ex in examples:
            gold = ex.tokenized.gold_trigger
            if gold is None:
                continue
            total += 1
            encoded = model.encoder.encode(ex.tokenized)
            span = decode_span(model.pointer(encoded), max_span_len)
            hits += (span.start, span.end) == gold
    if total == 0:
        raise ValueError("no gold trigger spans to match")
    return hits / total
