"""Finite-difference verification of the full training loss gradient.

Backpropagated gradients for every parameter group are compared against
an independent central-difference estimate computed by re-evaluating
the loss with individually perturbed parameters (float64, step 1e-4).
The comparison uses |analytic - numeric| / max(1, |analytic|, |numeric|)
so near-zero gradients are judged absolutely.
"""

from __future__ import annotations

from typing import Optional

import torch

from .corpus import DialogueInstance, RelationSet, WhitespaceTokenizer
from .encoder import EncoderConfig
from .knowledge import KnowledgeLexicon
from .model import Example, ModelOptions, RelationModel, TrainConfig, \
    build_vocabulary, prepare_examples

PARAMETER_GROUPS = ("encoder", "pointers", "mu_t", "mu_k", "classifier")

DEFAULT_STEP = 1e-4
DEFAULT_TOLERANCE = 1e-4


def parameter_group(name: str) -> str:
    if name.startswith("encoder."):
        return "encoder"
    if name.startswith("pointer."):
        return "pointers"
    if name == "fusion.mu_t":
        return "mu_t"
    if name == "fusion.mu_k":
        return "mu_k"
    if name.startswith("classifier."):
        return "classifier"
    raise ValueError(f"parameter {name!r} belongs to no known group")


def make_tiny_fixture():
    """Small deterministic setup exercising every loss path."""
    relations = RelationSet(("rel:warm", "rel:cold"))
    lexicon = KnowledgeLexicon({
        "rel:warm": ("glowing ember", "spark"),
        "rel:cold": ("frozen pond", "icicle"),
    })
    instance = DialogueInstance(
        turns=(
            ("Ann", "the spark danced over the logs"),
            ("Ben", "it kept us warm all evening"),
        ),
        arg1="Ann",
        arg2="Ben",
        relations=("rel:warm",),
        triggers=("spark danced",),
    )
    tokenizer = WhitespaceTokenizer()
    config = EncoderConfig(d_h=8, layers=2, max_positions=24, seed=3)
    examples = prepare_examples([instance], tokenizer, relations,
                                max_len=config.max_positions)
    gold = examples[0].tokenized.gold_trigger
    # a multi-token span keeps the trigger gate gradient away from zero
    assert gold is not None and gold[1] > gold[0]
    vocab = build_vocabulary(examples, tokenizer, lexicon)
    model = RelationModel(config, vocab, relations, tokenizer, ModelOptions())
    train_config = TrainConfig(epochs=0, max_span_len=4)
    return model, examples[0], train_config, lexicon


def run_gradcheck(model: RelationModel, example: Example, config: TrainConfig,
                  lexicon: Optional[KnowledgeLexicon] = None,
                  step: float = DEFAULT_STEP,
                  tolerance: float = DEFAULT_TOLERANCE,
                  corrupt_group: Optional[str] = None) -> dict:
    """Check every parameter group; returns a per-group report.

    ``corrupt_group`` shifts that group's analytic gradients before the
    comparison; it exists so tests can confirm the harness detects
    broken gradients.
    """
    model.zero_grad()
    loss, _ = model.example_loss(example, config, lexicon)
    loss.backward()

    def loss_value() -> float:
        with torch.no_grad():
            value, _ = model.example_loss(example, config, lexicon)
        return float(value)

    report = {
        group: {"group": group, "n_params": 0, "max_rel_err": 0.0, "pass": True}
        for group in PARAMETER_GROUPS
    }
    for name, p in model.named_parameters():
        group = parameter_group(name)
        entry = report[group]
        grad = torch.zeros_like(p) if p.grad is None else p.grad
        flat_p = p.data.view(-1)
        flat_g = grad.view(-1)
        for i in range(flat_p.numel()):
            original = flat_p[i].item()
            flat_p[i] = original + step
            upper = loss_value()
            flat_p[i] = original - step
            lower = loss_value()
            flat_p[i] = original
            numeric = (upper - lower) / (2.0 * step)
            analytic = flat_g[i].item()
            if corrupt_group == group:
                analytic += 1.0
            rel = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            entry["n_params"] += 1
            if rel > entry["max_rel_err"]:
                entry["max_rel_err"] = rel
        entry["pass"] = entry["max_rel_err"] < tolerance
    return report


def render_report(report: dict) -> str:
    lines = []
    for group in PARAMETER_GROUPS:
        entry = report[group]
        status = "PASS" if entry["pass"] else "FAIL"
        lines.append(
            f"{group:<12} {status}  params={entry['n_params']:<5} "
            f"max_rel_err={entry['max_rel_err']:.3e}"
        )
    return "\n".join(lines) + "\n"
