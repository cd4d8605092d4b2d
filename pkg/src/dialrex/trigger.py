"""Start/end pointer prediction of the trigger span.

Scores every token as a span start and span end with two linear heads,
trains them with per-pointer cross-entropy against gold spans, and
decodes the best valid (start, end) pair at inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .encoder import EncodedSequence

MASK_VALUE = -1e9
DEFAULT_MAX_SPAN_LEN = 10


@dataclass(frozen=True)
class PointerScores:
    """Per-token start/end logits; out-of-region positions are masked."""

    start_logits: torch.Tensor        # (seq_len,)
    end_logits: torch.Tensor          # (seq_len,)
    dialogue_region: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class TriggerSpan:
    start: int
    end: int
    score: float = 0.0

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"span start {self.start} > end {self.end}")

    def __len__(self):
        return self.end - self.start + 1


class PointerHead(nn.Module):
    """Two linear scorers over the hidden states, one per pointer."""

    def __init__(self, d_h: int):
        super().__init__()
        self.start = nn.Linear(d_h, 1)
        self.end = nn.Linear(d_h, 1)
        self.double()

    def forward(self, encoded: EncodedSequence) -> PointerScores:
        start = self.start(encoded.hidden).squeeze(-1)
        end = self.end(encoded.hidden).squeeze(-1)
        region = encoded.dialogue_region
        mask = torch.zeros(start.shape[0], dtype=torch.bool)
        if region is not None:
            mask[region[0]:region[1] + 1] = True
        fill = torch.tensor(MASK_VALUE, dtype=start.dtype)
        return PointerScores(
            start_logits=torch.where(mask, start, fill),
            end_logits=torch.where(mask, end, fill),
            dialogue_region=region,
        )


def score_pointers(encoded: EncodedSequence, head: PointerHead) -> PointerScores:
    return head(encoded)


def trigger_loss(scores: PointerScores,
                 gold: Optional[tuple[int, int]]) -> torch.Tensor:
    """Cross-entropy at the gold start plus cross-entropy at the gold end.

    Instances without a gold span contribute zero (masked) loss.
    """
    if gold is None:
        return torch.zeros((), dtype=scores.start_logits.dtype)
    n = scores.start_logits.shape[0]
    start, end = gold
    if not (0 <= start < n and 0 <= end < n):
        raise ValueError(f"gold span {gold} outside sequence of length {n}")
    loss_start = -torch.log_softmax(scores.start_logits, dim=0)[start]
    loss_end = -torch.log_softmax(scores.end_logits, dim=0)[end]
    return loss_start + loss_end


def decode_span(scores: PointerScores,
                max_span_len: int = DEFAULT_MAX_SPAN_LEN) -> TriggerSpan:
    """Best in-region (i, j) pair by summed logits.

    Valid pairs satisfy i <= j and j - i < max_span_len; ties break to
    the smallest i, then the smallest j.
    """
    if max_span_len < 1:
        raise ValueError("max_span_len must be >= 1")
    region = scores.dialogue_region
    if region is None:
        raise ValueError("cannot decode a span from an empty dialogue region")
    lo, hi = region
    start = scores.start_logits.detach()
    end = scores.end_logits.detach()
    best = None
    for i in range(lo, hi + 1):
        for j in range(i, min(i + max_span_len - 1, hi) + 1):
            s = float(start[i] + end[j])
            if best is None or s > best[0]:
                best = (s, i, j)
    return TriggerSpan(start=best[1], end=best[2], score=best[0])
