"""Parameter-free attention over trigger tokens and sigmoid-gate fusion.

The attention pools the trigger token vectors against a pooled query
(the dialogue-level or argument-level summary vector); the gate blends
the two pooled views with a learned componentwise sigmoid weight.
"""

from __future__ import annotations

import torch
from torch import nn


def attend_weights(values: torch.Tensor, query: torch.Tensor) -> torch.Tensor:
    """Softmax over the dot products of each value vector with the query."""
    if values.dim() != 2 or values.shape[0] == 0:
        raise ValueError("need a non-empty (m, d_h) stack of value vectors")
    if values.shape[1] != query.shape[0]:
        raise ValueError(
            f"value dim {values.shape[1]} != query dim {query.shape[0]}"
        )
    return torch.softmax(values @ query, dim=0)


def attend(values: torch.Tensor, query: torch.Tensor,
           literal: bool = False) -> torch.Tensor:
    """Query-weighted sum of the value vectors.

    ``literal=True`` keeps the degenerate published form in which the
    weights multiply the query itself; the weights then sum against a
    constant and the output collapses to the query.  Kept for audit
    comparisons only.
    """
    weights = attend_weights(values, query)
    if literal:
        return weights.sum() * query
    return weights @ values


def gate_fuse(h1: torch.Tensor, h2: torch.Tensor,
              mu: torch.Tensor) -> torch.Tensor:
    """Componentwise convex blend sigmoid(mu) * h1 + (1 - sigmoid(mu)) * h2."""
    if not (h1.shape == h2.shape == mu.shape):
        raise ValueError(
            f"gate inputs must share a shape, got {tuple(h1.shape)}, "
            f"{tuple(h2.shape)}, {tuple(mu.shape)}"
        )
    gate = torch.sigmoid(mu)
    return gate * h1 + (1.0 - gate) * h2


def mean_pool(values: torch.Tensor) -> torch.Tensor:
    """Plain average of the trigger token vectors (fusion ablation)."""
    if values.dim() != 2 or values.shape[0] == 0:
        raise ValueError("need a non-empty (m, d_h) stack of value vectors")
    return values.mean(dim=0)


class AdaptiveGates(nn.Module):
    """Owns the two gate parameter vectors (trigger and knowledge paths).

    Both start at zero so each gate opens at an even 0.5/0.5 blend.
    """

    def __init__(self, d_h: int):
        super().__init__()
        self.mu_t = nn.Parameter(torch.zeros(d_h, dtype=torch.float64))
        self.mu_k = nn.Parameter(torch.zeros(d_h, dtype=torch.float64))

    def fuse_trigger(self, h1: torch.Tensor, h2: torch.Tensor) -> torch.Tensor:
        return gate_fuse(h1, h2, self.mu_t)

    def fuse_knowledge(self, h1: torch.Tensor, h2: torch.Tensor) -> torch.Tensor:
        return gate_fuse(h1, h2, self.mu_k)
