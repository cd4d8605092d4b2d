"""Per-relation knowledge sets and the training-only guidance loss.

Each relation owns a small ordered list of characteristic words or
phrases.  They are encoded with the shared (siamese) encoder, fused
against the two pooled summary vectors, and the resulting label feature
pulls the fused trigger feature toward it via a squared-distance loss.
Inference never touches this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import torch

from .corpus import RelationSet
from .fusion import gate_fuse


class LexiconError(ValueError):
    """Raised when a knowledge lexicon file fails validation."""


@dataclass(frozen=True)
class KnowledgeLexicon:
    """Relation label -> ordered knowledge words/phrases."""

    entries: dict[str, tuple[str, ...]]

    def __contains__(self, relation):
        return relation in self.entries

    def phrases(self, relation: str) -> tuple[str, ...]:
        try:
            return self.entries[relation]
        except KeyError:
            raise LexiconError(f"no knowledge entry for relation {relation!r}") from None


def load_lexicon(path, relations: RelationSet) -> KnowledgeLexicon:
    """Load and validate a JSON lexicon mapping label -> list of phrases.

    Every relation in the set must be present with at least one
    non-empty phrase; duplicates are legal and kept in order.
    """
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise LexiconError("lexicon must be a JSON object")
    for label in raw:
        if label not in relations:
            raise LexiconError(f"lexicon relation {label!r} not in the relation set")
    missing = [label for label in relations.labels if label not in raw]
    if missing:
        raise LexiconError(f"lexicon missing relations: {', '.join(missing)}")
    entries = {}
    for label, phrases in raw.items():
        if not isinstance(phrases, list) or not phrases:
            raise LexiconError(f"relation {label!r} needs a non-empty phrase list")
        if any(not isinstance(p, str) or not p.strip() for p in phrases):
            raise LexiconError(f"relation {label!r} has an empty phrase")
        entries[label] = tuple(phrases)
    return KnowledgeLexicon(entries)


def save_lexicon(lexicon: KnowledgeLexicon, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump({k: list(v) for k, v in lexicon.entries.items()},
                  f, ensure_ascii=False, indent=1, sort_keys=True)


def context_max_feature(knowledge_vecs: torch.Tensor,
                        pooled: torch.Tensor) -> torch.Tensor:
    """Componentwise max over phrases of (phrase vector * pooled vector)."""
    if knowledge_vecs.dim() != 2 or knowledge_vecs.shape[0] == 0:
        raise ValueError("need a non-empty (r_n, d_h) stack of knowledge vectors")
    return (knowledge_vecs * pooled).max(dim=0).values


def encode_knowledge(relation: str, lexicon: KnowledgeLexicon, encoder,
                     tokenizer, cache: Optional[dict] = None) -> torch.Tensor:
    """Stack the siamese-encoded phrase vectors for one relation.

    When ``cache`` is given the vectors are computed once, detached, and
    reused (freeze-and-cache mode); otherwise they track the live
    encoder weights.
    """
    if cache is not None and relation in cache:
        return cache[relation]
    vecs = torch.stack([
        encoder.encode_phrase(tokenizer(phrase))
        for phrase in lexicon.phrases(relation)
    ])
    if cache is not None:
        vecs = vecs.detach()
        cache[relation] = vecs
    return vecs


def knowledge_feature(relation: str, cls1: torch.Tensor, cls2: torch.Tensor,
                      lexicon: KnowledgeLexicon, encoder, tokenizer,
                      mu_k: torch.Tensor,
                      cache: Optional[dict] = None) -> torch.Tensor:
    """Fused label-knowledge feature for one relation.

    The phrase vectors are blended with each pooled summary vector by a
    componentwise product-then-max, and the two views are combined by
    the knowledge gate.
    """
    vecs = encode_knowledge(relation, lexicon, encoder, tokenizer, cache)
    h1 = context_max_feature(vecs, cls1)
    h2 = context_max_feature(vecs, cls2)
    return gate_fuse(h1, h2, mu_k)


def guidance_loss(k_feat: torch.Tensor, t_feat: torch.Tensor) -> torch.Tensor:
    """Squared L2 distance between the knowledge and trigger features."""
    if k_feat.shape != t_feat.shape:
        raise ValueError(
            f"feature shapes differ: {tuple(k_feat.shape)} vs {tuple(t_feat.shape)}"
        )
    return ((k_feat - t_feat) ** 2).sum()
