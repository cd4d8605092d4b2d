"""Contextual encoder contract and its trainable reference implementation.

Downstream modules consume only :class:`EncodedSequence`, so any encoder
producing per-token hidden states plus the two pooled marker vectors can
be swapped in.  The reference encoder is a small transformer: token and
learned position embeddings followed by blocks of single-head scaled
dot-product self-attention with a residual connection and layer norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import torch
from torch import nn

from .corpus import CLS_TOKEN, SPECIAL_TOKENS, UNK_TOKEN, TokenizedInput

LAYER_NORM_EPS = 1e-5
INIT_RANGE = 0.05


@dataclass
class EncoderConfig:
    d_h: int = 64
    layers: int = 2
    vocab_size: int = 0          # filled in once the vocabulary is built
    max_positions: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.d_h <= 0 or self.d_h % 2 != 0:
            raise ValueError("d_h must be positive and even")
        if self.layers <= 0:
            raise ValueError("layers must be positive")


@dataclass(frozen=True)
class EncodedSequence:
    """Per-token hidden states plus the two pooled marker vectors.

    ``cls1``/``cls2`` are the hidden rows at the two [CLS] positions; the
    dialogue region is carried along for pointer masking downstream.
    """

    hidden: torch.Tensor                       # (seq_len, d_h)
    cls1: torch.Tensor                         # (d_h,)
    cls2: torch.Tensor                         # (d_h,)
    dialogue_region: Optional[tuple[int, int]] = None


class Vocabulary:
    """Token -> id map with a reserved unknown id."""

    def __init__(self, tokens: Iterable[str]):
        self.itos = list(SPECIAL_TOKENS)
        seen = set(self.itos)
        for tok in tokens:
            if tok not in seen:
                seen.add(tok)
                self.itos.append(tok)
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}
        self.unk_id = self.stoi[UNK_TOKEN]

    def __len__(self):
        return len(self.itos)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(tok, self.unk_id) for tok in tokens]

    @classmethod
    def build(cls, token_streams: Iterable[Iterable[str]]) -> "Vocabulary":
        """Deterministic vocabulary: specials first, then sorted corpus tokens."""
        tokens = sorted({tok for stream in token_streams for tok in stream})
        return cls(tokens)

    @classmethod
    def from_itos(cls, itos: list[str]) -> "Vocabulary":
        """Restore a saved vocabulary verbatim (checkpoint loading)."""
        vocab = cls.__new__(cls)
        vocab.itos = list(itos)
        vocab.stoi = {tok: i for i, tok in enumerate(vocab.itos)}
        if UNK_TOKEN not in vocab.stoi:
            raise ValueError("vocabulary is missing the unknown token")
        vocab.unk_id = vocab.stoi[UNK_TOKEN]
        return vocab


class SelfAttentionBlock(nn.Module):
    """Single-head scaled dot-product self-attention + residual + layer norm."""

    def __init__(self, d_h: int):
        super().__init__()
        self.query = nn.Linear(d_h, d_h)
        self.key = nn.Linear(d_h, d_h)
        self.value = nn.Linear(d_h, d_h)
        self.out = nn.Linear(d_h, d_h)
        self.norm = nn.LayerNorm(d_h, eps=LAYER_NORM_EPS)
        self.scale = 1.0 / math.sqrt(d_h)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = self.query(x), self.key(x), self.value(x)
        attn = torch.softmax(q @ k.T * self.scale, dim=-1)
        return self.norm(x + self.out(attn @ v))


class Encoder(nn.Module):
    """Reference encoder; parameters are float64 for exact gradient checks."""

    def __init__(self, config: EncoderConfig, vocab: Vocabulary):
        super().__init__()
        if config.vocab_size and config.vocab_size != len(vocab):
            raise ValueError(
                f"config vocab_size {config.vocab_size} != vocabulary size {len(vocab)}"
            )
        config.vocab_size = len(vocab)
        self.config = config
        self.vocab = vocab
        self.tok_emb = nn.Embedding(len(vocab), config.d_h)
        self.pos_emb = nn.Embedding(config.max_positions, config.d_h)
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(config.d_h) for _ in range(config.layers)
        )
        self.double()
        self.reset_parameters()

    def reset_parameters(self) -> None:
        gen = torch.Generator().manual_seed(self.config.seed)
        for name, p in sorted(self.named_parameters()):
            if p.dim() >= 2:
                with torch.no_grad():
                    p.uniform_(-INIT_RANGE, INIT_RANGE, generator=gen)
            elif "norm.weight" in name:
                nn.init.ones_(p)
            else:
                nn.init.zeros_(p)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.shape[0] > self.config.max_positions:
            raise ValueError(
                f"sequence length {ids.shape[0]} exceeds max positions "
                f"{self.config.max_positions}"
            )
        positions = torch.arange(ids.shape[0])
        x = self.tok_emb(ids) + self.pos_emb(positions)
        for block in self.blocks:
            x = block(x)
        return x

    def encode(self, tokenized: TokenizedInput) -> EncodedSequence:
        """Encode a marked input sequence and pool the two [CLS] rows."""
        ids = torch.tensor(self.vocab.encode(tokenized.tokens), dtype=torch.long)
        hidden = self(ids)
        return EncodedSequence(
            hidden=hidden,
            cls1=hidden[tokenized.cls1_index],
            cls2=hidden[tokenized.cls2_index],
            dialogue_region=tokenized.dialogue_region,
        )

    def encode_phrase(self, phrase: list[str]) -> torch.Tensor:
        """Encode [CLS] + phrase with the same (siamese) weights.

        Returns the start-marker row as the phrase representation.
        """
        if not phrase:
            raise ValueError("cannot encode an empty phrase")
        ids = torch.tensor(self.vocab.encode([CLS_TOKEN] + list(phrase)),
                           dtype=torch.long)
        return self(ids)[0]
