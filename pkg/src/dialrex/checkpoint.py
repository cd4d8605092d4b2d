"""Checkpoint archive: JSON manifest + raw little-endian float64 payload.

Layout: 4-byte magic, uint32 manifest byte length, the manifest (UTF-8
JSON with sorted keys), then each tensor's bytes at the offsets the
manifest records.  Everything is deterministic, so saving a loaded
model reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from typing import Optional

import numpy as np
import torch

from .corpus import TOKENIZERS, RelationSet
from .encoder import EncoderConfig, Vocabulary

MAGIC = b"DRX1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised on malformed, mismatched, or wrong-version checkpoints."""


def save_checkpoint(model, path, extra: Optional[dict] = None) -> None:
    """Write all named parameters plus the config needed to rebuild."""
    tensors = []
    payload = bytearray()
    for name, p in model.named_parameters():
        data = p.detach().numpy().astype("<f8").tobytes()
        tensors.append({
            "name": name,
            "shape": list(p.shape),
            "dtype": "float64",
            "offset": len(payload),
            "nbytes": len(data),
        })
        payload.extend(data)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": {
            "encoder": asdict(model.encoder.config),
            "relations": list(model.relations.labels),
            "vocab": list(model.vocab.itos),
            "tokenizer": getattr(model.tokenizer, "name", "whitespace"),
            "options": asdict(model.options),
        },
        "extra": extra or {},
        "tensors": tensors,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(bytes(payload))


def _read_manifest(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint archive")
    (length,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + length:
        raise CheckpointError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[8:8 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest ({exc})") from None
    return manifest, raw[8 + length:]


def load_checkpoint(path, tokenizer=None):
    """Rebuild the model a checkpoint describes and restore its tensors."""
    from .model import ModelOptions, RelationModel

    manifest, payload = _read_manifest(path)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {version!r} "
            f"(expected {FORMAT_VERSION})"
        )
    cfg = manifest["config"]
    encoder_config = EncoderConfig(**cfg["encoder"])
    relations = RelationSet(tuple(cfg["relations"]))
    vocab = Vocabulary.from_itos(cfg["vocab"])
    if tokenizer is None:
        name = cfg.get("tokenizer", "whitespace")
        if name not in TOKENIZERS:
            raise CheckpointError(
                f"checkpoint uses tokenizer {name!r}; pass one explicitly"
            )
        tokenizer = TOKENIZERS[name]()
    model = RelationModel(encoder_config, vocab, relations, tokenizer,
                          ModelOptions(**cfg["options"]))

    params = dict(model.named_parameters())
    stored = {t["name"] for t in manifest["tensors"]}
    missing = sorted(set(params) - stored)
    if missing:
        raise CheckpointError(f"checkpoint missing tensors: {', '.join(missing)}")
    for entry in manifest["tensors"]:
        name = entry["name"]
        if name not in params:
            raise CheckpointError(f"unexpected tensor {name!r} in checkpoint")
        p = params[name]
        if list(p.shape) != entry["shape"]:
            raise CheckpointError(
                f"tensor {name!r} has shape {entry['shape']} in the checkpoint "
                f"but the config implies {list(p.shape)}"
            )
        chunk = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        if len(chunk) != entry["nbytes"]:
            raise CheckpointError(f"tensor {name!r}: truncated payload")
        arr = np.frombuffer(chunk, dtype="<f8").reshape(entry["shape"])
        with torch.no_grad():
            p.copy_(torch.from_numpy(arr.copy()))
    return model


def checkpoint_extra(path) -> dict:
    """Read just the free-form extra section (config hash etc.)."""
    manifest, _ = _read_manifest(path)
    return manifest.get("extra", {})
