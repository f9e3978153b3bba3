"""Checkpoint container.

Layout (all integers little-endian)::

    b"PDCK" | u32 version | u32 header length | header JSON (utf-8)
    | float32 tensors in header order | sha256 of everything before it
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..errors import ChecksumMismatch, VersionMismatch
from .model import ModelConfig, Seq2SeqModel
from .vocab import Vocabulary

MAGIC = b"PDCK"
FORMAT_VERSION = 1
_DIGEST = 32


def checkpoint_bytes(model: Seq2SeqModel) -> bytes:
    state = model.state_dict()
    names = sorted(state)
    header = {
        "config": model.config.to_dict(),
        "vocab": list(model.vocab.tokens),
        "n_groups": model.vocab.n_groups,
        "dual_objective": model.dual_objective,
        "tensors": [[n, list(state[n].shape)] for n in names],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(head)), head]
    for n in names:
        parts.append(state[n].detach().cpu().to(torch.float32).numpy().astype("<f4").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def save_checkpoint(model: Seq2SeqModel, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def checkpoint_from_bytes(blob: bytes) -> Seq2SeqModel:
    if len(blob) < 12 + _DIGEST or blob[:4] != MAGIC:
        raise ChecksumMismatch("not a checkpoint or truncated header")
    version, head_len = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumMismatch("checkpoint checksum does not match its contents")
    header = json.loads(body[12:12 + head_len].decode("utf-8"))
    vocab = Vocabulary(tuple(header["vocab"]), int(header["n_groups"]))
    model = Seq2SeqModel(ModelConfig(**header["config"]), vocab, bool(header["dual_objective"]))
    offset = 12 + head_len
    state = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        raw = np.frombuffer(body, dtype="<f4", count=count, offset=offset).reshape(shape)
        state[name] = torch.from_numpy(raw.astype(np.float32))
        offset += 4 * count
    if offset != len(body):
        raise ChecksumMismatch("checkpoint payload length disagrees with its header")
    model.load_state_dict(state)
    model.eval()
    return model


def load_checkpoint(path) -> Seq2SeqModel:
    return checkpoint_from_bytes(Path(path).read_bytes())
