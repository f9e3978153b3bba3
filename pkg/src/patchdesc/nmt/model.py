"""A small pre-norm Transformer encoder-decoder."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import torch
from torch import nn

from ..errors import SequenceTooLong
from .vocab import Vocabulary


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 2
    heads: int = 4
    d_ff: int = 128
    max_source_len: int = 256
    max_target_len: int = 24
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("d_model", "encoder_layers", "decoder_layers", "heads", "d_ff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_source_len < 2 or self.max_target_len < 2:
            raise ValueError("max lengths must be >= 2")
        if self.d_model % self.heads:
            raise ValueError("d_model must be divisible by heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def sinusoidal_positions(length: int, dim: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float64)[:, None]
    i = torch.arange(0, dim, 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, i / dim)
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle[:, : dim // 2])
    return table


class Attention(nn.Module):
    def __init__(self, d_model: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, memory, mask):
        # mask: bool, broadcastable to (B, 1, Tq, Tk); True = blocked
        b, tq, d = x.shape
        tk = memory.shape[1]
        h = self.heads

        def split(t, n):
            return t.view(b, n, h, d // h).transpose(1, 2)

        q, k, v = split(self.q(x), tq), split(self.k(memory), tk), split(self.v(memory), tk)
        scores = q @ k.transpose(-1, -2) / math.sqrt(d // h)
        if mask is not None:
            scores = scores.masked_fill(mask, float("-inf"))
        weights = self.drop(torch.softmax(scores, dim=-1))
        return self.out((weights @ v).transpose(1, 2).reshape(b, tq, d))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int, dropout: float):
        super().__init__()
        # GELU rather than ReLU: smooth everywhere, so finite differences agree with autograd
        self.net = nn.Sequential(nn.Linear(d_model, d_ff), nn.GELU(), nn.Dropout(dropout), nn.Linear(d_ff, d_model))

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.attn = Attention(cfg.d_model, cfg.heads, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, cfg.dropout)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, mask):
        y = self.norm1(x)
        x = x + self.drop(self.attn(y, y, mask))
        return x + self.drop(self.ff(self.norm2(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.self_attn = Attention(cfg.d_model, cfg.heads, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.cross_attn = Attention(cfg.d_model, cfg.heads, cfg.dropout)
        self.norm3 = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, cfg.dropout)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, memory, self_mask, memory_mask):
        y = self.norm1(x)
        x = x + self.drop(self.self_attn(y, y, self_mask))
        x = x + self.drop(self.cross_attn(self.norm2(x), memory, memory_mask))
        return x + self.drop(self.ff(self.norm3(x)))


class Seq2SeqModel(nn.Module):
    def __init__(self, config: ModelConfig, vocab: Vocabulary, dual_objective: bool = True):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.dual_objective = dual_objective and vocab.n_groups > 0
        d = config.d_model
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(config.seed)
            self.embed = nn.Embedding(len(vocab), d)
            nn.init.normal_(self.embed.weight, std=d ** -0.5)
            self.encoder = nn.ModuleList(EncoderLayer(config) for _ in range(config.encoder_layers))
            self.decoder = nn.ModuleList(DecoderLayer(config) for _ in range(config.decoder_layers))
            self.enc_norm = nn.LayerNorm(d)
            self.dec_norm = nn.LayerNorm(d)
            self.proj = nn.Linear(d, len(vocab))
        max_len = max(config.max_source_len, config.max_target_len)
        self.register_buffer("positions", sinusoidal_positions(max_len, d).float(), persistent=False)
        self.drop = nn.Dropout(config.dropout)

    @property
    def group_slice(self) -> slice:
        off = self.vocab.group_offset
        return slice(off, off + self.vocab.n_groups)

    def _embed(self, ids):
        x = self.embed(ids) * math.sqrt(self.config.d_model)
        return self.drop(x + self.positions[: ids.shape[1]].to(x.dtype))

    def encode(self, src):
        if src.shape[1] > self.config.max_source_len:
            raise SequenceTooLong(f"source length {src.shape[1]} exceeds {self.config.max_source_len}")
        mask = (src == self.vocab.pad)[:, None, None, :]
        x = self._embed(src)
        for layer in self.encoder:
            x = layer(x, mask)
        return self.enc_norm(x), mask

    def decode(self, tgt_in, memory, memory_mask):
        t = tgt_in.shape[1]
        if t > self.config.max_target_len:
            raise SequenceTooLong(f"target length {t} exceeds {self.config.max_target_len}")
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool, device=tgt_in.device), diagonal=1)[None, None]
        x = self._embed(tgt_in)
        for layer in self.decoder:
            x = layer(x, memory, causal, memory_mask)
        return self.proj(self.dec_norm(x))

    def forward(self, src, tgt_in):
        """Logits of shape (batch, target positions, |V|)."""
        memory, mask = self.encode(src)
        return self.decode(tgt_in, memory, mask)

    def parameters_finite(self) -> bool:
        return all(torch.isfinite(p).all() for p in self.parameters())


def forward_distributions(model: Seq2SeqModel, source: Sequence[int], target_prefix: Sequence[int]) -> torch.Tensor:
    """Per-position next-token distributions for one example: shape (len(target_prefix), |V|)."""
    dtype = next(model.parameters()).dtype
    src = torch.tensor([list(source)], dtype=torch.long)
    tgt = torch.tensor([list(target_prefix)], dtype=torch.long)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            logits = model(src, tgt)[0].to(dtype)
    finally:
        model.train(was_training)
    return torch.softmax(logits, dim=-1)
