"""Teacher-forced training with the dual description/group objective."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from ..core import SourceSequence, TargetSequence
from ..errors import EmptyCorpus, NonFiniteLoss
from .losses import batch_losses, combine
from .model import Seq2SeqModel
from .vocab import Vocabulary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    clip_norm: float = 1.0
    dual_objective: bool = True
    seed: int = 0
    # "constant" or "cosine" (decays to 0 over the run, after warmup)
    lr_schedule: str = "constant"
    warmup_steps: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ValueError("training hyper-parameters must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    mean_loss: float
    mean_l1: float
    mean_l2: float


def encode_source(vocab: Vocabulary, source: SourceSequence | Sequence[str], max_len: int) -> list[int]:
    tokens = source.tokens if isinstance(source, SourceSequence) else source
    return vocab.encode(tokens)[:max_len]


def encode_target(vocab: Vocabulary, target: TargetSequence, max_len: int) -> list[int]:
    """Target ids ending in ``<eos>``, description truncated so the whole fits in ``max_len``."""
    head = [vocab.group_id(target.group)] if target.group_token is not None else []
    room = max_len - len(head) - 1
    return head + vocab.encode(target.description_tokens)[:room] + [vocab.eos]


def _pad(rows: Sequence[Sequence[int]], pad: int) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor([list(r) + [pad] * (width - len(r)) for r in rows], dtype=torch.long)


def make_batch(vocab: Vocabulary, examples: Sequence[tuple[list[int], list[int]]]):
    src = _pad([s for s, _ in examples], vocab.pad)
    tgt_out = _pad([t for _, t in examples], vocab.pad)
    tgt_in = _pad([[vocab.bos] + t[:-1] for _, t in examples], vocab.pad)
    return src, tgt_in, tgt_out


def example_losses(model: Seq2SeqModel, src, tgt_in, tgt_out, dual_objective: bool):
    logits = model(src, tgt_in)
    group_slice = model.group_slice if dual_objective else None
    l1, l2 = batch_losses(logits, tgt_out, model.vocab.pad, group_slice)
    return combine(l1, l2, dual_objective), l1, l2


def train(model: Seq2SeqModel, pairs: Sequence[tuple[SourceSequence, TargetSequence]],
          cfg: TrainConfig) -> tuple[Seq2SeqModel, list[EpochLog]]:
    if not pairs:
        raise EmptyCorpus("no training pairs")
    for _, tgt in pairs:
        if (tgt.group_token is not None) != cfg.dual_objective:
            raise ValueError("targets must carry a group token exactly when training with the dual objective")
    if cfg.dual_objective and not model.dual_objective:
        raise ValueError("model vocabulary has no group tokens")
    vocab = model.vocab
    mc = model.config
    data = [(encode_source(vocab, s, mc.max_source_len), encode_target(vocab, t, mc.max_target_len)) for s, t in pairs]

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    steps_per_epoch = math.ceil(len(data) / cfg.batch_size)
    total_steps = max(1, steps_per_epoch * cfg.epochs)

    def lr_at(step: int) -> float:
        if cfg.warmup_steps and step < cfg.warmup_steps:
            return cfg.learning_rate * (step + 1) / cfg.warmup_steps
        if cfg.lr_schedule == "cosine":
            span = max(1, total_steps - cfg.warmup_steps)
            frac = (step - cfg.warmup_steps) / span
            return cfg.learning_rate * 0.5 * (1 + math.cos(math.pi * frac))
        return cfg.learning_rate

    history: list[EpochLog] = []
    step = 0
    model.train()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(data))
        sums = np.zeros(3)
        for start in range(0, len(data), cfg.batch_size):
            batch = [data[i] for i in order[start:start + cfg.batch_size]]
            src, tgt_in, tgt_out = make_batch(vocab, batch)
            per_example, l1, l2 = example_losses(model, src, tgt_in, tgt_out, cfg.dual_objective)
            loss = per_example.mean()
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}, step {step}: L1={l1.tolist()} L2={l2.tolist()}")
            for group in optimizer.param_groups:
                group["lr"] = lr_at(step)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
            optimizer.step()
            step += 1
            sums += [per_example.sum().item(), l1.sum().item(), l2.sum().item()]
        mean = sums / len(data)
        history.append(EpochLog(epoch, float(mean[0]), float(mean[1]), float(mean[2])))
        log.info("epoch %d loss %.4f (L1 %.4f, L2 %.4f)", epoch, *mean)
    model.eval()
    if not model.parameters_finite():
        raise NonFiniteLoss("training produced non-finite parameters")
    return model, history


def write_loss_log(history: Sequence[EpochLog], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "mean_loss", "mean_L1", "mean_L2"])
        for e in history:
            writer.writerow([e.epoch, repr(e.mean_loss), repr(e.mean_l1), repr(e.mean_l2)])
