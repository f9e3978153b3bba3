"""Description cross-entropy, group-affiliation cross-entropy and their average."""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
import torch

from ..errors import GroupOutOfRange, NonFiniteLoss, ShapeMismatch

PROB_FLOOR = 1e-12
LOG_FLOOR = math.log(PROB_FLOOR)


def loss_generation(predicted, target: Sequence[int], pad: Optional[int] = None) -> float:
    """Sum over positions of -ln p(correct token); ``predicted`` has one row per target position."""
    probs = np.asarray(predicted, dtype=np.float64)
    target = list(target)
    if probs.ndim != 2 or probs.shape[0] != len(target):
        raise ShapeMismatch(f"{probs.shape[0] if probs.ndim else 0} distributions for {len(target)} target tokens")
    total = 0.0
    for row, tok in zip(probs, target):
        if pad is not None and tok == pad:
            continue
        total -= math.log(max(float(row[tok]), PROB_FLOOR))
    return total


def loss_affiliation(group_distribution, true_group: int) -> float:
    """-ln of the renormalised probability of the true group."""
    g = np.asarray(group_distribution, dtype=np.float64)
    if not 0 <= true_group < len(g):
        raise GroupOutOfRange(f"group {true_group} not in [0, {len(g)})")
    total = g.sum()
    p = g[true_group] / total if total > 0 else 0.0
    return -math.log(max(p, PROB_FLOOR))


def loss_total(l1: float, l2: Optional[float] = None, dual_objective: bool = True) -> float:
    if not dual_objective:
        if not math.isfinite(l1):
            raise NonFiniteLoss(f"L1={l1}")
        return l1
    if not (math.isfinite(l1) and l2 is not None and math.isfinite(l2)):
        raise NonFiniteLoss(f"L1={l1} L2={l2}")
    return (l1 + l2) / 2


def batch_losses(logits: torch.Tensor, tgt_out: torch.Tensor, pad: int, group_slice: Optional[slice]):
    """Per-example (L1, L2) for a batch of teacher-forced logits.

    With ``group_slice`` set, position 0 holds the group token: it is scored
    only by L2 with the softmax restricted to the group block, and L1 covers
    the remaining positions over the full vocabulary.
    """
    logp = torch.log_softmax(logits, dim=-1).clamp_min(LOG_FLOOR)
    picked = logp.gather(-1, tgt_out.unsqueeze(-1)).squeeze(-1)
    mask = tgt_out != pad
    if group_slice is None:
        l1 = -(picked * mask).sum(dim=1)
        return l1, torch.zeros_like(l1)
    l1 = -(picked[:, 1:] * mask[:, 1:]).sum(dim=1)
    glogp = torch.log_softmax(logits[:, 0, group_slice], dim=-1).clamp_min(LOG_FLOOR)
    true_group = tgt_out[:, 0] - group_slice.start
    l2 = -glogp.gather(-1, true_group.unsqueeze(-1)).squeeze(-1)
    return l1, l2


def combine(l1: torch.Tensor, l2: torch.Tensor, dual_objective: bool) -> torch.Tensor:
    return (l1 + l2) / 2 if dual_objective else l1
