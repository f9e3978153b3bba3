"""Greedy and beam-search decoding."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import torch

from ..core import SourceSequence
from .model import Seq2SeqModel
from .train import encode_source


def _step_logprobs(model: Seq2SeqModel, memory, memory_mask, prefixes: Sequence[Sequence[int]], first: bool) -> np.ndarray:
    """Next-token log-probabilities (float64) for each prefix, restricted to the legal tokens.

    In dual-objective mode the first step may only emit group tokens; later
    steps may emit anything except padding, ``<bos>`` and group tokens.
    """
    tgt = torch.tensor([list(p) for p in prefixes], dtype=torch.long)
    n = len(prefixes)
    with torch.no_grad():
        logits = model.decode(tgt, memory.expand(n, -1, -1), memory_mask.expand(n, -1, -1, -1))[:, -1]
    logits = logits.double().numpy().copy()
    vocab = model.vocab
    allowed = np.zeros(logits.shape[1], dtype=bool)
    gs = model.group_slice
    if model.dual_objective and first:
        allowed[gs] = True
    else:
        allowed[:] = True
        allowed[[vocab.pad, vocab.bos]] = False
        allowed[gs] = False
    logits[:, ~allowed] = -np.inf
    top = logits.max(axis=1, keepdims=True)
    shifted = logits - top
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _finish(model: Seq2SeqModel, ids: Sequence[int]) -> tuple[Optional[int], str]:
    vocab = model.vocab
    group = None
    body = list(ids)
    if model.dual_objective and body:
        group = body[0] - vocab.group_offset
        body = body[1:]
    if vocab.eos in body:
        body = body[: body.index(vocab.eos)]
    return group, " ".join(vocab.decode(body))


def _prepare(model: Seq2SeqModel, source, max_len: Optional[int]):
    limit = model.config.max_target_len if max_len is None else min(max_len, model.config.max_target_len)
    src = torch.tensor([encode_source(model.vocab, source, model.config.max_source_len)], dtype=torch.long)
    model.eval()
    with torch.no_grad():
        memory, mask = model.encode(src)
    return memory, mask, limit


def greedy_decode(model: Seq2SeqModel, source: SourceSequence | Sequence[str],
                  max_len: Optional[int] = None) -> tuple[Optional[int], str]:
    memory, mask, limit = _prepare(model, source, max_len)
    vocab = model.vocab
    out: list[int] = []
    while len(out) < limit:
        logp = _step_logprobs(model, memory, mask, [[vocab.bos] + out], first=not out)[0]
        tok = int(np.argmax(logp))  # first index wins ties
        out.append(tok)
        if tok == vocab.eos:
            break
    return _finish(model, out)


def beam_decode(model: Seq2SeqModel, source: SourceSequence | Sequence[str], width: int = 4,
                max_len: Optional[int] = None) -> tuple[Optional[int], str]:
    """Beam search ranked by summed log-probability; ties go to the lexicographically smaller id sequence."""
    if width < 1:
        raise ValueError("beam width must be >= 1")
    memory, mask, limit = _prepare(model, source, max_len)
    eos = model.vocab.eos
    beams: list[tuple[float, tuple[int, ...], bool]] = [(0.0, (), False)]
    while True:
        live = [b for b in beams if not b[2]]
        if not live:
            break
        candidates = [b for b in beams if b[2]]
        logp = _step_logprobs(model, memory, mask, [(model.vocab.bos,) + ids for _, ids, _ in live], first=not live[0][1])
        for (score, ids, _), row in zip(live, logp):
            finite = np.flatnonzero(np.isfinite(row))
            # only the best `width` continuations of a beam can survive
            keep = finite[np.lexsort((finite, -row[finite]))][:width]
            for tok in keep:
                new_ids = ids + (int(tok),)
                done = int(tok) == eos or len(new_ids) >= limit
                candidates.append((score + float(row[tok]), new_ids, done))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        beams = candidates[:width]
    best = min(beams, key=lambda c: (-c[0], c[1]))
    return _finish(model, best[1])


def generate(model: Seq2SeqModel, source: SourceSequence | Sequence[str], mode: str = "greedy",
             beam_width: int = 4, max_len: Optional[int] = None) -> tuple[Optional[int], str]:
    if mode == "greedy":
        return greedy_decode(model, source, max_len)
    if mode == "beam":
        return beam_decode(model, source, beam_width, max_len)
    raise ValueError(f"unknown decoding mode {mode!r}")
