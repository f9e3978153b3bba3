"""BLEU, METEOR, ROUGE-L, exact match and embedding similarity for generated descriptions.

Overlap metrics compare lowercased tokens; exact match compares raw strings.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import tokenize
from .errors import DimensionMismatch, EmptyInput, ParseError


@dataclass(frozen=True)
class EvalPair:
    reference: str
    hypothesis: str
    id: str = ""


def _toks(text: str) -> list[str]:
    return tokenize(text.lower())


def _require(pairs: Sequence) -> None:
    if not pairs:
        raise EmptyInput("no evaluation pairs")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_components(pairs: Sequence[EvalPair], max_n: int = 4) -> dict:
    """Corpus-level clipped match counts and totals per n-gram order."""
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for pair in pairs:
        ref, hyp = _toks(pair.reference), _toks(pair.hypothesis)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += sum(h.values())
    return {"matches": matches, "totals": totals, "hyp_len": hyp_len, "ref_len": ref_len}


def bleu(pairs: Sequence[EvalPair], max_n: int = 4) -> float:
    """Corpus BLEU with uniform weights.

    Orders with no hypothesis n-grams anywhere in the corpus are dropped and
    the weights renormalised over the remaining orders.
    """
    _require(pairs)
    c = bleu_components(pairs, max_n)
    if c["hyp_len"] == 0:
        return 0.0
    logs = []
    for m, t in zip(c["matches"], c["totals"]):
        if t == 0:
            continue
        if m == 0:
            return 0.0
        logs.append(math.log(m / t))
    bp = 1.0 if c["hyp_len"] > c["ref_len"] else math.exp(1.0 - c["ref_len"] / c["hyp_len"])
    return bp * math.exp(sum(logs) / len(logs))


def _align(ref: Sequence[str], hyp: Sequence[str]) -> list[tuple[int, int]]:
    used = [False] * len(ref)
    out = []
    for i, tok in enumerate(hyp):
        for j, r in enumerate(ref):
            if not used[j] and r == tok:
                used[j] = True
                out.append((i, j))
                break
    return out


def meteor_pair(reference: str, hypothesis: str) -> float:
    ref, hyp = _toks(reference), _toks(hypothesis)
    alignment = _align(ref, hyp)
    m = len(alignment)
    if m == 0:
        return 0.0
    precision, recall = m / len(hyp), m / len(ref)
    f = 10 * precision * recall / (recall + 9 * precision)
    chunks = 1
    for (hi, rj), (hi2, rj2) in zip(alignment, alignment[1:]):
        if not (hi2 == hi + 1 and rj2 == rj + 1):
            chunks += 1
    penalty = 0.5 * (chunks / m) ** 3
    return f * (1 - penalty)


def meteor(pairs: Sequence[EvalPair]) -> float:
    _require(pairs)
    return sum(meteor_pair(p.reference, p.hypothesis) for p in pairs) / len(pairs)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_pair(reference: str, hypothesis: str) -> float:
    ref, hyp = _toks(reference), _toks(hypothesis)
    lcs = lcs_length(ref, hyp)
    if lcs == 0:
        return 0.0
    recall, precision = lcs / len(ref), lcs / len(hyp)
    return 2 * precision * recall / (precision + recall)


def rouge_l(pairs: Sequence[EvalPair]) -> float:
    _require(pairs)
    return sum(rouge_l_pair(p.reference, p.hypothesis) for p in pairs) / len(pairs)


def exact_match(pairs: Sequence[EvalPair]) -> float:
    _require(pairs)
    return sum(p.reference == p.hypothesis for p in pairs) / len(pairs)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0 or nv == 0:
        # two empty bags are the same text as far as the embedder can tell
        return 1.0 if nu == nv == 0 else 0.0
    return float(np.dot(u, v) / (nu * nv))


Embedder = Callable[[str], np.ndarray]


def tfidf_embedder(references: Sequence[str]) -> Embedder:
    """TF-IDF fitted on the references: a stand-in for a sentence encoder."""
    from .clustering import embed, fit_tfidf

    vocab = fit_tfidf(list(references))
    return lambda text: embed(vocab, text)


def _clamped_mean(values: Sequence[float]) -> float:
    return sum(min(1.0, max(0.0, x)) for x in values) / len(values)


def sem_sim(pairs: Sequence[EvalPair], embedder: Optional[Embedder] = None) -> float:
    _require(pairs)
    if embedder is None:
        embedder = tfidf_embedder([p.reference for p in pairs])
    values = []
    for p in pairs:
        u, v = np.asarray(embedder(p.reference)), np.asarray(embedder(p.hypothesis))
        if u.shape != v.shape:
            raise DimensionMismatch(f"embedding shapes differ for {p.id or p.reference!r}: {u.shape} vs {v.shape}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise DimensionMismatch(f"non-finite embedding for {p.id or p.reference!r}")
        values.append(cosine(u, v))
    return _clamped_mean(values)


def load_vectors(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[str(rec["id"])] = (np.asarray(rec["ref_vec"], dtype=np.float64),
                                       np.asarray(rec["hyp_vec"], dtype=np.float64))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(lineno, f"bad vector record ({exc})") from None
    return out


def sem_sim_precomputed(pairs: Sequence[EvalPair], vectors: Mapping[str, tuple[np.ndarray, np.ndarray]]) -> float:
    _require(pairs)
    values = []
    dim = None
    for p in pairs:
        if p.id not in vectors:
            raise DimensionMismatch(f"no precomputed vectors for id {p.id!r}")
        u, v = vectors[p.id]
        if u.shape != v.shape or (dim is not None and u.shape != dim):
            raise DimensionMismatch(f"vector dimensions disagree for id {p.id!r}")
        dim = u.shape
        values.append(cosine(u, v))
    return _clamped_mean(values)


@dataclass(frozen=True)
class MetricReport:
    bleu: float
    meteor: float
    rouge_l_f1: float
    exact_match_rate: float
    sem_sim: float
    sem_sim_is_proxy: bool = True

    def __post_init__(self):
        for name in ("bleu", "meteor", "rouge_l_f1", "exact_match_rate", "sem_sim"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0 + 1e-12:
                raise ValueError(f"{name}={value} outside [0, 1]")

    def as_percent(self) -> dict:
        """Scores x100 rounded to two decimals, the way result tables print them."""
        sem_key = "semsim_proxy" if self.sem_sim_is_proxy else "sem_sim"
        return {
            "bleu": round(100 * self.bleu, 2),
            "meteor": round(100 * self.meteor, 2),
            "rouge_l": round(100 * self.rouge_l_f1, 2),
            "exact_match": round(100 * self.exact_match_rate, 2),
            sem_key: round(100 * self.sem_sim, 2),
        }


def evaluate(pairs: Sequence[EvalPair], vectors: Optional[Mapping] = None,
             embedder: Optional[Embedder] = None) -> MetricReport:
    _require(pairs)
    if vectors is not None:
        sim, proxy = sem_sim_precomputed(pairs, vectors), False
    else:
        sim, proxy = sem_sim(pairs, embedder), embedder is None
    return MetricReport(
        bleu=min(1.0, bleu(pairs)),
        meteor=meteor(pairs),
        rouge_l_f1=rouge_l(pairs),
        exact_match_rate=exact_match(pairs),
        sem_sim=sim,
        sem_sim_is_proxy=proxy,
    )
