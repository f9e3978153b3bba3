"""TF-IDF description embeddings and seeded k-means grouping."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import tokenize
from .errors import EmptyInput

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TfidfVocabulary:
    terms: tuple[str, ...]
    idf: np.ndarray
    n_documents: int
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "idf", np.asarray(self.idf, dtype=np.float64))
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def df(self, term: str) -> int:
        # inverse of idf = ln((1+N)/(1+df)) + 1
        i = self.index[term]
        return int(round((1 + self.n_documents) / math.exp(self.idf[i] - 1) - 1))


def _terms(text: str) -> list[str]:
    return tokenize(text.lower())


def fit_tfidf(descriptions: Sequence[str]) -> TfidfVocabulary:
    if not descriptions:
        raise EmptyInput("no descriptions to fit TF-IDF on")
    df: dict[str, int] = {}
    for d in descriptions:
        for t in set(_terms(d)):
            df[t] = df.get(t, 0) + 1
    terms = sorted(df)
    n = len(descriptions)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms], dtype=np.float64)
    return TfidfVocabulary(tuple(terms), idf, n)


def embed(vocab: TfidfVocabulary, description: str) -> np.ndarray:
    v = np.zeros(len(vocab.terms), dtype=np.float64)
    for t in _terms(description):
        i = vocab.index.get(t)
        if i is not None:
            v[i] += 1.0
    v *= vocab.idf
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def embed_many(vocab: TfidfVocabulary, descriptions: Sequence[str]) -> np.ndarray:
    if not descriptions:
        return np.zeros((0, len(vocab.terms)))
    return np.stack([embed(vocab, d) for d in descriptions])


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    vocabulary: TfidfVocabulary | None = None
    seed: int = 0
    objective_history: list[float] = field(default_factory=list)
    labels: np.ndarray | None = None

    def to_json(self) -> dict:
        if self.vocabulary is None:
            raise ValueError("cluster model has no vocabulary to serialize")
        return {
            "k": self.k,
            "seed": self.seed,
            "terms": list(self.vocabulary.terms),
            "idf": [float(x) for x in self.vocabulary.idf],
            "n_documents": self.vocabulary.n_documents,
            "centroids": [[float(x) for x in row] for row in self.centroids],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClusterModel":
        vocab = TfidfVocabulary(tuple(obj["terms"]), np.array(obj["idf"], dtype=np.float64), int(obj.get("n_documents", 0)))
        centroids = np.array(obj["centroids"], dtype=np.float64).reshape(int(obj["k"]), len(vocab.terms))
        return cls(int(obj["k"]), centroids, vocab, int(obj["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ClusterModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def default_k(n_train: int) -> int:
    return max(2, int(math.floor(math.sqrt(n_train / 2) + 0.5)))


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # explicit differences rather than the |x|^2 - 2xc + |c|^2 expansion, so exact ties stay exact
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(x, x[chosen]).min(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0:
            break
        r = rng.random() * total
        i = int(np.searchsorted(np.cumsum(d2), r, side="right"))
        i = min(i, n - 1)
        while d2[i] <= 0:  # never pick a point already covered by a centroid
            i = (i + 1) % n
        chosen.append(i)
        d2 = np.minimum(d2, _sq_dists(x, x[[i]])[:, 0])
    return x[chosen].copy()


def fit_kmeans(vectors, k: int, seed: int = 0, max_iter: int = 100, check_monotone: bool = False) -> ClusterModel:
    """k-means++ seeding then Lloyd iterations until the assignment stops changing.

    ``k`` is lowered to the number of distinct vectors. Empty clusters are
    re-seeded with the point farthest from its centroid.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise EmptyInput("no vectors to cluster")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    distinct = len(np.unique(x, axis=0))
    if k > distinct:
        log.warning("k=%d exceeds %d distinct vectors; using k=%d", k, distinct, distinct)
        k = distinct
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(x, k, rng)
    k = len(centroids)

    history: list[float] = []
    labels = None
    for _ in range(max(1, max_iter)):
        d = _sq_dists(x, centroids)
        new_labels = d.argmin(axis=1)
        objective = float(d[np.arange(len(x)), new_labels].sum())
        if check_monotone and history and objective > history[-1] + 1e-9 * max(1.0, history[-1]):
            raise AssertionError(f"k-means objective rose from {history[-1]} to {objective}")
        history.append(objective)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        point_cost = d[np.arange(len(x)), labels]
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
            else:
                far = int(point_cost.argmax())
                centroids[c] = x[far]
                point_cost[far] = 0.0
    # max_iter can stop after a centroid update; keep labels consistent with centroids
    labels = _sq_dists(x, centroids).argmin(axis=1)
    return ClusterModel(k, centroids, None, seed, history, labels)


def assign_vector(model: ClusterModel, v: np.ndarray) -> int:
    d = _sq_dists(np.asarray(v, dtype=np.float64)[None, :], model.centroids)[0]
    return int(d.argmin())


def assign(model: ClusterModel, description: str) -> int:
    if model.vocabulary is None:
        raise ValueError("cluster model has no vocabulary")
    return assign_vector(model, embed(model.vocabulary, description))


def fit_description_clusters(descriptions: Sequence[str], k: int | None = None, seed: int = 0,
                             max_iter: int = 100) -> ClusterModel:
    vocab = fit_tfidf(descriptions)
    model = fit_kmeans(embed_many(vocab, descriptions), k or default_k(len(descriptions)), seed, max_iter)
    model.vocabulary = vocab
    return model
