import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patchdesc.clustering import (
    ClusterModel,
    assign,
    assign_vector,
    default_k,
    embed,
    fit_description_clusters,
    fit_kmeans,
    fit_tfidf,
)
from patchdesc.errors import EmptyInput


def test_tfidf_idf_and_norm():
    vocab = fit_tfidf(["fix leak", "fix crash", "update docs"])
    assert vocab.df("fix") == 2 and vocab.n_documents == 3
    idf_fix = vocab.idf[vocab.index["fix"]]
    assert idf_fix == pytest.approx(math.log(4 / 3) + 1)
    v = embed(vocab, "fix leak")
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert not embed(vocab, "unseen words").any()
    with pytest.raises(EmptyInput):
        fit_tfidf([])


@pytest.mark.parametrize("n, k", [(1, 2), (8, 2), (50, 5), (400, 14), (30000, 122)])
def test_default_k(n, k):
    assert default_k(n) == k


def blobs(seed=0, per=20, centers=((0, 0), (10, 0), (0, 10))):
    rng = np.random.default_rng(seed)
    return np.vstack([rng.normal(c, 0.3, size=(per, 2)) for c in centers]), np.repeat(np.arange(len(centers)), per)


def test_separated_groups_recovered():
    x, truth = blobs()
    model = fit_kmeans(x, 3, seed=1)
    for g in range(3):
        assert len(set(model.labels[truth == g])) == 1
    assert len(set(model.labels)) == 3


def test_objective_monotone_and_assign_argmin():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(80, 4))
    model = fit_kmeans(x, 6, seed=2, check_monotone=True)
    hist = model.objective_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
    for row, label in zip(x, model.labels):
        d = ((model.centroids - row) ** 2).sum(axis=1)
        assert assign_vector(model, row) == label == int(d.argmin())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 5), st.floats(0.5, 20))
def test_kmeans_properties(seed, k, scale):
    x = np.random.default_rng(seed).normal(size=(25, 3))
    a = fit_kmeans(x, k, seed=seed, check_monotone=True)
    b = fit_kmeans(x, k, seed=seed)
    assert np.array_equal(a.labels, b.labels) and np.array_equal(a.centroids, b.centroids)
    scaled = fit_kmeans(x * scale, k, seed=seed)
    assert np.array_equal(a.labels, scaled.labels)


def test_k_reduced_to_distinct(caplog):
    model = fit_kmeans(np.array([[0.0], [0.0], [1.0]]), 3)
    assert model.k == 2 and "distinct" in caplog.text


def test_description_clusters_roundtrip(tmp_path):
    descs = ["fix null pointer", "fix null deref", "update docs", "update readme docs", "fix null check"]
    # single k-means++ start; seed 0 settles in a worse local optimum on this tiny set
    model = fit_description_clusters(descs, k=2, seed=1)
    groups = [assign(model, d) for d in descs]
    assert groups[0] == groups[1] == groups[4] and groups[2] == groups[3] and groups[0] != groups[2]
    model.save(tmp_path / "c.json")
    loaded = ClusterModel.load(tmp_path / "c.json")
    assert [assign(loaded, d) for d in descs] == groups
    assert loaded.to_json() == model.to_json()
