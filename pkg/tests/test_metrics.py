import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from patchdesc.errors import DimensionMismatch, EmptyInput
from patchdesc.metrics import (
    EvalPair,
    MetricReport,
    bleu,
    evaluate,
    exact_match,
    lcs_length,
    load_vectors,
    meteor,
    meteor_pair,
    rouge_l,
    sem_sim,
    sem_sim_precomputed,
)

P = EvalPair


def test_bleu_hand_value():
    assert bleu([P("fix null pointer dereference", "fix null pointer")]) == pytest.approx(math.exp(1 - 4 / 3), abs=1e-4)
    assert bleu([P("fix null pointer dereference", "fix null pointer")]) == pytest.approx(0.7165, abs=1e-4)


def test_bleu_trivial():
    assert bleu([P("a b c d e", "a b c d e"), P("fix it now please", "fix it now please")]) == pytest.approx(1.0)
    assert bleu([P("fix leak", "update docs")]) == 0.0
    with pytest.raises(EmptyInput):
        bleu([])


def test_meteor_hand_values():
    assert meteor([P("fix the leak", "fix the leak")]) == pytest.approx(1 - 0.5 / 27, abs=1e-4)
    assert meteor([P("fix the memory leak", "fix memory leak")]) == pytest.approx(0.6553, abs=1e-4)
    assert meteor([P("a b", "c d")]) == 0.0


def test_rouge_hand_values():
    assert rouge_l([P("fix pointer dereference", "fix null pointer")]) == pytest.approx(0.6667, abs=1e-4)
    assert rouge_l([P("fix leak", "fix leak")]) == 1.0
    assert rouge_l([P("fix leak", "")]) == 0.0


def test_exact_match():
    assert exact_match([P("Fix leak", "Fix leak")]) == 1.0
    assert exact_match([P("Fix leak", "fix leak")]) == 0.0
    assert exact_match([P("Fix leak", "Fix leak ")]) == 0.0
    assert exact_match([P("a", "a"), P("a", "b"), P("a", "c"), P("a", "d")]) == 0.25


def brute_lcs(a, b):
    for size in range(min(len(a), len(b)), 0, -1):
        subs = set(itertools.combinations(a, size))
        if any(c in subs for c in itertools.combinations(b, size)):
            return size
    return 0


def test_lcs_exhaustive_small():
    alphabet = "ab"
    for la in range(5):
        for lb in range(5):
            for a in itertools.product(alphabet, repeat=la):
                for b in itertools.product(alphabet, repeat=lb):
                    assert lcs_length(a, b) == brute_lcs(a, b)


@given(st.lists(st.sampled_from("abc"), max_size=8), st.lists(st.sampled_from("abc"), max_size=8))
def test_lcs_matches_brute_force(a, b):
    assert lcs_length(a, b) == brute_lcs(a, b)


words = st.lists(st.sampled_from(["fix", "null", "leak", "in", "the", "buffer", "check"]), min_size=1, max_size=8).map(" ".join)


@given(words, words)
def test_scores_in_unit_interval(ref, hyp):
    pairs = [P(ref, hyp)]
    for f in (bleu, meteor, rouge_l, exact_match):
        assert 0.0 <= f(pairs) <= 1.0 + 1e-12


@given(words)
def test_identity_scores(text):
    pairs = [P(text, text)]
    assert rouge_l(pairs) == 1.0 and exact_match(pairs) == 1.0
    assert meteor(pairs) == pytest.approx(1 - 0.5 / len(text.split()) ** 3)


@given(words, words)
def test_rouge_symmetric(a, b):
    assert rouge_l([P(a, b)]) == pytest.approx(rouge_l([P(b, a)]))


def test_meteor_case_insensitive():
    assert meteor_pair("Fix Leak", "fix leak") == meteor_pair("fix leak", "fix leak")


def test_sem_sim():
    assert sem_sim([P("fix leak", "fix leak")]) == pytest.approx(1.0)
    assert sem_sim([P("fix leak", "update docs"), P("update docs", "fix leak")]) == 0.0
    assert sem_sim([P("x", "y")], embedder=lambda t: np.ones(3)) == pytest.approx(1.0)


def test_sem_sim_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        sem_sim([P("a", "b")], embedder=lambda t: np.ones(len(t)) if t == "a" else np.ones(5))


def test_precomputed_vectors(tmp_path):
    path = tmp_path / "v.jsonl"
    path.write_text(json.dumps({"id": "a", "ref_vec": [1, 0], "hyp_vec": [1, 0]}) + "\n")
    vectors = load_vectors(path)
    assert sem_sim_precomputed([P("x", "y", "a")], vectors) == 1.0
    with pytest.raises(DimensionMismatch, match="'b'"):
        sem_sim_precomputed([P("x", "y", "b")], vectors)


def test_evaluate_report():
    report = evaluate([P("fix leak", "fix leak")])
    assert report.sem_sim_is_proxy
    assert report.as_percent() == {"bleu": 100.0, "meteor": 93.75, "rouge_l": 100.0, "exact_match": 100.0, "semsim_proxy": 100.0}
    with pytest.raises(ValueError):
        MetricReport(1.5, 0, 0, 0, 0)
