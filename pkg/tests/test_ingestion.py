import json

import pytest
from hypothesis import given, settings, strategies as st

from patchdesc.errors import DegenerateSplit, ParseError
from patchdesc.ingestion import (
    CleaningRules,
    Corpus,
    SplitSpec,
    SplitStrategy,
    clean_description,
    filter_by_length,
    load_corpus,
    read_split_manifest,
    split,
    write_corpus,
    write_split_manifest,
)

from conftest import record, simple_patch, write_jsonl


def test_load_empty(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("")
    assert len(load_corpus(p)) == 0


def test_load_preserves_order(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [record("b"), record("a"), record("c", extra_field=1)])
    assert [x.id for x in load_corpus(p)] == ["b", "a", "c"]


def test_load_missing_field_reports_line(tmp_path):
    bad = record("b")
    del bad["description"]
    p = write_jsonl(tmp_path / "c.jsonl", [record("a"), bad])
    with pytest.raises(ParseError) as exc:
        load_corpus(p)
    assert exc.value.line == 2 and "missing field" in exc.value.reason


@pytest.mark.parametrize("bad, reason", [
    ("{not json", "invalid JSON"),
    (json.dumps(record("z", changes=[])), "no changes"),
    (json.dumps(record("z", changes=[{"op": "mod", "line": 1, "statement": "x;"}])), "unknown change op"),
    (json.dumps(record("z", changes=[{"op": "del", "line": 9, "statement": "x;"}])), "outside"),
    (json.dumps(record("a")), "duplicate"),
])
def test_load_malformed(tmp_path, bad, reason):
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(record("a")) + "\n" + bad + "\n")
    with pytest.raises(ParseError) as exc:
        load_corpus(p)
    assert exc.value.line == 2 and reason in exc.value.reason


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_corpus(tmp_path / "nope.jsonl")


def test_roundtrip(tmp_path, avio_patch):
    corpus = Corpus((avio_patch, simple_patch()))
    write_corpus(corpus, tmp_path / "out.jsonl")
    assert load_corpus(tmp_path / "out.jsonl").patches == corpus.patches


@pytest.mark.parametrize("raw, cleaned", [
    ("Fix leak. See https://x.y/z", "Fix leak."),
    ("fix bound check", "fix bound check"),
    ("backport of c0ffee1 by a@b.com", "backport of by"),
    ("Fix crash (#1234) reported in CVE-2018-14355", "Fix crash reported in"),
    ("fix overflow\n\nSigned-off-by: Jane <j@x.org>\nReviewed-by: Bob", "fix overflow"),
    ("  fix   double   spaces  ", "fix double spaces"),
])
def test_clean_description(raw, cleaned):
    assert clean_description(raw) == cleaned


def test_cleaning_rules_toggle():
    rules = CleaningRules(commit_ids=False)
    assert clean_description("revert c0ffee1", rules) == "revert c0ffee1"


@given(st.lists(st.sampled_from(["fix", " ", "\n", "see", "http://a.b", "#12", "a@b.c", "deadbeef1",
                                          "CVE-1-2", "Signed-off-by:", "Reviewed-by:", "x", ".", "(", ")"]),
               max_size=30).map("".join))
def test_clean_idempotent(text):
    once = clean_description(text)
    assert clean_description(once) == once


def _desc(n):
    return " ".join(f"w{i}" for i in range(n))


def test_filter_by_length_bounds():
    corpus = Corpus(tuple(simple_patch(f"p{n}", description=_desc(n)) for n in (2, 3, 15, 16)))
    kept = filter_by_length(corpus, 3, 15)
    assert [p.id for p in kept] == ["p3", "p15"]
    kept = filter_by_length(Corpus((simple_patch("a", description="fix leak"),)))
    assert len(kept) == 0


def test_dev_process_split():
    corpus = Corpus(tuple(simple_patch(f"p{i}", time=float(100 - i)) for i in range(10)))
    train, test = split(corpus, SplitSpec(SplitStrategy.DEV_PROCESS, 0.8, 0))
    assert sorted(p.time for p in test) == [99.0, 100.0]
    assert len(train) == 8 and max(p.time for p in train) <= min(p.time for p in test)


def test_dev_process_ties_by_id():
    corpus = Corpus(tuple(simple_patch(pid, time=1.0) for pid in ("d", "b", "a", "c", "e")))
    train, test = split(corpus, SplitSpec(ratio=0.6))
    assert {p.id for p in train} == {"a", "b", "c"}


def test_degenerate_split():
    with pytest.raises(DegenerateSplit):
        split(Corpus((simple_patch(),)), SplitSpec(ratio=0.8))
    with pytest.raises(ValueError):
        SplitSpec(ratio=1.0)


def test_cross_project_split():
    patches = [simple_patch(f"p{i}", project=f"proj{i % 5}", time=float(i)) for i in range(50)]
    train, test = split(Corpus(tuple(patches)), SplitSpec(SplitStrategy.CROSS_PROJECT, 0.8, seed=3))
    assert not {p.project for p in train} & {p.project for p in test}
    assert len(train) >= 40


ids_and_times = st.lists(st.tuples(st.integers(0, 20), st.sampled_from("abcd")), min_size=2, max_size=40)


@settings(max_examples=60)
@given(ids_and_times, st.sampled_from(list(SplitStrategy)), st.floats(0.1, 0.9), st.integers(0, 5))
def test_split_partitions(rows, strategy, ratio, seed):
    corpus = Corpus(tuple(simple_patch(f"p{i}", time=float(t), project=proj) for i, (t, proj) in enumerate(rows)))
    try:
        train, test = split(corpus, SplitSpec(strategy, ratio, seed))
    except DegenerateSplit:
        return
    train_ids, test_ids = {p.id for p in train}, {p.id for p in test}
    assert not train_ids & test_ids
    assert train_ids | test_ids == {p.id for p in corpus}
    if strategy is SplitStrategy.DEV_PROCESS and len({t for t, _ in rows}) == len(rows):
        assert max(p.time for p in train) <= min(p.time for p in test)


def test_split_manifest_roundtrip(tmp_path):
    corpus = Corpus(tuple(simple_patch(f"p{i}", time=float(i)) for i in range(5)))
    train, test = split(corpus, SplitSpec(ratio=0.6))
    write_split_manifest(train, test, tmp_path / "s.jsonl", order=corpus.patches)
    assert read_split_manifest(tmp_path / "s.jsonl") == {"p0": "train", "p1": "train", "p2": "train",
                                                         "p3": "test", "p4": "test"}
