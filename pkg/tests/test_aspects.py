import json

import pytest

from patchdesc.aspects import analyze_aspects, aspect_fractions, corpus_aspect_stats, format_stats, AspectReport
from patchdesc.core import PatchScope
from patchdesc.errors import EmptyCorpus
from patchdesc.ingestion import Corpus

from conftest import AVIO_DESCRIPTION, make_avio_patch, simple_patch

AVIO_SCOPE = PatchScope("libavformat/avio.c", ("url_find_protocol",))


def test_avio_all_aspects():
    assert analyze_aspects(AVIO_DESCRIPTION, AVIO_SCOPE) == AspectReport(True, True, True)


@pytest.mark.parametrize("text", ["Reduce picture size for yadif.", "update docs"])
def test_no_aspects(text):
    assert analyze_aspects(text, PatchScope("x.c")) == AspectReport(False, False, False)
    assert analyze_aspects(text, None) == AspectReport(False, False, False)


@pytest.mark.parametrize("text, what, how", [
    ("fixes a memleak", True, True),
    ("fixed bound", True, True),
    ("Removes crash path", True, True),
    ("prefix cleanup", False, False),
    ("NULL deref", True, False),
])
def test_keyword_rules(text, what, how):
    report = analyze_aspects(text)
    assert (report.what, report.how) == (what, how)


@pytest.mark.parametrize("text, where", [
    ("url_find_protocol: fix", True),
    ("url_find_protocol() fix", True),
    ("avio: fix", True),
    ("libavformat: fix", True),
    ("avformat/avio.c: fix", True),
    ("avcodec: fix", False),
    ("fix avio", False),
])
def test_where_rule(text, where):
    assert analyze_aspects(text, AVIO_SCOPE).where is where


def test_corpus_stats():
    corpus = Corpus((
        make_avio_patch(id="a"),                                   # 3 aspects
        simple_patch("b", description="fix null check"),           # what + how
        simple_patch("c", description="g: update docs"),           # where only
        simple_patch("d", description="update docs"),              # none
    ))
    stats = corpus_aspect_stats(corpus)
    assert stats == {"all3": 0.25, "ge2": 0.5, "ge1": 0.75}
    assert json.loads(format_stats(stats)) == stats


def test_corpus_stats_uniform_and_empty():
    corpus = Corpus(tuple(make_avio_patch(id=str(i)) for i in range(3)))
    assert corpus_aspect_stats(corpus) == {"all3": 1.0, "ge2": 1.0, "ge1": 1.0}
    with pytest.raises(EmptyCorpus):
        corpus_aspect_stats(Corpus(()))
    with pytest.raises(EmptyCorpus):
        aspect_fractions([])
