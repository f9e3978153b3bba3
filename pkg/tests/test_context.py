import random

import pytest
from hypothesis import given, settings, strategies as st

from patchdesc.context import (
    CONTROL,
    DATA,
    DependencyGraph,
    HistoryIndex,
    build_dependency_graph,
    extract_patch_related_code,
    extract_scope,
    graph_from_edges,
    lookup_history,
    patch_graph,
    statement_facts,
)
from patchdesc.core import Annotation, Change, ChangeOp

from conftest import AVIO_CODE, make_avio_patch, simple_patch
from oracles import closure_oracle


def edge_pairs(graph):
    return {(u, v) for u, v, _ in graph.edges}


def test_data_edge():
    g = build_dependency_graph(["x = 1;", "y = x;"])
    assert g.edges == {(0, 1, DATA)}


def test_control_edge():
    g = build_dependency_graph(["if (c) {", "z = 1;", "}"])
    assert (0, 1, CONTROL) in g.edges


def test_independent_statements():
    assert build_dependency_graph(["a = 1;", "b = 2;"]).edges == frozenset()


def test_empty_code():
    assert build_dependency_graph([]).nodes == ()


def test_redefinition_kills():
    g = build_dependency_graph(["x = 1;", "x = 2;", "y = x;"])
    assert (1, 2) in edge_pairs(g) and (0, 2) not in edge_pairs(g)


@pytest.mark.parametrize("stmt, defs, used", [
    ("int i;", {"i"}, set()),
    ("x = y + z;", {"x"}, {"y", "z"}),
    ("*ptr = 0;", set(), {"ptr"}),
    ("p->n = k;", set(), {"p", "k"}),
    ("i++;", {"i"}, {"i"}),
    ("size_t n = strspn(s, CHARS);", {"n"}, {"s", "CHARS"}),
    ("if ((ptr = strchr(buf, '+')))", {"ptr"}, {"buf"}),
])
def test_statement_facts(stmt, defs, used):
    facts = statement_facts(stmt)
    assert set(facts.defs) == defs
    assert {v for v, internal in facts.uses if not internal} >= used


def test_graph_validation():
    with pytest.raises(ValueError):
        DependencyGraph((0, 1), {(0, 0, DATA)})
    with pytest.raises(ValueError):
        DependencyGraph((0, 1), {(0, 5, DATA)})


def test_avio_related_code(avio_patch):
    related = extract_patch_related_code(avio_patch, patch_graph(avio_patch), max_statements=50)
    texts = [t for _, t in related.statements]
    for excluded in AVIO_CODE[2:9]:
        assert excluded not in texts
    assert AVIO_CODE[9] in texts and AVIO_CODE[10] in texts
    assert [t for a, t in related.statements if a is Annotation.ADDED] == ["    if (!protocols)", "        return NULL;"]


def test_avio_scope(avio_patch):
    scope = extract_scope(avio_patch)
    assert scope.file_path == "libavformat/avio.c" and scope.function_names == ("url_find_protocol",)


def test_explicit_function_name_wins(avio_patch):
    assert extract_scope(make_avio_patch(function_name="other")).function_names == ("other",)


def test_scope_without_function():
    p = simple_patch(function_name=None)
    assert extract_scope(p).function_names == ()


def test_all_changes_kept_over_cap():
    code = tuple(f"v{i} = v{i - 1};" if i else "v0 = 0;" for i in range(30))
    changes = tuple(Change(ChangeOp.DELETED, code[i], i + 1) for i in (3, 17, 25))
    p = simple_patch(buggy_code=code, changes=changes)
    related = extract_patch_related_code(p, patch_graph(p), max_statements=5)
    anns = [a for a, _ in related.statements]
    assert len(anns) == 5 and anns.count(Annotation.DELETED) == 3


def test_closure_matches_oracle_on_random_graphs():
    rng = random.Random(1234)
    for _ in range(1000):
        n = rng.randint(1, 20)
        code = tuple(f"s{i};" for i in range(n))
        changed = rng.sample(range(n), rng.randint(1, min(3, n)))
        patch = simple_patch(buggy_code=code, changes=tuple(Change(ChangeOp.DELETED, code[i], i + 1) for i in changed))
        edges = {(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < 0.08}
        graph = graph_from_edges(patch, [(u, v, rng.choice((DATA, CONTROL))) for u, v in edges])
        related = extract_patch_related_code(patch, graph, max_statements=n)
        got = {int(t[1:-1]) for _, t in related.statements}
        assert got == closure_oracle(n, edges, changed)
        assert [int(t[1:-1]) for _, t in related.statements] == sorted(got)


@settings(max_examples=100)
@given(st.integers(2, 12), st.data())
def test_closure_monotone_in_edges(n, data):
    code = tuple(f"s{i};" for i in range(n))
    patch = simple_patch(buggy_code=code, changes=(Change(ChangeOp.DELETED, code[0], 1),))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    edges = data.draw(st.sets(st.sampled_from(pairs)))
    extra = data.draw(st.sets(st.sampled_from(pairs)))
    small = extract_patch_related_code(patch, graph_from_edges(patch, [(u, v, DATA) for u, v in edges]), n)
    big = extract_patch_related_code(patch, graph_from_edges(patch, [(u, v, DATA) for u, v in edges | extra]), n)
    assert set(small.statements) <= set(big.statements)


def test_history_lookup():
    patches = [simple_patch(f"h{i}", description=f"desc {i}", time=float(i)) for i in range(15)]
    patches.append(simple_patch("other", description="nope", time=1.0, author="bob"))
    patches.append(simple_patch("tie", description="same time", time=14.0))
    index = HistoryIndex.build(patches)
    hist = lookup_history(index, patches[14], max_items=10)
    assert hist == [f"desc {i}" for i in range(13, 3, -1)]
    assert lookup_history(index, patches[0]) == []


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 10), st.sampled_from("ab"), st.sampled_from("pq")), min_size=1, max_size=25),
       st.integers(0, 24))
def test_history_properties(rows, pick):
    patches = [simple_patch(f"x{i}", description=f"d{i}", time=float(t), author=a, project=pr)
               for i, (t, a, pr) in enumerate(rows)]
    target = patches[pick % len(patches)]
    hist = lookup_history(HistoryIndex.build(patches), target, max_items=10)
    by_desc = {p.description: p for p in patches}
    assert len(hist) <= 10
    times = [by_desc[d].time for d in hist]
    assert times == sorted(times, reverse=True)
    for d in hist:
        p = by_desc[d]
        assert p.time < target.time and p.author == target.author and p.project == target.project
