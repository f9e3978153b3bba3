"""Patch context: dependency slicing over changed statements, patch scope and author history.

The dependency analysis is a deliberately small intra-procedural approximation
for C-like code: reaching definitions over the linear statement order for data
edges, and syntactic nesting (braces, else indentation) for control edges.
"""
from __future__ import annotations

import bisect
import json
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .core import (
    Annotation,
    Change,
    ChangeOp,
    Patch,
    PatchRelatedCode,
    PatchScope,
    Statement,
    merged_statements,
)
from .errors import ParseError

DATA = "data"
CONTROL = "control"

_C_TOKEN = re.compile(
    r"""
    "(?:\\.|[^"\\])*"          # string literal
  | '(?:\\.|[^'\\])*'          # char literal
  | [A-Za-z_]\w*
  | \d[\w.]*
  | <<=|>>=|->|\+\+|--|==|!=|<=|>=|&&|\|\||[-+*/%&|^]=|<<|>>
  | \S
    """,
    re.VERBOSE,
)
_IDENT = re.compile(r"[A-Za-z_]\w*\Z")

KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern float for goto if
    inline int long register restrict return short signed sizeof static struct switch typedef union
    unsigned void volatile while bool _Bool""".split()
)
TYPE_WORDS = frozenset(
    """char const double enum float int long short signed static struct union unsigned void volatile
    extern register inline bool _Bool""".split()
)
HEADER_WORDS = frozenset({"if", "for", "while", "switch", "else", "do"})
_ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="})
_DECL_FOLLOW = frozenset({"=", ";", ",", "["})


def c_tokens(stmt: str) -> list[str]:
    return _C_TOKEN.findall(stmt)


def _is_ident(tok: str) -> bool:
    return bool(_IDENT.match(tok)) and tok not in KEYWORDS


def _is_variable_at(toks: Sequence[str], i: int) -> bool:
    if not _is_ident(toks[i]):
        return False
    if i + 1 < len(toks) and toks[i + 1] == "(":
        return False  # call
    if i > 0 and toks[i - 1] in (".", "->"):
        return False  # field
    return True


def _is_declaration(toks: Sequence[str]) -> bool:
    if not toks:
        return False
    if toks[0] in TYPE_WORDS or (toks[0].endswith("_t") and _is_ident(toks[0])):
        return True
    if _is_ident(toks[0]):
        j = 1
        while j < len(toks) and toks[j] == "*":
            j += 1
        return j < len(toks) and _is_ident(toks[j]) and j + 1 < len(toks) and toks[j + 1] in _DECL_FOLLOW | {")"}
    return False


def _lvalue_base(toks: Sequence[str], op_index: int) -> tuple[Optional[int], bool]:
    """Base variable written by the operator at ``op_index`` and whether the write is indirect.

    Writes through ``*p``, ``p[i]``, ``p->f`` or ``p.f`` do not redefine ``p``.
    """
    j = op_index - 1
    indirect = False
    while j >= 0:
        t = toks[j]
        if t == "]":
            depth = 0
            while j >= 0:
                if toks[j] == "]":
                    depth += 1
                elif toks[j] == "[":
                    depth -= 1
                    if depth == 0:
                        break
                j -= 1
            j -= 1
            indirect = True
            continue
        if _IDENT.match(t) and j > 0 and toks[j - 1] in (".", "->"):
            j -= 2
            indirect = True
            continue
        if _is_ident(t):
            if j > 0 and toks[j - 1] == "*" and (j == 1 or not (_IDENT.match(toks[j - 2]) or toks[j - 2] in (")", "]"))):
                indirect = True
            return j, indirect
        return None, False
    return None, False


@dataclass(frozen=True)
class StatementFacts:
    defs: frozenset[str]
    # (variable, satisfied by a def earlier in the same statement)
    uses: tuple[tuple[str, bool], ...]


def statement_facts(stmt: str) -> StatementFacts:
    toks = c_tokens(stmt)
    def_at: dict[int, str] = {}
    compound: set[int] = set()
    for i, t in enumerate(toks):
        if t in _ASSIGN_OPS:
            b, indirect = _lvalue_base(toks, i)
            if b is not None and not indirect:
                def_at[b] = toks[b]
                if t != "=":
                    compound.add(b)
        elif t in ("++", "--"):
            for b in (i - 1, i + 1):
                if 0 <= b < len(toks) and _is_variable_at(toks, b):
                    def_at[b] = toks[b]
                    compound.add(b)
                    break
    if _is_declaration(toks):
        depth = 0
        in_init = False
        for i, t in enumerate(toks):
            if t in ("(", "[", "{"):
                depth += 1
            elif t in (")", "]", "}"):
                depth -= 1
            elif depth == 0 and t in ("=", ","):
                in_init = t == "="
            elif depth == 0 and not in_init and _is_ident(t) and i + 1 < len(toks) and toks[i + 1] in _DECL_FOLLOW:
                def_at[i] = t

    segment = 0
    plain_def_segment: dict[str, int] = {}
    uses = []
    for i, t in enumerate(toks):
        if t == ";":
            segment += 1
            continue
        if not _is_variable_at(toks, i):
            continue
        if i in def_at and i not in compound:
            plain_def_segment.setdefault(t, segment)
            continue
        internal = plain_def_segment.get(t, segment) < segment
        uses.append((t, internal))
    return StatementFacts(frozenset(def_at.values()), tuple(uses))


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple[int, ...]
    edges: frozenset[tuple[int, int, str]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", frozenset(self.edges))
        valid = set(self.nodes)
        for u, v, label in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if u not in valid or v not in valid:
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside the graph")
            if label not in (DATA, CONTROL):
                raise ValueError(f"unknown edge label {label!r}")

    def neighbours(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {n: set() for n in self.nodes}
        for u, v, _ in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj


def _indent(text: str) -> int:
    expanded = text.expandtabs(4)
    return len(expanded) - len(expanded.lstrip())


def _brace_counts(toks: Sequence[str]) -> tuple[int, int]:
    """(leading closing braces, net brace delta)."""
    lead = 0
    while lead < len(toks) and toks[lead] == "}":
        lead += 1
    return lead, toks.count("{") - toks.count("}")


def _control_bodies(texts: Sequence[str]) -> dict[int, list[int]]:
    toks = [c_tokens(t) for t in texts]
    bodies: dict[int, list[int]] = {}
    for i, tk in enumerate(toks):
        lead, _ = _brace_counts(tk)
        rest = tk[lead:]
        if not rest or rest[0] not in HEADER_WORDS:
            continue
        body: list[int] = []
        opens = rest.count("{") - rest.count("}")
        start = i + 1
        if opens <= 0 and start < len(toks) and toks[start] == ["{"]:
            opens, start = 1, start + 1
            body.append(i + 1)
        if opens > 0:
            depth = opens
            for j in range(start, len(toks)):
                lead_j, net_j = _brace_counts(toks[j])
                if depth - lead_j <= 0:
                    break
                body.append(j)
                depth += net_j
                if depth <= 0:
                    break
        elif rest[-1] != ";" or rest[0] == "do":
            base = _indent(texts[i])
            j = start
            while j < len(toks) and _indent(texts[j]) > base and toks[j] and toks[j][0] != "}":
                body.append(j)
                j += 1
            if not body and start < len(toks) and toks[start] and toks[start][0] != "}":
                body.append(start)
        bodies[i] = body
    return bodies


def build_dependency_graph_for(statements: Sequence[Statement]) -> DependencyGraph:
    texts = [s.text for s in statements]
    ids = [s.node for s in statements]
    edges: set[tuple[int, int, str]] = set()

    last_def: dict[str, int] = {}
    for pos, text in enumerate(texts):
        facts = statement_facts(text)
        for var, internal in facts.uses:
            if internal:
                continue
            src = last_def.get(var)
            if src is not None and src != pos:
                edges.add((ids[src], ids[pos], DATA))
        for var in facts.defs:
            last_def[var] = pos

    controller: dict[int, int] = {}
    for h, body in sorted(_control_bodies(texts).items()):
        for j in body:
            controller[j] = h  # later headers are nested deeper
    for j, h in controller.items():
        edges.add((ids[h], ids[j], CONTROL))
    return DependencyGraph(tuple(ids), frozenset(edges))


def build_dependency_graph(buggy_code: Sequence[str], changes: Sequence[Change] = ()) -> DependencyGraph:
    """Dependency graph over buggy statements plus added statements at their anchors."""
    if not changes:
        return build_dependency_graph_for([Statement(i, Annotation.CONTEXT, t) for i, t in enumerate(buggy_code)])
    probe = Patch("_", tuple(buggy_code), tuple(changes), "", 0.0, "", "", "_")
    return build_dependency_graph_for(merged_statements(probe))


def patch_graph(patch: Patch) -> DependencyGraph:
    return build_dependency_graph_for(merged_statements(patch))


def graph_from_edges(patch: Patch, edges: Iterable[Sequence]) -> DependencyGraph:
    """Graph from an external analyzer's edge list (node ids as in ``merged_statements``)."""
    nodes = tuple(s.node for s in merged_statements(patch))
    return DependencyGraph(nodes, frozenset((int(u), int(v), str(label)) for u, v, label in edges))


def load_edge_sidecar(path) -> dict[str, list]:
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[str(rec["id"])] = [tuple(e) for e in rec["edges"]]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(lineno, f"bad edge record ({exc})") from None
    return out


def changed_nodes(patch: Patch) -> list[int]:
    return [s.node for s in merged_statements(patch) if s.annotation is not Annotation.CONTEXT]


def extract_patch_related_code(patch: Patch, graph: DependencyGraph, max_statements: int = 10) -> PatchRelatedCode:
    """Changed statements plus every statement connected to them through dependencies.

    Edges are followed in both directions. Over the cap, changed statements
    are all kept and context statements are ranked by hop distance to the
    nearest change, then by position.
    """
    ordered = merged_statements(patch)
    position = {s.node: i for i, s in enumerate(ordered)}
    sources = [s.node for s in ordered if s.annotation is not Annotation.CONTEXT]
    adj = graph.neighbours()
    dist = {n: 0 for n in sources}
    queue = deque(sources)
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)

    selected = set(dist)
    if len(selected) > max_statements:
        context = sorted((n for n in selected if dist[n] > 0), key=lambda n: (dist[n], position[n]))
        room = max(0, max_statements - len(sources))
        selected = set(sources) | set(context[:room])
    return PatchRelatedCode(tuple((s.annotation, s.text) for s in ordered if s.node in selected))


_FUNC_DEF = re.compile(r"([A-Za-z_]\w*)\s*\([^;]*\)\s*\{?\s*$")


def extract_scope(patch: Patch) -> PatchScope:
    if patch.function_name:
        return PatchScope(patch.file_path, (patch.function_name,))
    first_change = min(c.line for c in patch.changes)
    depth = 0
    depth_before = []
    for text in patch.buggy_code:
        depth_before.append(depth)
        _, net = _brace_counts(c_tokens(text))
        depth += net
    names: tuple[str, ...] = ()
    for i in range(min(first_change - 1, len(patch.buggy_code)) - 1, -1, -1):
        text = patch.buggy_code[i].strip()
        if depth_before[i] != 0:
            continue
        m = _FUNC_DEF.search(text)
        if not m or m.group(1) in KEYWORDS:
            continue
        opens_here = text.endswith("{")
        opens_next = i + 1 < len(patch.buggy_code) and patch.buggy_code[i + 1].strip().startswith("{")
        if opens_here or opens_next:
            names = (m.group(1),)
            break
    return PatchScope(patch.file_path, names)


@dataclass
class HistoryIndex:
    """(project, author) -> entries sorted by (time, id)."""

    entries: dict[tuple[str, str], list[tuple[float, str, str]]] = field(default_factory=dict)

    @classmethod
    def build(cls, patches: Iterable[Patch]) -> "HistoryIndex":
        entries: dict[tuple[str, str], list[tuple[float, str, str]]] = {}
        for p in patches:
            entries.setdefault((p.project, p.author), []).append((p.time, p.id, p.description))
        for lst in entries.values():
            lst.sort()
        return cls(entries)


def lookup_history(index: HistoryIndex, patch: Patch, max_items: int = 10) -> list[str]:
    """Same-project, same-author descriptions strictly before the patch, newest first."""
    lst = index.entries.get((patch.project, patch.author), [])
    cut = bisect.bisect_left(lst, (patch.time,))
    out = []
    for time, pid, desc in reversed(lst[:cut]):
        if len(out) >= max_items:
            break
        if pid != patch.id:
            out.append(desc)
    return out
