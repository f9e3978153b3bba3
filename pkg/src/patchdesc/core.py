"""Domain types for software patches and the assembly of model input/output sequences."""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import EmptyDescription

CODE = "<code>"
SCOPE = "<scope>"
HIST = "<hist>"
SEP = "<sep>"
ADD = "<add>"
DEL = "<del>"
CTX = "<ctx>"
MARKERS = (CODE, SCOPE, HIST, SEP, ADD, DEL, CTX)

_PUNCT = '.,:;()[]{}<>=+-*/&|!"\''
_SPLIT_RE = re.compile("([" + re.escape(_PUNCT) + "])")


def group_token(group: int) -> str:
    return f"<grp_{group}>"


_GROUP_RE = re.compile(r"^<grp_(\d+)>$")


def parse_group_token(token: str) -> Optional[int]:
    m = _GROUP_RE.match(token)
    return int(m.group(1)) if m else None


def tokenize(text: str) -> list[str]:
    """Whitespace split, then every punctuation character becomes its own token.

    Case is preserved and ``_`` is an identifier character, so
    ``url_find_protocol(filename)`` gives ``['url_find_protocol', '(', 'filename', ')']``.
    """
    out: list[str] = []
    for chunk in text.split():
        out.extend(p for p in _SPLIT_RE.split(chunk) if p)
    return out


class ChangeOp(enum.Enum):
    ADDED = "add"
    DELETED = "del"


class Annotation(enum.Enum):
    ADDED = "add"
    DELETED = "del"
    CONTEXT = "ctx"


_ANNOTATION_MARKER = {Annotation.ADDED: ADD, Annotation.DELETED: DEL, Annotation.CONTEXT: CTX}


@dataclass(frozen=True)
class Change:
    """One changed statement.

    ``line`` is 1-based. For a deletion it indexes ``buggy_code``; for an
    addition it is the buggy line the new statement is inserted before
    (``len(buggy_code) + 1`` appends at the end).
    """

    op: ChangeOp
    statement: str
    line: int

    def __post_init__(self):
        if not self.statement.strip():
            raise ValueError("changed statement is empty")
        if self.line < 1:
            raise ValueError(f"change line must be >= 1, got {self.line}")


@dataclass(frozen=True)
class Patch:
    id: str
    buggy_code: tuple[str, ...]
    changes: tuple[Change, ...]
    author: str
    time: float
    description: str
    project: str
    file_path: str
    function_name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "buggy_code", tuple(self.buggy_code))
        object.__setattr__(self, "changes", tuple(self.changes))
        if not self.changes:
            raise ValueError("patch has no changes")
        if not math.isfinite(self.time):
            raise ValueError("patch time is not finite")
        n = len(self.buggy_code)
        for c in self.changes:
            limit = n if c.op is ChangeOp.DELETED else n + 1
            if c.line > limit:
                raise ValueError(f"{c.op.name.lower()} change at line {c.line} outside buggy code of {n} lines")


@dataclass(frozen=True)
class Statement:
    """A node of the merged (buggy code + additions) statement order."""

    node: int
    annotation: Annotation
    text: str


def merged_statements(patch: Patch) -> list[Statement]:
    """Buggy statements in order with added statements placed at their anchors.

    Additions anchored on a deleted line follow the run of deleted lines
    starting there.

    Node ids: buggy line ``i`` (1-based) is node ``i - 1``; the k-th addition
    in ``patch.changes`` is node ``len(buggy_code) + k``.
    """
    n = len(patch.buggy_code)
    deleted = {c.line for c in patch.changes if c.op is ChangeOp.DELETED}
    anchored: dict[int, list[Statement]] = {}
    k = 0
    for c in patch.changes:
        if c.op is ChangeOp.ADDED:
            anchored.setdefault(c.line, []).append(Statement(n + k, Annotation.ADDED, c.statement))
            k += 1
    out: list[Statement] = []
    pending: list[Statement] = []
    for line in range(1, n + 2):
        pending.extend(anchored.get(line, ()))
        if line in deleted:
            # a replaced run reads like a diff hunk: removed lines, then their replacement
            out.append(Statement(line - 1, Annotation.DELETED, patch.buggy_code[line - 1]))
            continue
        out.extend(pending)
        pending = []
        if line <= n:
            out.append(Statement(line - 1, Annotation.CONTEXT, patch.buggy_code[line - 1]))
    return out


@dataclass(frozen=True)
class PatchRelatedCode:
    statements: tuple[tuple[Annotation, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "statements", tuple(self.statements))


@dataclass(frozen=True)
class PatchScope:
    file_path: str
    function_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "function_names", tuple(self.function_names))
        if not self.file_path:
            raise ValueError("scope file_path is empty")


@dataclass(frozen=True)
class SourceSequence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        positions = [self.tokens.index(m) if self.tokens.count(m) == 1 else -1 for m in (CODE, SCOPE, HIST)]
        if -1 in positions or positions != sorted(positions):
            raise ValueError("source sequence needs exactly one <code>, <scope>, <hist> in that order")


@dataclass(frozen=True)
class TargetSequence:
    description_tokens: tuple[str, ...]
    group_token: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "description_tokens", tuple(self.description_tokens))

    @property
    def tokens(self) -> tuple[str, ...]:
        head = (self.group_token,) if self.group_token is not None else ()
        return head + self.description_tokens

    @property
    def group(self) -> Optional[int]:
        return parse_group_token(self.group_token) if self.group_token else None


def build_source_sequence(
    related: PatchRelatedCode,
    scope: Optional[PatchScope],
    history: Sequence[str],
) -> SourceSequence:
    """``<code> R_p <scope> S_p <hist> H_p``; a ``None`` scope leaves the scope segment empty."""
    tokens = [CODE]
    for annotation, text in related.statements:
        tokens.append(_ANNOTATION_MARKER[annotation])
        tokens.extend(tokenize(text))
    tokens.append(SCOPE)
    if scope is not None:
        tokens.extend(tokenize(scope.file_path))
        for name in scope.function_names:
            tokens.extend(tokenize(name))
    tokens.append(HIST)
    for i, desc in enumerate(history):
        if i:
            tokens.append(SEP)
        tokens.extend(tokenize(desc))
    return SourceSequence(tokens)


def build_target_sequence(description: str, group: Optional[int] = None) -> TargetSequence:
    tokens = tokenize(description)
    if not tokens:
        raise EmptyDescription("description has no tokens")
    return TargetSequence(tokens, group_token(group) if group is not None else None)


def join_tokens(tokens: Iterable[str]) -> str:
    return " ".join(tokens)
