"""Loading patch corpora, description cleaning, length filtering and train/test splits."""
from __future__ import annotations

import enum
import json
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import Change, ChangeOp, Patch, tokenize
from .errors import DegenerateSplit, EmptyCorpus, ParseError

REQUIRED_FIELDS = ("id", "project", "file_path", "author", "time", "description", "buggy_code", "changes")


@dataclass(frozen=True)
class Corpus:
    patches: tuple[Patch, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        seen = set()
        for p in self.patches:
            if p.id in seen:
                raise ValueError(f"duplicate patch id {p.id!r}")
            seen.add(p.id)

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def replace(self, patches: Iterable[Patch]) -> "Corpus":
        return Corpus(tuple(patches), self.provenance)


class SplitStrategy(enum.Enum):
    DEV_PROCESS = "dev-process"
    CROSS_PROJECT = "cross-project"


@dataclass(frozen=True)
class SplitSpec:
    strategy: SplitStrategy = SplitStrategy.DEV_PROCESS
    ratio: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"split ratio must be in (0, 1), got {self.ratio}")


def patch_from_record(rec: dict) -> Patch:
    missing = [f for f in REQUIRED_FIELDS if f not in rec]
    if missing:
        raise KeyError(missing[0])
    changes = []
    for ch in rec["changes"]:
        op = {"add": ChangeOp.ADDED, "del": ChangeOp.DELETED}.get(ch.get("op"))
        if op is None:
            raise ValueError(f"unknown change op {ch.get('op')!r}")
        changes.append(Change(op, str(ch["statement"]), int(ch["line"])))
    return Patch(
        id=str(rec["id"]),
        buggy_code=tuple(str(s) for s in rec["buggy_code"]),
        changes=tuple(changes),
        author=str(rec["author"]),
        time=float(rec["time"]),
        description=str(rec["description"]),
        project=str(rec["project"]),
        file_path=str(rec["file_path"]),
        function_name=rec.get("function_name") or None,
    )


def patch_to_record(p: Patch) -> dict:
    return {
        "id": p.id,
        "project": p.project,
        "file_path": p.file_path,
        "function_name": p.function_name,
        "author": p.author,
        "time": p.time,
        "description": p.description,
        "buggy_code": list(p.buggy_code),
        "changes": [{"op": c.op.value, "line": c.line, "statement": c.statement} for c in p.changes],
    }


def load_corpus(path) -> Corpus:
    """Parse a JSONL corpus. Raises ``ParseError`` naming the first bad line."""
    path = Path(path)
    patches = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise ParseError(lineno, "record is not an object")
            try:
                patch = patch_from_record(rec)
            except KeyError as exc:
                raise ParseError(lineno, f"missing field {exc.args[0]!r}") from None
            except (TypeError, ValueError) as exc:
                raise ParseError(lineno, str(exc)) from None
            if patch.id in seen:
                raise ParseError(lineno, f"duplicate id {patch.id!r}")
            seen.add(patch.id)
            patches.append(patch)
    return Corpus(tuple(patches), str(path))


def write_corpus(corpus: Corpus, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in corpus:
            fh.write(json.dumps(patch_to_record(p), sort_keys=True) + "\n")


@dataclass(frozen=True)
class CleaningRules:
    urls: bool = True
    emails: bool = True
    commit_ids: bool = True
    bug_ids: bool = True
    trailers: bool = True
    # "See"/"cf." left dangling in front of a removed reference
    lead_ins: bool = True


_EDGE_PUNCT = "()[]<>{}.,;:'\""
_HEX_RE = re.compile(r"[0-9a-f]{7,40}")
_BUG_RE = re.compile(r"#\d+|CVE-\d+-\d+", re.IGNORECASE)
_EMAIL_RE = re.compile(r"@.*\.")
_TRAILER_RE = re.compile(r"^\s*(signed-off-by|reviewed-by):", re.IGNORECASE)
_LEAD_INS = {"see", "see:", "cf", "cf.", "ref", "ref:", "refs", "refs:"}


def _removable(token: str, rules: CleaningRules) -> bool:
    core = token.strip(_EDGE_PUNCT)
    if rules.urls and token.lstrip(_EDGE_PUNCT).lower().startswith(("http://", "https://")):
        return True
    if rules.emails and _EMAIL_RE.search(token):
        return True
    if rules.commit_ids and _HEX_RE.fullmatch(core):
        return True
    if rules.bug_ids and _BUG_RE.fullmatch(core):
        return True
    return False


def clean_description(raw: str, rules: CleaningRules = CleaningRules()) -> str:
    lines = []
    for line in raw.splitlines():
        tokens = line.split()
        drop = [_removable(t, rules) for t in tokens]
        if rules.lead_ins:
            for i in range(len(tokens) - 1):
                if drop[i + 1] and tokens[i].lower() in _LEAD_INS:
                    drop[i] = True
        kept = " ".join(t for t, d in zip(tokens, drop) if not d)
        if rules.trailers and _TRAILER_RE.match(kept):
            continue
        lines.append(kept)
    return " ".join(" ".join(lines).split())


def clean_corpus(corpus: Corpus, rules: CleaningRules = CleaningRules()) -> Corpus:
    return corpus.replace(_with_description(p, clean_description(p.description, rules)) for p in corpus)


def _with_description(p: Patch, description: str) -> Patch:
    return Patch(p.id, p.buggy_code, p.changes, p.author, p.time, description, p.project, p.file_path, p.function_name)


def filter_by_length(corpus: Corpus, min_tokens: int = 3, max_tokens: int = 15) -> Corpus:
    """Keep patches whose (already cleaned) description has ``min_tokens..max_tokens`` tokens, inclusive."""
    if min_tokens < 1 or max_tokens < min_tokens:
        raise ValueError(f"bad length bounds [{min_tokens}, {max_tokens}]")
    return corpus.replace(p for p in corpus if min_tokens <= len(tokenize(p.description)) <= max_tokens)


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    n = len(corpus)
    if n == 0:
        raise EmptyCorpus("cannot split an empty corpus")
    if spec.strategy is SplitStrategy.DEV_PROCESS:
        ordered = sorted(corpus.patches, key=lambda p: (p.time, p.id))
        # float guard: 0.7 * 10 must give 7, not 8
        cut = math.ceil(spec.ratio * n - 1e-9)
        train_ids = {p.id for p in ordered[:cut]}
    else:
        projects = sorted({p.project for p in corpus})
        random.Random(spec.seed).shuffle(projects)
        sizes = {}
        for p in corpus:
            sizes[p.project] = sizes.get(p.project, 0) + 1
        train_projects = set()
        count = 0
        for proj in projects:
            if count >= spec.ratio * n:
                break
            train_projects.add(proj)
            count += sizes[proj]
        train_ids = {p.id for p in corpus if p.project in train_projects}
    train = corpus.replace(p for p in corpus if p.id in train_ids)
    test = corpus.replace(p for p in corpus if p.id not in train_ids)
    if not len(train) or not len(test):
        raise DegenerateSplit(f"split of {n} patches leaves train={len(train)} test={len(test)}")
    return train, test


def write_split_manifest(train: Corpus, test: Corpus, path, order: Sequence[Patch] | None = None) -> None:
    side = {p.id: "train" for p in train}
    side.update({p.id: "test" for p in test})
    ids = [p.id for p in order] if order is not None else list(side)
    with Path(path).open("w", encoding="utf-8") as fh:
        for pid in ids:
            fh.write(json.dumps({"id": pid, "split": side[pid]}) + "\n")


def read_split_manifest(path) -> dict[str, str]:
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[str(rec["id"])] = rec["split"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(lineno, f"bad split manifest record ({exc})") from None
    return out
