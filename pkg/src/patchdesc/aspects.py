"""Keyword rules telling whether a description says what, how and where a patch fixes."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .core import PatchScope, tokenize
from .errors import EmptyCorpus

WHAT_KEYWORDS = ("mem", "null", "leak", "overflow", "injection", "typo", "bound", "crash", "unused", "uninit")
HOW_STEMS = ("add", "fix", "check", "remove", "delete", "avoid", "prevent", "reject", "replace")


@dataclass(frozen=True)
class AspectReport:
    what: bool
    how: bool
    where: bool

    @property
    def count(self) -> int:
        return int(self.what) + int(self.how) + int(self.where)


def _segments(path: str) -> list[str]:
    out = []
    for seg in path.lower().replace("\\", "/").split("/"):
        if not seg:
            continue
        stem = seg.rsplit(".", 1)[0] if "." in seg[1:] else seg
        out.append(stem)
    return out


def _seg_match(a: str, b: str) -> bool:
    # FFmpeg-style module names drop the directory's "lib" prefix: avformat ~ libavformat
    return a == b or "lib" + a == b or a == "lib" + b


def _aligned(part: list[str], whole: list[str]) -> bool:
    if not part or len(part) > len(whole):
        return False
    k = len(part)
    prefix = all(_seg_match(x, y) for x, y in zip(part, whole[:k]))
    suffix = all(_seg_match(x, y) for x, y in zip(part, whole[-k:]))
    return prefix or suffix


def _where(description: str, scope: Optional[PatchScope]) -> bool:
    words = description.split()
    if not words or scope is None:
        return False
    head = words[0].lower()
    if head.endswith(":"):
        head = head[:-1]
    if head.endswith("()"):
        head = head[:-2]
    if not head:
        return False
    if any(head == name.lower() for name in scope.function_names):
        return True
    return _aligned(_segments(head), _segments(scope.file_path))


def analyze_aspects(description: str, scope: Optional[PatchScope] = None,
                    what_keywords: Iterable[str] = WHAT_KEYWORDS,
                    how_stems: Iterable[str] = HOW_STEMS) -> AspectReport:
    lowered = description.lower()
    what = any(k in lowered for k in what_keywords)
    stems = tuple(how_stems)
    how = any(tok.startswith(stems) for tok in tokenize(lowered))
    return AspectReport(what, how, _where(description, scope))


def aspect_fractions(reports: Iterable[AspectReport]) -> dict[str, float]:
    reports = list(reports)
    if not reports:
        raise EmptyCorpus("no descriptions to analyze")
    n = len(reports)
    return {
        "all3": sum(r.count == 3 for r in reports) / n,
        "ge2": sum(r.count >= 2 for r in reports) / n,
        "ge1": sum(r.count >= 1 for r in reports) / n,
    }


def corpus_aspect_stats(corpus) -> dict[str, float]:
    from .context import extract_scope

    return aspect_fractions(analyze_aspects(p.description, extract_scope(p)) for p in corpus)


def format_stats(stats: dict[str, float]) -> str:
    return json.dumps({k: round(stats[k], 6) for k in ("all3", "ge2", "ge1")})
