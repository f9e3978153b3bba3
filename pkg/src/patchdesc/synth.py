"""Synthetic clustered patch corpora for tests and experiments.

Each patch fixes one of eight bug kinds with a kind-specific code change.
Its description is a kind-specific phrase naming the changed function, in
the author's habitual style (``"f: phrase"`` or ``"phrase in f"``). Which
phrase a kind uses is chosen by the changed variable, so the description
can be derived from the patch's code, scope and author history.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .core import Change, ChangeOp, Patch
from .ingestion import Corpus, patch_to_record

PHRASES = (
    ("fix null pointer dereference", "add missing null check"),
    ("fix memory leak on error path", "free allocated buffer on failure"),
    ("fix integer overflow in size calculation", "avoid overflow when computing size"),
    ("add bounds check for array index", "fix out of bounds read"),
    ("initialize variable to avoid uninitialized use", "fix use of uninitialized value"),
    ("remove unused variable", "remove unused local variable declaration"),
    ("fix typo in error message", "correct spelling in log message"),
    ("check divisor to prevent division by zero", "reject zero denominator"),
)
VARIABLES = ("ctx", "pkt", "frame", "buf")
FUNCTIONS = (
    "decode_frame", "read_header", "parse_packet", "init_context", "probe_stream", "write_trailer",
    "alloc_buffer", "open_input", "close_output", "seek_frame", "flush_queue", "parse_config",
)
FILES = ("utils", "decoder", "demux", "parser", "codec", "format")
PROJECT_DIRS = ("libavcodec", "libavformat", "drivers/media", "block", "net/core", "fs/ext4")
FILLERS = ("properly", "again", "here", "now")


def _add(line: int, *stmts: str) -> list[Change]:
    return [Change(ChangeOp.ADDED, s, line) for s in stmts]


def _delete(line: int, stmt: str) -> Change:
    return Change(ChangeOp.DELETED, stmt, line)


def _code_for(kind: int, v: str) -> tuple[list[str], list[Change]]:
    if kind == 0:
        code = [f"{v} = av_malloc(size);", f"{v}->pos = 0;", "return 0;"]
        return code, _add(2, f"if (!{v})", "    return AVERROR(ENOMEM);")
    if kind == 1:
        code = [f"{v} = av_malloc(size);", f"ret = read_data(s, {v});", "if (ret < 0)", "    return ret;", "return 0;"]
        return code, _add(4, f"av_freep(&{v});")
    if kind == 2:
        code = [f"{v}_size = width * height;", f"{v} = av_malloc({v}_size);", "return 0;"]
        return code, [_delete(1, code[0]), *_add(1, "if (width > INT_MAX / height)", "    return AVERROR(EINVAL);",
                                                 f"{v}_size = (int64_t)width * height;")]
    if kind == 3:
        code = ["idx = get_index(s);", f"val = {v}[idx];", "return val;"]
        return code, _add(2, f"if (idx < 0 || idx >= {v}_count)", "    return AVERROR_INVALIDDATA;")
    if kind == 4:
        code = [f"int {v};", "if (flags)", f"    {v} = 1;", f"return {v};"]
        return code, [_delete(1, code[0]), *_add(1, f"int {v} = 0;")]
    if kind == 5:
        code = [f"int {v};", "ret = init(s);", "return ret;"]
        return code, [_delete(1, code[0])]
    if kind == 6:
        code = ["if (ret < 0) {", f'av_log(s, AV_LOG_ERROR, "invalid {v} sise");', "return ret;", "}"]
        return code, [_delete(2, code[1]), *_add(2, f'av_log(s, AV_LOG_ERROR, "invalid {v} size");')]
    code = ["den = get_den(s);", f"{v} = total / den;", f"return {v};"]
    return code, _add(2, "if (!den)", "    return AVERROR(EINVAL);")


def _with_noise(code: list[str], changes: list[Change], rng: random.Random) -> tuple[list[str], list[Change]]:
    """Insert two statements unrelated to the change at random positions."""
    for _ in range(2):
        var = rng.choice(("tmp", "total_bytes", "nb_frames", "flags_out"))
        stmt = f"{var}_{rng.randrange(3)} = {rng.randrange(100)};"
        # 0-based insertion index, never between a brace-less header and its body
        slots = [i for i in range(len(code) + 1) if i == 0 or not code[i - 1].rstrip().endswith(")")]
        pos = rng.choice(slots)
        code = code[:pos] + [stmt] + code[pos:]
        # lines at or after the insertion point move down by one
        shifted = [Change(c.op, c.statement, c.line + 1 if c.line - 1 >= pos else c.line) for c in changes]
        changes = shifted
    return code, changes


@dataclass(frozen=True)
class SynthConfig:
    n_patches: int = 400
    n_clusters: int = 8
    templates_per_cluster: int = 2
    noise_rate: float = 0.0
    n_authors: int = 8
    n_projects: int = 4
    seed: int = 0
    function_in_description: bool = True


def describe(kind: int, variant: int, function: str, style: int, with_function: bool = True) -> str:
    phrase = PHRASES[kind][variant]
    if not with_function:
        return phrase
    return f"{function}: {phrase}" if style == 0 else f"{phrase} in {function}"


def synth_corpus(cfg: SynthConfig = SynthConfig()) -> Corpus:
    if not 1 <= cfg.n_clusters <= len(PHRASES):
        raise ValueError(f"n_clusters must be in [1, {len(PHRASES)}]")
    if not 1 <= cfg.templates_per_cluster <= 2:
        raise ValueError("templates_per_cluster must be 1 or 2")
    rng = random.Random(cfg.seed)
    clock = 1_400_000_000.0
    patches = []
    for i in range(cfg.n_patches):
        author = i % cfg.n_authors
        project = author % cfg.n_projects
        style = author % 2
        kind = rng.randrange(cfg.n_clusters)
        v_index = rng.randrange(len(VARIABLES))
        variant = v_index % cfg.templates_per_cluster
        function = rng.choice(FUNCTIONS)
        code, changes = _with_noise(*_code_for(kind, VARIABLES[v_index]), rng)
        description = describe(kind, variant, function, style, cfg.function_in_description)
        if rng.random() < cfg.noise_rate:
            words = description.split()
            words.insert(rng.randrange(len(words) + 1), rng.choice(FILLERS))
            description = " ".join(words)
        clock += rng.randrange(600, 86_400)
        patches.append(Patch(
            id=f"synth-{i:05d}",
            buggy_code=tuple(code),
            changes=tuple(changes),
            author=f"author{author}",
            time=clock,
            description=description,
            project=f"project{project}",
            file_path=f"{PROJECT_DIRS[project % len(PROJECT_DIRS)]}/{rng.choice(FILES)}.c",
            function_name=function,
        ))
    return Corpus(tuple(patches), f"synth(seed={cfg.seed})")


def write_synth(cfg: SynthConfig, path) -> int:
    corpus = synth_corpus(cfg)
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in corpus:
            fh.write(json.dumps(patch_to_record(p), sort_keys=True) + "\n")
    return len(corpus)
