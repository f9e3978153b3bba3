"""Command line entry point: ``patchdesc <subcommand> [--config FILE] [--key=value ...]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .aspects import corpus_aspect_stats, format_stats
from .errors import PatchDescError, UsageError
from .ingestion import load_corpus
from .metrics import EvalPair, load_vectors
from .synth import SynthConfig, write_synth

log = logging.getLogger("patchdesc")

_FLAGS_WITHOUT_VALUE = {"single-objective", "single_objective", "no-scope", "no_scope"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _overrides(extra: Sequence[str]) -> dict:
    out: dict = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--"):
            raise UsageError(f"unexpected argument {arg!r}")
        body = arg[2:]
        if "=" in body:
            key, value = body.split("=", 1)
        elif body in _FLAGS_WITHOUT_VALUE:
            key, value = body, None
        elif i + 1 < len(extra) and not extra[i + 1].startswith("--"):
            key, value = body, extra[i + 1]
            i += 1
        else:
            raise UsageError(f"{arg} needs a value (--key=value)")
        out[key] = value
        i += 1
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchdesc", description="Generate descriptions for software patches.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("ingest", "clean, filter and split a JSONL patch corpus"),
        ("prepare", "extract context, cluster descriptions and write training examples"),
        ("train", "train the encoder-decoder"),
        ("generate", "decode descriptions for the test split"),
        ("eval", "score predictions"),
        ("analyze-aspects", "report what/how/where coverage of a corpus"),
        ("run", "run ingest through eval"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON or TOML file with flat config keys")
        if name == "eval":
            p.add_argument("--pairs", help="JSONL of {id, reference, hypothesis}; bypasses the work directory")
            p.add_argument("--references", help="JSONL of {id, text}, aligned with --hypotheses")
            p.add_argument("--hypotheses", help="JSONL of {id, text}")
    s = sub.add_parser("synth", help="write a synthetic clustered corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--n-patches", type=int, default=SynthConfig.n_patches)
    s.add_argument("--n-clusters", type=int, default=SynthConfig.n_clusters)
    s.add_argument("--templates-per-cluster", type=int, default=SynthConfig.templates_per_cluster)
    s.add_argument("--noise-rate", type=float, default=SynthConfig.noise_rate)
    s.add_argument("--n-authors", type=int, default=SynthConfig.n_authors)
    s.add_argument("--n-projects", type=int, default=SynthConfig.n_projects)
    s.add_argument("--seed", type=int, default=SynthConfig.seed)
    s.add_argument("--no-function-in-description", action="store_true")
    return parser


def _config(args, extra) -> pipeline.PipelineConfig:
    file_values = pipeline.load_config_file(args.config) if args.config else {}
    return pipeline.make_config(file_values, _overrides(extra))


def _read_jsonl(path) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"file not found: {p}")
    return [json.loads(line) for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]


def _standalone_eval(args, cfg: pipeline.PipelineConfig) -> dict:
    if args.pairs:
        pairs = [EvalPair(r["reference"], r["hypothesis"], str(r.get("id", i))) for i, r in enumerate(_read_jsonl(args.pairs))]
    else:
        if not (args.references and args.hypotheses):
            raise UsageError("--references and --hypotheses must be given together")
        refs = _read_jsonl(args.references)
        hyps = {str(r["id"]): r["text"] for r in _read_jsonl(args.hypotheses)}
        missing = [str(r["id"]) for r in refs if str(r["id"]) not in hyps]
        if missing:
            raise UsageError(f"no hypothesis for id {missing[0]!r}")
        pairs = [EvalPair(r["text"], hyps[str(r["id"])], str(r["id"])) for r in refs]
    vectors = load_vectors(cfg.vectors) if cfg.vectors else None
    return pipeline.report_dict(pairs, vectors)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "synth":
        if extra:
            raise UsageError(f"unexpected arguments {extra}")
        n = write_synth(SynthConfig(args.n_patches, args.n_clusters, args.templates_per_cluster, args.noise_rate,
                                    args.n_authors, args.n_projects, args.seed, not args.no_function_in_description),
                        args.out)
        print(json.dumps({"patches": n, "out": args.out}))
        return 0

    cfg = _config(args, extra)
    if args.command == "analyze-aspects":
        if not cfg.corpus:
            raise UsageError("corpus path is not set")
        if not Path(cfg.corpus).exists():
            raise FileNotFoundError(f"corpus not found: {cfg.corpus}")
        print(format_stats(corpus_aspect_stats(load_corpus(cfg.corpus))))
        return 0
    if args.command == "eval" and (args.pairs or args.references or args.hypotheses):
        result = _standalone_eval(args, cfg)
    else:
        stage = {
            "ingest": pipeline.cmd_ingest,
            "prepare": pipeline.cmd_prepare,
            "train": pipeline.cmd_train,
            "generate": pipeline.cmd_generate,
            "eval": pipeline.cmd_eval,
            "run": pipeline.run_all,
        }[args.command]
        result = stage(cfg)
    print(json.dumps(result, sort_keys=True))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run(argv)
    except PatchDescError as exc:
        print(f"patchdesc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"patchdesc: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"patchdesc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
