"""Pipeline stages over a work directory, with a manifest of content hashes.

Each stage records the sha256 of the files it read and wrote. A stage refuses
to run when an input no longer matches what its producing stage wrote, and
re-running a stage forgets every later stage.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional

from . import clustering
from .context import (
    HistoryIndex,
    extract_patch_related_code,
    extract_scope,
    graph_from_edges,
    load_edge_sidecar,
    lookup_history,
    patch_graph,
)
from .core import build_source_sequence, build_target_sequence, join_tokens, tokenize, SourceSequence
from .errors import DataError, StaleStage, UsageError
from .ingestion import (
    CleaningRules,
    SplitSpec,
    SplitStrategy,
    clean_corpus,
    filter_by_length,
    load_corpus,
    read_split_manifest,
    split,
    write_corpus,
    write_split_manifest,
)
from .metrics import EvalPair, evaluate, load_vectors
from .nmt import ModelConfig, Seq2SeqModel, TrainConfig, Vocabulary, generate, load_checkpoint, save_checkpoint
from .nmt import train as train_model
from .nmt import write_loss_log

log = logging.getLogger(__name__)

STAGES = ("ingest", "prepare", "train", "generate", "eval")
CORPUS_FILE = "corpus.jsonl"
SPLIT_FILE = "split.jsonl"
STATS_FILE = "ingest_stats.json"
EXAMPLES_FILE = "examples.jsonl"
CLUSTERS_FILE = "clusters.json"
GROUPS_FILE = "groups.jsonl"
CHECKPOINT_FILE = "model.ckpt"
LOSS_FILE = "loss.csv"
PREDICTIONS_FILE = "predictions.jsonl"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str = ""
    workdir: str = "work"
    seed: int = 0
    # ingestion
    split_strategy: str = "dev-process"
    split_ratio: float = 0.8
    min_tokens: int = 3
    max_tokens: int = 15
    clean_urls: bool = True
    clean_emails: bool = True
    clean_commit_ids: bool = True
    clean_bug_ids: bool = True
    clean_trailers: bool = True
    clean_lead_ins: bool = True
    # context extraction
    max_statements: int = 10
    max_history: int = 10
    use_scope: bool = True
    edges_sidecar: str = ""
    # clustering; k = 0 picks max(2, round(sqrt(n_train / 2)))
    k: int = 0
    kmeans_max_iter: int = 100
    # model
    d_model: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 2
    heads: int = 4
    d_ff: int = 128
    max_source_len: int = 256
    max_target_len: int = 24
    dropout: float = 0.1
    vocab_min_freq: int = 2
    # training
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    clip_norm: float = 1.0
    dual_objective: bool = True
    lr_schedule: str = "constant"
    warmup_steps: int = 0
    # generation / evaluation
    decode_mode: str = "greedy"
    beam_width: int = 4
    vectors: str = ""

    def __post_init__(self):
        if not self.workdir:
            raise UsageError("workdir must be set")
        if self.max_statements <= 0 or self.max_history < 0:
            raise UsageError("max_statements must be positive and max_history non-negative")
        if self.split_strategy not in ("dev-process", "cross-project"):
            raise UsageError(f"split_strategy must be dev-process or cross-project, got {self.split_strategy!r}")

    def stage_seed(self, stage: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{stage}".encode()).digest()
        return int.from_bytes(digest[:4], "little") & 0x7FFFFFFF

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.d_model, self.encoder_layers, self.decoder_layers, self.heads, self.d_ff,
                           self.max_source_len, self.max_target_len, self.dropout, self.stage_seed("model"))

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.clip_norm, self.dual_objective,
                           self.stage_seed("train"), self.lr_schedule, self.warmup_steps)

    def cleaning_rules(self) -> CleaningRules:
        return CleaningRules(self.clean_urls, self.clean_emails, self.clean_commit_ids, self.clean_bug_ids,
                             self.clean_trailers, self.clean_lead_ins)

    def subset(self, *names: str) -> dict:
        return {n: getattr(self, n) for n in names}


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
ALIASES = {"single_objective": ("dual_objective", "false"), "no_scope": ("use_scope", "false")}


def _coerce(key: str, value: Any) -> Any:
    kind = _FIELD_TYPES[key]
    if kind == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {value!r}")
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: expected {kind}, got {value!r}") from None
    return str(value)


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".toml":
        import tomli

        return tomli.loads(text)
    return json.loads(text)


def make_config(file_values: Optional[Mapping] = None, overrides: Optional[Mapping] = None) -> PipelineConfig:
    values: dict[str, Any] = {}
    for source in (file_values or {}), (overrides or {}):
        for raw_key, value in source.items():
            key = raw_key.replace("-", "_")
            if key in ALIASES:
                key, value = ALIASES[key][0], ALIASES[key][1] if value in (None, True, "true", "") else value
            if key not in _FIELD_TYPES:
                raise UsageError(f"unknown config key {raw_key!r}")
            values[key] = _coerce(key, value)
    return PipelineConfig(**values)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Workdir:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.root / name

    def manifest(self) -> dict:
        p = self.path(MANIFEST_FILE)
        return json.loads(p.read_text(encoding="utf-8")) if p.exists() else {}

    def _write_manifest(self, manifest: dict) -> None:
        self.path(MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def require(self, producer: str, names: tuple[str, ...]) -> None:
        entry = self.manifest().get(producer)
        if entry is None:
            raise StaleStage(f"stage '{producer}' has not run in {self.root}; run it first")
        for name in names:
            p = self.path(name)
            if not p.exists():
                raise StaleStage(f"{p} is missing; rerun '{producer}'")
            if entry["outputs"].get(name) != sha256_file(p):
                raise StaleStage(f"{p} changed since '{producer}' wrote it; rerun '{producer}'")

    def record(self, stage: str, inputs: Mapping[str, str], outputs: tuple[str, ...], config: Mapping) -> None:
        manifest = self.manifest()
        for later in STAGES[STAGES.index(stage) + 1:]:
            manifest.pop(later, None)
        manifest[stage] = {
            "inputs": dict(inputs),
            "outputs": {n: sha256_file(self.path(n)) for n in outputs},
            "config": hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest(),
        }
        self._write_manifest(manifest)


def _write_jsonl(path, records) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _read_jsonl(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def cmd_ingest(cfg: PipelineConfig) -> dict:
    if not cfg.corpus:
        raise UsageError("corpus path is not set")
    src = Path(cfg.corpus)
    if not src.exists():
        raise FileNotFoundError(f"corpus not found: {src}")
    wd = Workdir(cfg.workdir)
    raw = load_corpus(src)
    cleaned = clean_corpus(raw, cfg.cleaning_rules())
    kept = filter_by_length(cleaned, cfg.min_tokens, cfg.max_tokens)
    spec = SplitSpec(SplitStrategy(cfg.split_strategy), cfg.split_ratio, cfg.stage_seed("split"))
    train, test = split(kept, spec)
    write_corpus(kept, wd.path(CORPUS_FILE))
    write_split_manifest(train, test, wd.path(SPLIT_FILE), order=kept.patches)
    stats = {"input": len(raw), "kept": len(kept), "dropped": len(raw) - len(kept), "train": len(train), "test": len(test)}
    wd.path(STATS_FILE).write_text(json.dumps(stats, sort_keys=True) + "\n", encoding="utf-8")
    wd.record("ingest", {"corpus": sha256_file(src)}, (CORPUS_FILE, SPLIT_FILE, STATS_FILE),
              cfg.subset("split_strategy", "split_ratio", "min_tokens", "max_tokens", "seed"))
    return stats


def cmd_prepare(cfg: PipelineConfig) -> dict:
    wd = Workdir(cfg.workdir)
    wd.require("ingest", (CORPUS_FILE, SPLIT_FILE))
    corpus = load_corpus(wd.path(CORPUS_FILE))
    sides = read_split_manifest(wd.path(SPLIT_FILE))
    sidecar = load_edge_sidecar(cfg.edges_sidecar) if cfg.edges_sidecar else {}
    # every lookup is strictly earlier in time, so one index over the whole corpus
    # sees exactly the training patches plus earlier patches of the patch's own split
    index = HistoryIndex.build(corpus)

    train_patches = [p for p in corpus if sides.get(p.id) == "train"]
    if not train_patches:
        raise DataError("split manifest has no training patches")
    descriptions = [p.description for p in train_patches]
    model = clustering.fit_description_clusters(descriptions, cfg.k or None, cfg.stage_seed("cluster"), cfg.kmeans_max_iter)
    model.save(wd.path(CLUSTERS_FILE))

    records, groups = [], []
    for p in corpus:
        graph = graph_from_edges(p, sidecar[p.id]) if p.id in sidecar else patch_graph(p)
        related = extract_patch_related_code(p, graph, cfg.max_statements)
        scope = extract_scope(p) if cfg.use_scope else None
        history = lookup_history(index, p, cfg.max_history)
        source = build_source_sequence(related, scope, history)
        group = clustering.assign(model, p.description)
        target = build_target_sequence(p.description)
        records.append({
            "id": p.id,
            "split": sides[p.id],
            "source_tokens": list(source.tokens),
            "target_tokens": list(target.description_tokens),
            "group": group,
            "reference": join_tokens(target.description_tokens),
        })
        groups.append({"id": p.id, "group": group})
    _write_jsonl(wd.path(EXAMPLES_FILE), records)
    _write_jsonl(wd.path(GROUPS_FILE), groups)
    wd.record("prepare", {n: sha256_file(wd.path(n)) for n in (CORPUS_FILE, SPLIT_FILE)},
              (EXAMPLES_FILE, CLUSTERS_FILE, GROUPS_FILE),
              cfg.subset("max_statements", "max_history", "use_scope", "edges_sidecar", "k", "seed"))
    return {"examples": len(records), "k": model.k}


def _examples(wd: Workdir, side: str) -> list[dict]:
    return [r for r in _read_jsonl(wd.path(EXAMPLES_FILE)) if r["split"] == side]


def cmd_train(cfg: PipelineConfig) -> dict:
    wd = Workdir(cfg.workdir)
    wd.require("prepare", (EXAMPLES_FILE, CLUSTERS_FILE))
    rows = _examples(wd, "train")
    k = clustering.ClusterModel.load(wd.path(CLUSTERS_FILE)).k
    tcfg = cfg.train_config()
    pairs = []
    for r in rows:
        target = build_target_sequence(" ".join(r["target_tokens"]), r["group"] if tcfg.dual_objective else None)
        pairs.append((SourceSequence(r["source_tokens"]), target))
    vocab = Vocabulary.build([s.tokens for s, _ in pairs] + [t.description_tokens for _, t in pairs],
                             n_groups=k if tcfg.dual_objective else 0, min_freq=cfg.vocab_min_freq)
    model = Seq2SeqModel(cfg.model_config(), vocab, tcfg.dual_objective)
    model, history = train_model(model, pairs, tcfg)
    save_checkpoint(model, wd.path(CHECKPOINT_FILE))
    write_loss_log(history, wd.path(LOSS_FILE))
    wd.record("train", {EXAMPLES_FILE: sha256_file(wd.path(EXAMPLES_FILE))}, (CHECKPOINT_FILE, LOSS_FILE),
              dataclasses.asdict(cfg.model_config()) | dataclasses.asdict(tcfg) | {"min_freq": cfg.vocab_min_freq})
    return {"epochs": len(history), "final_loss": history[-1].mean_loss if history else None, "vocab": len(vocab)}


def cmd_generate(cfg: PipelineConfig) -> dict:
    wd = Workdir(cfg.workdir)
    wd.require("train", (CHECKPOINT_FILE,))
    model = load_checkpoint(wd.path(CHECKPOINT_FILE))
    out = []
    for r in _examples(wd, "test"):
        group, text = generate(model, r["source_tokens"], cfg.decode_mode, cfg.beam_width)
        rec = {"id": r["id"], "hypothesis": text}
        if group is not None:
            rec["group_pred"] = group
        out.append(rec)
    _write_jsonl(wd.path(PREDICTIONS_FILE), out)
    wd.record("generate", {CHECKPOINT_FILE: sha256_file(wd.path(CHECKPOINT_FILE)),
                           EXAMPLES_FILE: sha256_file(wd.path(EXAMPLES_FILE))},
              (PREDICTIONS_FILE,), cfg.subset("decode_mode", "beam_width"))
    return {"predictions": len(out)}


def report_dict(pairs, vectors=None, groups=None) -> dict:
    report = evaluate(pairs, vectors)
    out = {"n": len(pairs), **report.as_percent()}
    if groups:
        out["group_accuracy"] = round(100 * sum(p == t for p, t in groups) / len(groups), 2)
    return out


def cmd_eval(cfg: PipelineConfig) -> dict:
    wd = Workdir(cfg.workdir)
    wd.require("generate", (PREDICTIONS_FILE,))
    refs = {r["id"]: r for r in _examples(wd, "test")}
    pairs, groups = [], []
    for pred in _read_jsonl(wd.path(PREDICTIONS_FILE)):
        ref = refs.get(pred["id"])
        if ref is None:
            raise DataError(f"prediction for unknown test id {pred['id']!r}")
        pairs.append(EvalPair(ref["reference"], pred["hypothesis"], pred["id"]))
        if "group_pred" in pred:
            groups.append((pred["group_pred"], ref["group"]))
    vectors = load_vectors(cfg.vectors) if cfg.vectors else None
    out = report_dict(pairs, vectors, groups)
    wd.path(REPORT_FILE).write_text(json.dumps(out, sort_keys=True) + "\n", encoding="utf-8")
    wd.record("eval", {PREDICTIONS_FILE: sha256_file(wd.path(PREDICTIONS_FILE))}, (REPORT_FILE,),
              cfg.subset("vectors"))
    return out


def run_all(cfg: PipelineConfig) -> dict:
    cmd_ingest(cfg)
    cmd_prepare(cfg)
    cmd_train(cfg)
    cmd_generate(cfg)
    return cmd_eval(cfg)
