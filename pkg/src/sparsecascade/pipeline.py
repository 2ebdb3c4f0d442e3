"""Declarative stage graphs: retrieve / fuse / rerank / evaluate.

A pipeline file is TOML::

    version = 1
    name = "run2"

    [stages.first]
    type = "retrieve"
    vectors = "docs.a.jsonl"      # or: index = "a.idx"
    queries = "queries.a.jsonl"
    k = 1000

    [stages.second]
    ...

    [stages.fused]
    type = "fuse"
    inputs = ["first", "second"]
    k = 10

    [stages.eval]
    type = "evaluate"
    input = "fused"
    qrels = "qrels.txt"

Relative file paths resolve against ``data_dir`` (default: the directory of
the pipeline file). Each stage writes into ``<workdir>/<stage>/`` and the
run ends with ``<workdir>/manifest.json``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import networkx as nx

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fusion import RrfConfig, rrf_fuse, truncate_run
from .index import ApproxConfig, build_index, search_batch
from .metrics import evaluate, format_per_query
from .persist import load_index
from .rerank import (
    BUILTIN_MODES,
    TAIL_POLICIES,
    RerankConfig,
    builtin_reranker,
    read_rerank_scores,
    splice_rerank,
    write_rerank_scores,
)
from .store import RankedRun, atomic_write_text, read_qrels, read_run, read_vectors, write_run

log = logging.getLogger(__name__)

SPEC_VERSION = 1
MANIFEST_VERSION = 1

# type -> (required keys, optional keys)
STAGE_KEYS: dict[str, tuple[set[str], set[str]]] = {
    "retrieve": (
        {"queries", "k"},
        {"index", "vectors", "doc_pool", "query_pool", "mode", "alpha", "beta", "gamma"},
    ),
    "fuse": ({"inputs"}, {"k", "method", "depth"}),
    "rerank": ({"input", "depth"}, {"scores", "builtin", "qrels", "seed", "tail_policy"}),
    "evaluate": ({"input", "qrels"}, {"metric", "cutoff"}),
}
RUN_PRODUCERS = {"retrieve", "fuse", "rerank"}
PATH_KEYS = {"index", "vectors", "queries", "scores", "qrels"}


class PipelineSpecError(ValueError):
    pass


class PipelineExecutionError(RuntimeError):
    def __init__(self, message: str, manifest: dict):
        super().__init__(message)
        self.manifest = manifest


@dataclass
class Stage:
    name: str
    type: str
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def inputs(self) -> list[str]:
        if self.type == "fuse":
            refs = self.params.get("inputs", [])
            return [r for r in refs if isinstance(r, str)] if isinstance(refs, list) else []
        ref = self.params.get("input")
        return [ref] if isinstance(ref, str) else []


@dataclass
class PipelineSpec:
    name: str
    stages: dict[str, Stage]
    data_dir: Path = Path(".")
    version: int = SPEC_VERSION


@dataclass(frozen=True)
class Diagnostic:
    stage: str
    message: str

    def __str__(self) -> str:
        return f"[{self.stage}] {self.message}"


def parse_pipeline(text: str, base_dir=".", default_name: str = "pipeline") -> PipelineSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise PipelineSpecError(f"invalid pipeline file: {exc}") from None
    version = doc.get("version")
    if version != SPEC_VERSION:
        raise PipelineSpecError(f"unsupported pipeline version {version!r} (expected {SPEC_VERSION})")
    raw = doc.get("stages")
    if not isinstance(raw, dict) or not raw:
        raise PipelineSpecError("pipeline defines no [stages.<name>] tables")
    stages = {}
    for name, body in raw.items():
        if not isinstance(body, dict):
            raise PipelineSpecError(f"stage {name!r} must be a table")
        params = dict(body)
        stype = params.pop("type", None)
        stages[name] = Stage(name, stype, params)
    base = Path(base_dir)
    return PipelineSpec(
        name=str(doc.get("name", default_name)),
        stages=stages,
        data_dir=base / doc.get("data_dir", "."),
        version=version,
    )


def load_pipeline(path, data_dir=None) -> PipelineSpec:
    path = Path(path)
    spec = parse_pipeline(path.read_text(encoding="utf-8"), path.parent, default_name=path.stem)
    if data_dir is not None:
        spec.data_dir = Path(data_dir)
    return spec


def _is_int(v, lo: int = 1) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= lo


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_params(stage: Stage) -> list[str]:
    p = stage.params
    problems = []
    required, optional = STAGE_KEYS[stage.type]
    for key in sorted(required - p.keys()):
        problems.append(f"missing required key {key!r}")
    for key in sorted(p.keys() - required - optional):
        problems.append(f"unknown key {key!r} for a {stage.type} stage")
    for key in PATH_KEYS & p.keys():
        if not isinstance(p[key], str):
            problems.append(f"{key!r} must be a file path string")

    if stage.type == "retrieve":
        if ("index" in p) == ("vectors" in p):
            problems.append("give exactly one of 'index' or 'vectors'")
        if "index" in p and "doc_pool" in p:
            problems.append("'doc_pool' applies only when building from 'vectors'")
        for key in ("k", "doc_pool", "query_pool", "beta"):
            if key in p and not _is_int(p[key]):
                problems.append(f"{key!r} must be a positive integer")
        mode = p.get("mode", "exact")
        if mode not in ("exact", "approx"):
            problems.append(f"mode must be 'exact' or 'approx', got {mode!r}")
        if mode == "exact" and {"alpha", "beta", "gamma"} & p.keys():
            problems.append("alpha/beta/gamma need mode = 'approx'")
        if mode == "approx":
            try:
                ApproxConfig(p.get("alpha", 0.5), p.get("beta", 64), p.get("gamma", 1.0))
            except (ValueError, TypeError) as exc:
                problems.append(str(exc))
    elif stage.type == "fuse":
        refs = p.get("inputs")
        if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
            problems.append("'inputs' must be a list of stage names")
        elif len(refs) < 2:
            problems.append("fusion needs at least 2 inputs")
        elif len(set(refs)) != len(refs):
            problems.append("'inputs' lists a stage twice")
        if p.get("method", "rrf") != "rrf":
            problems.append(f"unsupported fusion method {p['method']!r}")
        if "k" in p and not (_is_num(p["k"]) and p["k"] > 0):
            problems.append("RRF 'k' must be positive")
        if "depth" in p and not _is_int(p["depth"]):
            problems.append("'depth' must be a positive integer")
    elif stage.type == "rerank":
        if not isinstance(p.get("input"), str):
            problems.append("'input' must name one stage")
        if "depth" in p and not _is_int(p["depth"]):
            problems.append("'depth' must be a positive integer")
        if ("scores" in p) == ("builtin" in p):
            problems.append("give exactly one of 'scores' or 'builtin'")
        if "builtin" in p:
            if p["builtin"] not in BUILTIN_MODES:
                problems.append(f"builtin must be one of {BUILTIN_MODES}")
            elif p["builtin"] == "oracle" and "qrels" not in p:
                problems.append("the oracle builtin needs 'qrels'")
        if p.get("tail_policy", "append_below") not in TAIL_POLICIES:
            problems.append(f"tail_policy must be one of {TAIL_POLICIES}")
        if "seed" in p and not _is_int(p["seed"], 0):
            problems.append("'seed' must be a non-negative integer")
    elif stage.type == "evaluate":
        if not isinstance(p.get("input"), str):
            problems.append("'input' must name exactly one run-producing stage")
        if p.get("metric", "ndcg") not in ("ndcg", "ndcg_exp", "recall"):
            problems.append(f"unknown metric {p.get('metric')!r}")
        if "cutoff" in p and not _is_int(p["cutoff"]):
            problems.append("'cutoff' must be a positive integer")
    return problems


def validate(spec: PipelineSpec) -> list[Diagnostic]:
    """Every invariant violation as one diagnostic; empty means runnable."""
    diags: list[Diagnostic] = []
    graph = nx.DiGraph()
    for name, stage in spec.stages.items():
        graph.add_node(name)
        if stage.type not in STAGE_KEYS:
            diags.append(Diagnostic(name, f"unknown stage type {stage.type!r}"))
            continue
        diags.extend(Diagnostic(name, msg) for msg in _check_params(stage))
        for ref in stage.inputs:
            if ref not in spec.stages:
                diags.append(Diagnostic(name, f"unresolved reference to undefined stage {ref!r}"))
                continue
            graph.add_edge(ref, name)
            target = spec.stages[ref].type
            if target not in RUN_PRODUCERS:
                diags.append(
                    Diagnostic(name, f"input {ref!r} is a {target} stage, not a run-producing stage")
                )
    order = {n: i for i, n in enumerate(spec.stages)}
    for comp in nx.strongly_connected_components(graph):
        members = sorted(comp, key=order.get)
        if len(members) > 1 or graph.has_edge(members[0], members[0]):
            diags.append(Diagnostic(members[0], "cycle between stages " + ", ".join(members)))
    return diags


def _levels(spec: PipelineSpec) -> list[list[str]]:
    """Topological waves; declaration order inside each wave."""
    done: set[str] = set()
    waves = []
    pending = list(spec.stages)
    while pending:
        wave = [n for n in pending if all(r in done for r in spec.stages[n].inputs)]
        if not wave:
            raise PipelineSpecError("stage graph has a cycle")
        waves.append(wave)
        done.update(wave)
        pending = [n for n in pending if n not in done]
    return waves


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Executor:
    def __init__(self, spec: PipelineSpec, workdir: Path, threads: int):
        self.spec = spec
        self.workdir = workdir
        self.threads = threads
        self.runs: dict[str, RankedRun] = {}

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.spec.data_dir / p

    def emit_run(self, stage: Stage, run: RankedRun) -> tuple[str, Path]:
        out = self.workdir / stage.name / "run.trec"
        write_run(run, out)
        back = read_run(out)
        if back.queries != run.queries or (run.queries and back.tag != run.tag):
            raise RuntimeError(f"stage {stage.name}: run file did not re-read identically")
        self.runs[stage.name] = run
        return ("run", out)

    def run_stage(self, stage: Stage) -> list[tuple[str, Path, dict]]:
        p = stage.params
        if stage.type == "retrieve":
            if "index" in p:
                index = load_index(self.path(p["index"]))
            else:
                index = build_index(read_vectors(self.path(p["vectors"])), p.get("doc_pool"))
            queries = [(r.id, r.vector) for r in read_vectors(self.path(p["queries"]))]
            approx = None
            if p.get("mode", "exact") == "approx":
                approx = ApproxConfig(p.get("alpha", 0.5), p.get("beta", 64), p.get("gamma", 1.0))
            run = search_batch(
                index, queries, p["k"], stage.name, query_pool=p.get("query_pool"), approx=approx
            )
            return [(*self.emit_run(stage, run), {})]
        if stage.type == "fuse":
            inputs = [self.runs[r] for r in p["inputs"]]
            if "depth" in p:
                inputs = [truncate_run(r, p["depth"]) for r in inputs]
            run = rrf_fuse(inputs, RrfConfig(p.get("k", 60)), stage.name)
            return [(*self.emit_run(stage, run), {})]
        if stage.type == "rerank":
            source = self.runs[p["input"]]
            depth = p["depth"]
            if "scores" in p:
                scores = read_rerank_scores(self.path(p["scores"]))
            else:
                qrels = read_qrels(self.path(p["qrels"])) if "qrels" in p else None
                scores = builtin_reranker(source, depth, p["builtin"], qrels, p.get("seed", 0))
            cfg = RerankConfig(depth, p.get("tail_policy", "append_below"))
            run = splice_rerank(source, scores, cfg, stage.name)
            used = {
                qid: {d: scores[qid][d] for d, _ in hits[:depth]}
                for qid, hits in source.queries.items()
                if hits
            }
            score_path = self.workdir / stage.name / "scores.jsonl"
            write_rerank_scores(used, score_path)
            return [("scores", score_path, {}), (*self.emit_run(stage, run), {})]
        if stage.type == "evaluate":
            metric, cutoff = p.get("metric", "ndcg"), p.get("cutoff", 20)
            report = evaluate(self.runs[p["input"]], read_qrels(self.path(p["qrels"])), metric, cutoff)
            out = self.workdir / stage.name / "report.tsv"
            atomic_write_text(out, format_per_query(report))
            return [("report", out, {"metric": report.label, "mean": report.mean})]
        raise PipelineSpecError(f"unknown stage type {stage.type!r}")


def execute(spec: PipelineSpec, workdir, threads: int = 1) -> dict:
    """Run every stage in topological order and write ``manifest.json``.

    Stages in the same wave may run concurrently (``threads > 1``); the
    manifest order is the same either way. A failing stage stops all later
    waves, keeps finished artifacts, and raises PipelineExecutionError with
    the failure recorded in the manifest.
    """
    diags = validate(spec)
    if diags:
        raise PipelineSpecError("invalid pipeline:\n" + "\n".join(str(d) for d in diags))
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    ex = _Executor(spec, workdir, threads)
    manifest: dict = {
        "manifest_version": MANIFEST_VERSION,
        "pipeline": spec.name,
        "status": "ok",
        "artifacts": [],
    }
    failure = None
    for wave in _levels(spec):
        stages = [spec.stages[n] for n in wave]
        if threads > 1 and len(stages) > 1:
            with ThreadPoolExecutor(min(threads, len(stages))) as pool:
                futures = [pool.submit(ex.run_stage, s) for s in stages]
                outcomes = [_outcome(f.result) for f in futures]
        else:
            outcomes = [_outcome(lambda s=s: ex.run_stage(s)) for s in stages]
        for stage, (produced, error) in zip(stages, outcomes):
            if error is not None:
                failure = failure or (stage.name, error)
                continue
            log.info("stage %s done", stage.name)
            for kind, path, extra in produced:
                entry = {
                    "stage": stage.name,
                    "type": stage.type,
                    "kind": kind,
                    "path": path.relative_to(workdir).as_posix(),
                    "sha256": _sha256(path),
                }
                entry.update(extra)
                manifest["artifacts"].append(entry)
        if failure:
            break
    if failure:
        manifest["status"] = "failed"
        manifest["failed_stage"] = failure[0]
        manifest["error"] = f"{type(failure[1]).__name__}: {failure[1]}"
    atomic_write_text(workdir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if failure:
        raise PipelineExecutionError(f"stage {failure[0]!r} failed: {failure[1]}", manifest)
    return manifest


def _outcome(fn):
    try:
        return fn(), None
    except Exception as exc:  # noqa: BLE001  (recorded in the manifest)
        log.error("stage failed: %s", exc)
        return None, exc
