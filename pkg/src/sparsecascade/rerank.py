"""Rerank-the-head-then-splice cascades.

Reranker scores come from outside (JSON Lines) or from the built-in stand-ins.
After splicing, output scores are synthetic ``1 / rank`` values: reranker
logits and retrieval scores live on different scales and downstream fusion
only reads ranks.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass
from typing import Sequence

from .metrics import MetricReport, evaluate
from .store import FormatError, Qrels, RankedRun, atomic_write_text

RerankScores = dict[str, dict[str, float]]

TAIL_POLICIES = ("append_below", "drop")
BUILTIN_MODES = ("identity", "oracle", "noise")


class RerankCoverageError(ValueError):
    pass


class UnknownScoreWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RerankConfig:
    depth: int = 100
    tail_policy: str = "append_below"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"rerank depth must be >= 1, got {self.depth}")
        if self.tail_policy not in TAIL_POLICIES:
            raise ValueError(f"tail_policy must be one of {TAIL_POLICIES}, got {self.tail_policy!r}")


def extract_candidates(run: RankedRun, n: int) -> dict[str, list[str]]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return {qid: [d for d, _ in hits[:n]] for qid, hits in run.queries.items()}


def write_candidates(candidates: dict[str, list[str]], path) -> None:
    lines = (
        json.dumps({"qid": q, "candidates": docs}, separators=(",", ":")) + "\n"
        for q, docs in candidates.items()
    )
    atomic_write_text(path, "".join(lines))


def read_candidates(path) -> dict[str, list[str]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[str(obj["qid"])] = [str(d) for d in obj["candidates"]]
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(path, lineno, f"bad candidate line: {exc}") from None
    return out


def write_rerank_scores(scores: RerankScores, path) -> None:
    lines = (
        json.dumps({"qid": q, "scores": s}, separators=(",", ":")) + "\n" for q, s in scores.items()
    )
    atomic_write_text(path, "".join(lines))


def read_rerank_scores(path) -> RerankScores:
    """``{"qid": ..., "scores": {docid: score}}`` per line; a qid may repeat."""
    out: RerankScores = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                qid = str(obj["qid"])
                scores = obj["scores"]
                if not isinstance(scores, dict):
                    raise TypeError('"scores" must be an object')
                entry = out.setdefault(qid, {})
                for doc, s in scores.items():
                    if isinstance(s, bool) or not isinstance(s, (int, float)):
                        raise TypeError(f"score for {doc} is not a number")
                    entry[doc] = float(s)
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(path, lineno, f"bad score line: {exc}") from None
    return out


def splice_rerank(
    run: RankedRun, scores: RerankScores, cfg: RerankConfig, tag: str = "rerank"
) -> RankedRun:
    """Reorder each query's top ``cfg.depth`` by reranker score, keep the tail.

    The head set and the tail sequence never change; only the order inside
    the head does. Raises RerankCoverageError naming the first head document
    that has no score.
    """
    unknown = [q for q in scores if q not in run.queries]
    out: dict[str, list[tuple[str, float]]] = {}
    for qid, hits in run.queries.items():
        head = [d for d, _ in hits[: cfg.depth]]
        tail = [d for d, _ in hits[cfg.depth :]] if cfg.tail_policy == "append_below" else []
        qscores = scores.get(qid, {})
        for d in head:
            if d not in qscores:
                raise RerankCoverageError(f"no reranker score for query {qid}, doc {d}")
        if qscores:
            in_run = {d for d, _ in hits}
            unknown.extend(f"{qid}/{d}" for d in qscores if d not in in_run)
        head.sort(key=lambda d: (-qscores[d], d))
        out[qid] = [(d, 1.0 / r) for r, d in enumerate(head + tail, 1)]
    if unknown:
        warnings.warn(
            f"ignored {len(unknown)} reranker scores for queries/docs absent from the run "
            f"(e.g. {unknown[0]})",
            UnknownScoreWarning,
            stacklevel=2,
        )
    return RankedRun(tag, out)


def builtin_reranker(
    run: RankedRun,
    n: int,
    mode: str = "identity",
    qrels: Qrels | None = None,
    seed: int = 0,
) -> RerankScores:
    """Stand-in scorers over each query's top ``n``.

    identity: preserves the input order. oracle: relevance grade first, then
    original rank. noise: a seeded random permutation per query.
    """
    if mode not in BUILTIN_MODES:
        raise ValueError(f"unknown builtin reranker {mode!r}; expected one of {BUILTIN_MODES}")
    if mode == "oracle" and qrels is None:
        raise ValueError("oracle reranker needs qrels")
    out: RerankScores = {}
    for qid, docs in extract_candidates(run, n).items():
        m = len(docs)
        if mode == "identity":
            out[qid] = {d: float(m - i) for i, d in enumerate(docs)}
        elif mode == "oracle":
            judged = qrels.get(qid, {})
            out[qid] = {d: float(judged.get(d, 0) * (m + 1) + (m - i)) for i, d in enumerate(docs)}
        else:
            perm = list(range(m))
            random.Random(f"{seed}:{qid}").shuffle(perm)
            out[qid] = {d: float(p) for d, p in zip(docs, perm)}
    return out


def depth_sweep(
    run: RankedRun,
    scores: RerankScores,
    depths: Sequence[int],
    qrels: Qrels,
    metric: str = "ndcg",
    cutoff: int = 20,
    tail_policy: str = "append_below",
) -> list[tuple[int, MetricReport]]:
    """Splice at every depth and evaluate; one (depth, report) row per depth."""
    rows = []
    for depth in depths:
        spliced = splice_rerank(run, scores, RerankConfig(depth, tail_policy), tag=f"d{depth}")
        rows.append((depth, evaluate(spliced, qrels, metric, cutoff)))
    return rows


def render_sweep(base_name: str, base: MetricReport, rows: Sequence[tuple[int, MetricReport]]) -> str:
    """Text table: base row, then one row per rerank depth."""
    header = base.label
    labels = [base_name, "k"] + [str(d) for d, _ in rows]
    width = max(len(s) for s in labels)
    lines = [f"{'':<{width}}  {header}", f"{base_name:<{width}}  {base.mean:.3f}", "k"]
    lines += [f"{d:<{width}}  {rep.mean:.3f}" for d, rep in rows]
    return "\n".join(lines) + "\n"
