"""Reciprocal Rank Fusion over TREC-style runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .store import RankedRun, sort_key


@dataclass(frozen=True)
class RrfConfig:
    k: float = 60.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"RRF k must be positive, got {self.k}")


def rrf_fuse(runs: Sequence[RankedRun], cfg: RrfConfig, out_tag: str = "rrf") -> RankedRun:
    """score(d) = sum over runs containing d of 1 / (k + rank), ranks from 1.

    Contributions are summed with ``math.fsum`` so the fused scores do not
    depend on the order the runs are given in. Output queries are sorted by id.
    """
    if len(runs) < 2:
        raise ValueError(f"RRF needs at least 2 runs, got {len(runs)}")
    qids = sorted({q for run in runs for q in run.queries})
    fused: dict[str, list[tuple[str, float]]] = {}
    for qid in qids:
        parts: dict[str, list[float]] = {}
        for run in runs:
            for rank, (doc, _) in enumerate(run.queries.get(qid, ()), 1):
                parts.setdefault(doc, []).append(1.0 / (cfg.k + rank))
        scores = {doc: math.fsum(c) for doc, c in parts.items()}
        fused[qid] = sorted(scores.items(), key=sort_key)
    return RankedRun(out_tag, fused)


def truncate_run(run: RankedRun, depth: int, tag: str | None = None) -> RankedRun:
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    return RankedRun(
        run.tag if tag is None else tag,
        {qid: list(hits[:depth]) for qid, hits in run.queries.items()},
    )
