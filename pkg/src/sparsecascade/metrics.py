"""nDCG@k / recall@k and comparison tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .store import Qrels, RankedRun

_DISPLAY = {"ndcg": "nDCG", "ndcg_exp": "nDCG(exp)", "recall": "R"}


@dataclass
class MetricReport:
    """Per-query values plus their mean.

    Queries without any positive judgment are left out of ``per_query`` and
    the mean; ``num_empty`` counts them. Queries judged but absent from the
    run score 0.
    """

    metric: str
    cutoff: int
    per_query: dict[str, float] = field(default_factory=dict)
    num_empty: int = 0

    @property
    def mean(self) -> float:
        return math.fsum(self.per_query.values()) / len(self.per_query) if self.per_query else 0.0

    @property
    def num_queries(self) -> int:
        return len(self.per_query)

    @property
    def label(self) -> str:
        return f"{_DISPLAY.get(self.metric, self.metric)}@{self.cutoff}"


def _gain(grade: int, gain: str) -> float:
    if gain == "linear":
        return float(grade)
    if gain == "exponential":
        return 2.0**grade - 1.0
    raise ValueError(f"unknown gain {gain!r} (linear or exponential)")


def _eval_queries(run: RankedRun, qrels: Qrels):
    """(evaluated qids, number of queries with no positive judgment)."""
    qids = list(qrels) + [q for q in run.queries if q not in qrels]
    keep = [q for q in qids if any(g > 0 for g in qrels.get(q, {}).values())]
    return keep, len(qids) - len(keep)


def dcg(grades: Sequence[int], k: int, gain: str = "linear") -> float:
    return math.fsum(_gain(g, gain) / math.log2(i + 2) for i, g in enumerate(grades[:k]))


def ndcg_at_k(run: RankedRun, qrels: Qrels, k: int = 20, gain: str = "linear") -> MetricReport:
    """DCG@k = sum_i gain(grade_i) / log2(i + 1), normalised by the ideal DCG@k."""
    if k < 1:
        raise ValueError(f"cutoff must be >= 1, got {k}")
    keep, empty = _eval_queries(run, qrels)
    name = "ndcg" if gain == "linear" else "ndcg_exp"
    report = MetricReport(name, k, num_empty=empty)
    for qid in keep:
        judged = qrels[qid]
        ideal = dcg(sorted(judged.values(), reverse=True), k, gain)
        got = [judged.get(d, 0) for d, _ in run.queries.get(qid, [])[:k]]
        report.per_query[qid] = dcg(got, k, gain) / ideal
    return report


def recall_at_k(run: RankedRun, qrels: Qrels, k: int = 20) -> MetricReport:
    if k < 1:
        raise ValueError(f"cutoff must be >= 1, got {k}")
    keep, empty = _eval_queries(run, qrels)
    report = MetricReport("recall", k, num_empty=empty)
    for qid in keep:
        relevant = {d for d, g in qrels[qid].items() if g > 0}
        top = {d for d, _ in run.queries.get(qid, [])[:k]}
        report.per_query[qid] = len(relevant & top) / len(relevant)
    return report


def evaluate(run: RankedRun, qrels: Qrels, metric: str = "ndcg", k: int = 20) -> MetricReport:
    if metric == "ndcg":
        return ndcg_at_k(run, qrels, k)
    if metric == "ndcg_exp":
        return ndcg_at_k(run, qrels, k, gain="exponential")
    if metric == "recall":
        return recall_at_k(run, qrels, k)
    raise ValueError(f"unknown metric {metric!r}")


def compare_table(reports: Sequence[tuple[str, MetricReport]]) -> str:
    """Aligned ``name  value`` rows in input order, values rounded to 3 decimals."""
    if not reports:
        return ""
    first = reports[0][1]
    for name, rep in reports:
        if (rep.metric, rep.cutoff) != (first.metric, first.cutoff):
            raise ValueError(
                f"report {name!r} is {rep.label}, expected {first.label}; tables need one metric"
            )
    header = first.label
    width = max(len(n) for n, _ in reports)
    lines = [f"{'':<{width}}  {header}"]
    lines += [f"{name:<{width}}  {rep.mean:.3f}" for name, rep in reports]
    return "\n".join(lines) + "\n"


def per_query_deltas(base: MetricReport, other: MetricReport) -> str:
    """TSV ``qid  base  other  delta`` over the union of evaluated queries."""
    qids = sorted(set(base.per_query) | set(other.per_query))
    rows = ["qid\tbase\tother\tdelta"]
    for q in qids:
        a, b = base.per_query.get(q, 0.0), other.per_query.get(q, 0.0)
        rows.append(f"{q}\t{a!r}\t{b!r}\t{(b - a)!r}")
    return "\n".join(rows) + "\n"


def format_per_query(report: MetricReport) -> str:
    rows = [f"{q}\t{v!r}" for q, v in report.per_query.items()]
    rows.append(f"all\t{report.mean!r}")
    return "\n".join(rows) + "\n"
