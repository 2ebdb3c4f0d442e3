"""Impact-ordered inverted index with exact and approximate top-k search.

Exact search is term-at-a-time with a MaxScore-style early stop: terms are
visited by decreasing upper bound, and once the remaining terms cannot lift an
unseen document past the current k-th partial score, the rest are skipped and
the surviving candidates are rescored against the forward store.

Approximate search keeps Seismic's static-pruning idea without its clustering:
each query term walks only the top ``ceil(alpha * len)`` postings in blocks of
``beta``, and a block is skipped once its max impact (plus the best the other
terms could add) falls below ``gamma`` times the running threshold. Every
candidate that is visited gets its true dot product, so only the candidate set
is approximate.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .sparse import CollectionStats, SparseVector, collection_stats, dot, top_k_pool
from .store import RankedRun, VectorRecord, check_doc_id

# Relative slack on upper bounds; covers summation-order rounding differences.
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class PostingList:
    term: int
    docs: tuple[int, ...]
    impacts: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def max_impact(self) -> float:
        return self.impacts[0] if self.impacts else 0.0

    def blocks(self, block_size: int) -> list[tuple[int, float]]:
        """(start offset, block max impact) per block of ``block_size`` postings."""
        return [(s, self.impacts[s]) for s in range(0, len(self.impacts), block_size)]


@dataclass(frozen=True)
class ApproxConfig:
    alpha: float = 0.5
    beta: int = 64
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")


@dataclass
class SearchResult:
    hits: list[tuple[str, float]]
    exhaustive: bool
    candidates_scored: int = 0
    terms_skipped: int = 0  # query terms never accumulated thanks to the score bound


class DuplicateDocError(ValueError):
    pass


class InvertedIndex:
    """Immutable after construction; safe for concurrent searches."""

    def __init__(
        self,
        doc_ids: Sequence[str],
        forward: Sequence[SparseVector],
        postings: dict[int, PostingList],
        doc_pool: int | None = None,
    ):
        if len(doc_ids) != len(forward):
            raise ValueError("doc table and forward store differ in length")
        self.doc_ids = list(doc_ids)
        self.forward = list(forward)
        self.postings = dict(postings)
        self.doc_pool = doc_pool
        # rank of each ordinal in doc-id order, used for tie-breaking without string compares
        order = sorted(range(len(self.doc_ids)), key=self.doc_ids.__getitem__)
        self._id_rank = [0] * len(order)
        for r, ordinal in enumerate(order):
            self._id_rank[ordinal] = r

    @property
    def num_docs(self) -> int:
        return len(self.doc_ids)

    def stats(self) -> CollectionStats:
        return collection_stats(self.forward)

    def __repr__(self) -> str:
        return (
            f"InvertedIndex(num_docs={self.num_docs}, terms={len(self.postings)}, "
            f"doc_pool={self.doc_pool})"
        )


def build_index(records: Iterable[VectorRecord | tuple[str, SparseVector]], doc_pool: int | None = None) -> InvertedIndex:
    """Index a stream of records, optionally Top-K pooling every document first."""
    if doc_pool is not None and doc_pool < 1:
        raise ValueError(f"doc_pool must be >= 1, got {doc_pool}")
    doc_ids: list[str] = []
    forward: list[SparseVector] = []
    seen: set[str] = set()
    lists: dict[int, list[tuple[float, int]]] = {}
    for doc_id, vec in records:
        check_doc_id(doc_id)
        if doc_id in seen:
            raise DuplicateDocError(f"duplicate doc id {doc_id!r}")
        seen.add(doc_id)
        if doc_pool is not None:
            vec = top_k_pool(vec, doc_pool)
        ordinal = len(doc_ids)
        doc_ids.append(doc_id)
        forward.append(vec)
        for t, w in zip(vec.terms, vec.weights):
            lists.setdefault(t, []).append((-w, ordinal))
    postings = {}
    for t in sorted(lists):
        entries = sorted(lists[t])
        postings[t] = PostingList(
            t, tuple(o for _, o in entries), tuple(-negw for negw, _ in entries)
        )
    return InvertedIndex(doc_ids, forward, postings, doc_pool)


def _query_terms(index: InvertedIndex, q: SparseVector) -> list[tuple[int, float, PostingList]]:
    """Indexed query terms ordered by decreasing upper bound (ties: term id)."""
    found = [(t, w, index.postings[t]) for t, w in zip(q.terms, q.weights) if t in index.postings]
    found.sort(key=lambda x: (-(x[1] * x[2].max_impact), x[0]))
    return found


def _select(index: InvertedIndex, scored: Iterable[tuple[int, float]], k: int) -> list[tuple[str, float]]:
    rank = index._id_rank
    best = heapq.nsmallest(k, scored, key=lambda os_: (-os_[1], rank[os_[0]]))
    return [(index.doc_ids[o], s) for o, s in best]


def search_exact(
    index: InvertedIndex,
    q: SparseVector,
    k: int,
    query_pool: int | None = None,
    prune: bool = True,
) -> SearchResult:
    """Exact top-k by dot product with (score desc, doc id asc) ordering.

    ``prune=False`` accumulates every term in ascending term order, which
    reproduces ``dot`` bit for bit without any rescoring.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if query_pool is not None:
        q = top_k_pool(q, query_pool)
    terms = _query_terms(index, q)
    if not terms:
        return SearchResult([], exhaustive=True)

    acc: dict[int, float] = {}
    if not prune:
        for t, w, pl in sorted(terms, key=lambda x: x[0]):
            for d, x in zip(pl.docs, pl.impacts):
                acc[d] = acc.get(d, 0.0) + w * x
        return SearchResult(_select(index, acc.items(), k), exhaustive=True, candidates_scored=len(acc))

    bounds = [w * pl.max_impact for _, w, pl in terms]
    remaining = [0.0] * (len(terms) + 1)
    for i in range(len(terms) - 1, -1, -1):
        remaining[i] = remaining[i + 1] + bounds[i]

    stop = len(terms)
    theta = 0.0
    for i, (_, w, pl) in enumerate(terms):
        if len(acc) >= k:
            theta = heapq.nlargest(k, acc.values())[-1]
            if remaining[i] * (1 + BOUND_SLACK) < theta * (1 - BOUND_SLACK):
                stop = i
                break
        for d, x in zip(pl.docs, pl.impacts):
            acc[d] = acc.get(d, 0.0) + w * x
    if len(acc) >= k:
        theta = heapq.nlargest(k, acc.values())[-1]
    rest = remaining[stop]
    floor = theta * (1 - BOUND_SLACK)
    fwd = index.forward
    rescored = [
        (d, dot(q, fwd[d])) for d, a in acc.items() if (a + rest) * (1 + BOUND_SLACK) >= floor
    ]
    return SearchResult(
        _select(index, rescored, k),
        exhaustive=True,
        candidates_scored=len(rescored),
        terms_skipped=len(terms) - stop,
    )


def search_approx(
    index: InvertedIndex,
    q: SparseVector,
    k: int,
    config: ApproxConfig = ApproxConfig(),
    query_pool: int | None = None,
) -> SearchResult:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if query_pool is not None:
        q = top_k_pool(q, query_pool)
    terms = _query_terms(index, q)
    if not terms:
        return SearchResult([], exhaustive=False)

    # best contribution a not-yet-visited document can still get from each term
    residual = [w * pl.max_impact for _, w, pl in terms]
    rank = index._id_rank
    fwd = index.forward
    heap: list[tuple[float, int, int]] = []  # (score, -id rank, ordinal); root is the current k-th
    visited: set[int] = set()
    beta, gamma = config.beta, config.gamma

    for i, (_, w, pl) in enumerate(terms):
        cut = math.ceil(config.alpha * len(pl))
        others = sum(residual) - residual[i]
        pos = 0
        while pos < cut:
            if len(heap) == k:
                bound = (w * pl.impacts[pos] + others) * (1 + BOUND_SLACK)
                if bound < gamma * heap[0][0]:
                    break
            end = min(pos + beta, cut)
            for d in pl.docs[pos:end]:
                if d in visited:
                    continue
                visited.add(d)
                item = (dot(q, fwd[d]), -rank[d], d)
                if len(heap) < k:
                    heapq.heappush(heap, item)
                elif item > heap[0]:
                    heapq.heapreplace(heap, item)
            pos = end
        residual[i] = w * pl.impacts[pos] if pos < len(pl) else 0.0

    hits = [(index.doc_ids[d], s) for s, _, d in sorted(heap, reverse=True)]
    return SearchResult(hits, exhaustive=False, candidates_scored=len(visited))


def search_batch(
    index: InvertedIndex,
    queries: Sequence[tuple[str, SparseVector]],
    k: int,
    tag: str,
    query_pool: int | None = None,
    approx: ApproxConfig | None = None,
    threads: int = 1,
) -> RankedRun:
    """Search every (qid, vector) and collect a run in query order."""

    def one(qv):
        qid, vec = qv
        if approx is None:
            return qid, search_exact(index, vec, k, query_pool=query_pool)
        return qid, search_approx(index, vec, k, approx, query_pool=query_pool)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, queries))
    else:
        results = [one(qv) for qv in queries]
    return RankedRun(tag, {qid: res.hits for qid, res in results})


@dataclass
class RecallReport:
    per_query: dict[str, float] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return sum(self.per_query.values()) / len(self.per_query) if self.per_query else 0.0


def recall_vs_exact(
    index: InvertedIndex,
    queries: Sequence[tuple[str, SparseVector]],
    k: int,
    config: ApproxConfig,
    query_pool: int | None = None,
) -> RecallReport:
    """Overlap of approximate and exact top-k, relative to the exact list's length.

    The exact list holds min(k, matching docs) entries, so k beyond the
    collection size is handled naturally; a query matching nothing scores 1.
    """
    report = RecallReport()
    for qid, vec in queries:
        exact = {d for d, _ in search_exact(index, vec, k, query_pool=query_pool).hits}
        approx = {d for d, _ in search_approx(index, vec, k, config, query_pool=query_pool).hits}
        report.per_query[qid] = len(exact & approx) / len(exact) if exact else 1.0
    return report
