"""Sparse vectors: the unit of every encoded query and document.

A vector is a strictly term-sorted sequence of (term id, weight) pairs with
positive weights. Dot products always accumulate in ascending term order so
that every scorer in the package produces bit-identical floats for the same
(query, document) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class SparseVectorError(ValueError):
    """Raised when entries violate the sorted / positive-weight invariants."""


@dataclass(frozen=True)
class SparseVector:
    terms: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    _lookup: dict[int, float] = field(
        default=None, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        terms = tuple(int(t) for t in self.terms)
        weights = tuple(float(w) for w in self.weights)
        if len(terms) != len(weights):
            raise SparseVectorError("terms and weights differ in length")
        prev = -1
        for t, w in zip(terms, weights):
            if t < 0:
                raise SparseVectorError(f"negative term id {t}")
            if t <= prev:
                raise SparseVectorError(
                    f"term ids must be strictly ascending (got {t} after {prev})"
                )
            if not (w > 0.0 and math.isfinite(w)):
                raise SparseVectorError(f"weight for term {t} must be positive, got {w!r}")
            prev = t
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_lookup", dict(zip(terms, weights)))

    @classmethod
    def from_dict(cls, entries: Mapping[int, float]) -> SparseVector:
        """Build from an unordered term -> weight mapping."""
        items = sorted((int(t), float(w)) for t, w in entries.items())
        return cls(tuple(t for t, _ in items), tuple(w for _, w in items))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> SparseVector:
        pairs = list(pairs)
        return cls(tuple(t for t, _ in pairs), tuple(w for _, w in pairs))

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def nnz(self) -> int:
        return len(self.terms)

    def items(self) -> list[tuple[int, float]]:
        return list(zip(self.terms, self.weights))

    def get(self, term: int, default: float = 0.0) -> float:
        return self._lookup.get(term, default)

    def as_dict(self) -> dict[int, float]:
        return dict(self._lookup)


def top_k_pool(v: SparseVector, k: int) -> SparseVector:
    """Keep the ``k`` heaviest entries; weight ties go to the smaller term id."""
    if k < 1:
        raise ValueError(f"pool size must be >= 1, got {k}")
    if len(v) <= k:
        return v
    kept = sorted(zip(v.terms, v.weights), key=lambda tw: (-tw[1], tw[0]))[:k]
    kept.sort()
    return SparseVector.from_pairs(kept)


def dot(q: SparseVector, d: SparseVector) -> float:
    """Inner product over shared terms, summed in ascending term order."""
    if len(q) > len(d):
        q, d = d, q
    lookup = d._lookup
    s = 0.0
    for t, w in zip(q.terms, q.weights):
        x = lookup.get(t)
        if x is not None:
            s += w * x
    return s


def scale(v: SparseVector, alpha: float) -> SparseVector:
    if alpha <= 0:
        raise ValueError("scale factor must be positive")
    return SparseVector(v.terms, tuple(alpha * w for w in v.weights))


@dataclass(frozen=True)
class CollectionStats:
    count: int
    mean_l0: float
    max_l0: int
    total_postings: int


def collection_stats(vectors: Iterable[SparseVector]) -> CollectionStats:
    """Single-pass l0 statistics; an empty stream reports ``mean_l0 = 0``."""
    count = total = biggest = 0
    for v in vectors:
        n = len(v)
        count += 1
        total += n
        biggest = max(biggest, n)
    mean = total / count if count else 0.0
    return CollectionStats(count=count, mean_l0=mean, max_l0=biggest, total_postings=total)
