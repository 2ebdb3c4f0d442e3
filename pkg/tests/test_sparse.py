import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_vector, sparse_vectors
from sparsecascade.sparse import (
    CollectionStats,
    SparseVector,
    SparseVectorError,
    collection_stats,
    dot,
    scale,
    top_k_pool,
)

A, B, C = 1, 2, 3


def sv(**named):
    ids = {"a": A, "b": B, "c": C}
    return SparseVector.from_dict({ids[k]: v for k, v in named.items()})


class TestInvariants:
    def test_entries_sorted_on_from_dict(self):
        v = SparseVector.from_dict({7: 1.5, 3: 0.5})
        assert v.items() == [(3, 0.5), (7, 1.5)]
        assert v.nnz == len(v) == 2

    @pytest.mark.parametrize(
        "terms,weights",
        [((3, 1), (1.0, 1.0)), ((1, 1), (1.0, 2.0)), ((1,), (0.0,)), ((1,), (-2.0,)), ((-1,), (1.0,))],
    )
    def test_rejects_bad_entries(self, terms, weights):
        with pytest.raises(SparseVectorError):
            SparseVector(terms, weights)

    def test_rejects_nan(self):
        with pytest.raises(SparseVectorError):
            SparseVector((1,), (float("nan"),))


class TestTopKPool:
    def test_keeps_heaviest(self):
        assert top_k_pool(sv(a=3, b=2, c=1), 2) == sv(a=3, b=2)

    def test_identity_when_k_exceeds_nnz(self):
        assert top_k_pool(sv(a=3, b=2), 5) == sv(a=3, b=2)

    def test_weight_ties_keep_smaller_term(self):
        assert top_k_pool(sv(a=2, b=2, c=1), 1) == sv(a=2)

    def test_rejects_zero_k(self):
        with pytest.raises(ValueError):
            top_k_pool(sv(a=1), 0)

    @given(sparse_vectors(), st.integers(1, 20))
    def test_idempotent(self, v, k):
        once = top_k_pool(v, k)
        assert top_k_pool(once, k) == once

    @given(sparse_vectors(), st.integers(1, 20))
    def test_size(self, v, k):
        assert len(top_k_pool(v, k)) == min(k, len(v))

    @given(sparse_vectors(), sparse_vectors(), st.integers(1, 20))
    def test_pooling_never_raises_score(self, q, d, k):
        assert dot(top_k_pool(q, k), d) <= dot(q, d)


class TestDot:
    def test_single_shared_term(self):
        assert dot(sv(a=1, b=2), sv(b=3, c=4)) == 6

    def test_empty_query(self):
        assert dot(SparseVector(), sv(a=5)) == 0

    def test_matches_pairwise_loop_oracle(self):
        rng = random.Random(7)
        for _ in range(100):
            q = random_vector(rng, 60, rng.randint(0, 30))
            d = random_vector(rng, 60, rng.randint(0, 30))
            expected = 0.0
            for tq, wq in q.items():
                for td, wd in d.items():
                    if tq == td:
                        expected += wq * wd
            assert dot(q, d) == pytest.approx(expected, abs=1e-9)

    @given(sparse_vectors(), sparse_vectors())
    def test_symmetric(self, q, d):
        assert dot(q, d) == dot(d, q)

    @given(sparse_vectors(max_nnz=8), sparse_vectors(max_nnz=8), st.floats(0.01, 100))
    def test_scales_linearly(self, q, d, alpha):
        assert dot(scale(q, alpha), d) == pytest.approx(alpha * dot(q, d), rel=1e-12, abs=1e-300)


class TestCollectionStats:
    def test_arithmetic(self):
        s = collection_stats([sv(a=1), sv(a=1, b=1), sv(a=1, b=1, c=1)])
        assert s == CollectionStats(count=3, mean_l0=2.0, max_l0=3, total_postings=6)

    def test_empty_stream(self):
        assert collection_stats([]) == CollectionStats(0, 0.0, 0, 0)

    def test_matches_recount(self):
        rng = random.Random(3)
        vecs = [random_vector(rng, 500, rng.randint(0, 80)) for _ in range(1000)]
        s = collection_stats(iter(vecs))
        sizes = [len(v.as_dict()) for v in vecs]
        assert s.count == 1000
        assert s.total_postings == sum(sizes)
        assert s.max_l0 == max(sizes)
        assert s.mean_l0 == sum(sizes) / 1000
