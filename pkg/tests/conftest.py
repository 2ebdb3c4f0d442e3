import random

import numpy as np
import pytest
from hypothesis import strategies as st

from sparsecascade.sparse import SparseVector
from sparsecascade.store import RankedRun


def random_vector(rng: random.Random, vocab: int, nnz: int, discrete: bool = False) -> SparseVector:
    terms = rng.sample(range(vocab), min(nnz, vocab))
    if discrete:
        # coarse weights make exact score ties common
        entries = {t: rng.choice((0.5, 1.0, 1.5, 2.0)) for t in terms}
    else:
        entries = {t: rng.uniform(0.01, 3.0) for t in terms}
    return SparseVector.from_dict(entries)


def random_collection(rng, num_docs, vocab, mean_nnz, discrete=False, prefix="d"):
    width = len(str(num_docs))
    return [
        (f"{prefix}{i:0{width}d}", random_vector(rng, vocab, rng.randint(1, 2 * mean_nnz), discrete))
        for i in range(num_docs)
    ]


def brute_force_topk(docs, q: SparseVector, k: int) -> list[tuple[str, float]]:
    """All-pairs oracle: plain dict lookups, ascending query-term order."""
    q_items = sorted(zip(q.terms, q.weights))
    scored = []
    for doc_id, d in docs:
        table = dict(zip(d.terms, d.weights))
        s, hit = 0.0, False
        for t, w in q_items:
            if t in table:
                s += w * table[t]
                hit = True
        if hit:
            scored.append((doc_id, s))
    scored.sort(key=lambda x: (-x[1], x[0]))
    return scored[:k]


class DenseOracle:
    """Brute-force scorer over a dense doc x term matrix.

    Sums one query term at a time in ascending term order, which yields the
    same floats as a sequential scalar loop, vectorised over documents.
    """

    def __init__(self, docs, vocab: int):
        self.ids = np.array([d for d, _ in docs])
        self.matrix = np.zeros((len(docs), vocab))
        for row, (_, v) in enumerate(docs):
            self.matrix[row, list(v.terms)] = v.weights
        # positions in byte order of doc ids for tie-breaking
        self.id_rank = np.argsort(np.argsort(self.ids, kind="stable"), kind="stable")

    def topk(self, q: SparseVector, k: int) -> list[tuple[str, float]]:
        terms = [t for t in q.terms if t < self.matrix.shape[1]]
        if not terms:
            return []
        cols = self.matrix[:, terms]
        weights = np.array([q.get(t) for t in terms])
        s = np.zeros(len(self.ids))
        for j in range(len(terms)):
            s = s + cols[:, j] * weights[j]
        hit = np.flatnonzero((cols > 0).any(axis=1))
        order = hit[np.lexsort((self.id_rank[hit], -s[hit]))][:k]
        return [(str(self.ids[i]), float(s[i])) for i in order]


# -- hypothesis strategies ----------------------------------------------------

doc_ids = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_-.:", min_size=1, max_size=8)
weights = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def sparse_vectors(draw, max_term=200, max_nnz=15):
    entries = draw(st.dictionaries(st.integers(0, max_term), weights, max_size=max_nnz))
    return SparseVector.from_dict(entries)


@st.composite
def ranked_runs(draw, max_queries=4, max_docs=12, tag="run"):
    qids = draw(st.lists(doc_ids, min_size=0, max_size=max_queries, unique=True))
    queries = {}
    for qid in qids:
        docs = draw(st.lists(doc_ids, min_size=1, max_size=max_docs, unique=True))
        scores = draw(
            st.lists(
                st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
                min_size=len(docs),
                max_size=len(docs),
            )
        )
        queries[qid] = sorted(zip(docs, scores), key=lambda x: (-x[1], x[0]))
    return RankedRun(tag, queries)


def random_run(rng: random.Random, qids, pool, depth, tag="r") -> RankedRun:
    queries = {}
    for q in qids:
        docs = rng.sample(pool, min(depth, len(pool)))
        queries[q] = [(d, float(len(docs) - i)) for i, d in enumerate(docs)]
    return RankedRun(tag, queries)


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """A small synthetic corpus on disk, shared by pipeline and CLI tests."""
    from sparsecascade.synth import SynthConfig, synth_corpus

    out = tmp_path_factory.mktemp("corpus")
    synth_corpus(SynthConfig(seed=11, num_docs=400, num_queries=20, vocab_size=1500)).write(out)
    return out


# -- acceptance reporting -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
