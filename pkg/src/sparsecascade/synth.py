"""Seeded synthetic collections with planted relevance.

Each query owns a small set of topic terms. Its relevant documents carry a
grade-dependent share of those terms with boosted weights, hard
negatives carry up to three of them, and everything else is Zipfian
background. Every *view* re-encodes the same latent collection with its own
dropout and weight noise, standing in for two different sparse encoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sparse import SparseVector
from .store import Qrels, VectorRecord, write_qrels, write_vectors

NNZ_DISTRIBUTIONS = ("poisson", "uniform", "fixed")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    num_docs: int = 2000
    num_queries: int = 50
    vocab_size: int = 5000
    doc_nnz: int = 60
    query_nnz: int = 20
    nnz_dist: str = "poisson"
    planted_relevance: int = 5
    topic_terms: int = 10
    hard_negatives: int = 30
    views: tuple[str, ...] = ("a", "b")
    keep_prob: float = 0.85
    weight_noise: float = 0.35

    def __post_init__(self):
        for name in ("num_docs", "num_queries", "vocab_size", "doc_nnz", "query_nnz", "topic_terms"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.planted_relevance < 0 or self.hard_negatives < 0:
            raise ValueError("planted_relevance and hard_negatives must be >= 0")
        if self.nnz_dist not in NNZ_DISTRIBUTIONS:
            raise ValueError(f"nnz_dist must be one of {NNZ_DISTRIBUTIONS}")
        if not self.views:
            raise ValueError("need at least one view")
        if self.topic_terms > self.vocab_size:
            raise ValueError("topic_terms exceeds vocab_size")


@dataclass
class SynthCorpus:
    config: SynthConfig
    docs: dict[str, list[VectorRecord]] = field(default_factory=dict)
    queries: dict[str, list[VectorRecord]] = field(default_factory=dict)
    qrels: Qrels = field(default_factory=dict)

    def write(self, out_dir) -> dict[str, Path]:
        """Write ``docs.<view>.jsonl``, ``queries.<view>.jsonl`` and ``qrels.txt``."""
        out = Path(out_dir)
        paths = {}
        for view in self.config.views:
            paths[f"docs.{view}"] = out / f"docs.{view}.jsonl"
            paths[f"queries.{view}"] = out / f"queries.{view}.jsonl"
            write_vectors(self.docs[view], paths[f"docs.{view}"])
            write_vectors(self.queries[view], paths[f"queries.{view}"])
        paths["qrels"] = out / "qrels.txt"
        write_qrels(self.qrels, paths["qrels"])
        return paths


def _nnz(rng: np.random.Generator, mean: int, dist: str, cap: int) -> int:
    if dist == "poisson":
        n = int(rng.poisson(mean))
    elif dist == "uniform":
        n = int(rng.integers(1, 2 * mean + 1))
    else:
        n = mean
    return max(1, min(n, cap))


def _background(rng, cdf, n) -> dict[int, float]:
    terms = np.unique(np.searchsorted(cdf, rng.random(n), side="right"))
    weights = rng.lognormal(mean=-0.5, sigma=0.5, size=len(terms))
    return dict(zip(terms.tolist(), weights.tolist()))


def _add(vec: dict[int, float], term: int, weight: float) -> None:
    vec[term] = max(vec.get(term, 0.0), weight)


def _encode(rng, latent: dict[int, float], cdf, cfg: SynthConfig) -> SparseVector:
    """One view of a latent vector: dropout, multiplicative noise, a few stray terms."""
    out = {}
    for t, w in latent.items():
        if rng.random() < cfg.keep_prob:
            out[t] = w * float(rng.lognormal(0.0, cfg.weight_noise))
    extra = max(1, len(latent) // 10)
    for t, w in _background(rng, cdf, extra).items():
        _add(out, t, 0.5 * w)
    return SparseVector.from_dict({t: max(round(w, 4), 0.001) for t, w in out.items()})


def synth_corpus(cfg: SynthConfig = SynthConfig()) -> SynthCorpus:
    rng = np.random.default_rng(cfg.seed)
    ranks = rng.permutation(cfg.vocab_size)
    popularity = 1.0 / (ranks + 1.0) ** 0.8
    cdf = np.cumsum(popularity / popularity.sum())
    cdf[-1] = 1.0

    doc_ids = [f"d{i:06d}" for i in range(cfg.num_docs)]
    qids = [f"q{i:04d}" for i in range(cfg.num_queries)]

    docs = [
        _background(rng, cdf, _nnz(rng, cfg.doc_nnz, cfg.nnz_dist, cfg.vocab_size))
        for _ in doc_ids
    ]
    queries = []
    qrels: Qrels = {}
    n_rel = min(cfg.planted_relevance, cfg.num_docs)
    for qid in qids:
        topic = rng.choice(cfg.vocab_size, size=cfg.topic_terms, replace=False).tolist()
        query = {t: float(rng.uniform(0.5, 2.0)) for t in topic}
        n_noise = max(0, _nnz(rng, cfg.query_nnz, cfg.nnz_dist, cfg.vocab_size) - len(topic))
        if n_noise:
            for t, w in _background(rng, cdf, n_noise).items():
                _add(query, t, 0.3 * w)
        queries.append(query)

        picked = rng.choice(cfg.num_docs, size=min(n_rel + cfg.hard_negatives, cfg.num_docs), replace=False)
        relevant, negatives = picked[:n_rel].tolist(), picked[n_rel:].tolist()
        judged = {}
        for d in relevant:
            grade = int(rng.integers(1, 4))
            share = max(1, int(round(len(topic) * (0.2 + 0.2 * grade))))
            for t in rng.choice(topic, size=share, replace=False).tolist():
                _add(docs[d], t, (0.4 + 0.3 * grade) * float(rng.uniform(0.6, 1.4)))
            judged[doc_ids[d]] = grade
        for d in negatives:
            for t in rng.choice(topic, size=min(3, len(topic)), replace=False).tolist():
                _add(docs[d], t, float(rng.uniform(0.5, 1.8)))
        if judged:
            qrels[qid] = dict(sorted(judged.items()))

    corpus = SynthCorpus(cfg, qrels=qrels)
    for v, view in enumerate(cfg.views):
        vrng = np.random.default_rng([cfg.seed, v + 1])
        corpus.docs[view] = [
            VectorRecord(i, _encode(vrng, latent, cdf, cfg)) for i, latent in zip(doc_ids, docs)
        ]
        corpus.queries[view] = [
            VectorRecord(q, _encode(vrng, latent, cdf, cfg)) for q, latent in zip(qids, queries)
        ]
    return corpus
