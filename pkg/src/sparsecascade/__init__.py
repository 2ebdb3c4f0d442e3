"""Learned-sparse-retrieval index, rank fusion and rerank cascades."""

__version__ = "0.1.0"
