"""Binary index files.

Layout (little endian)::

    magic      8 bytes  b"SPCIDX\\x00\\x01"
    version    u32
    doc_pool   u64      (0 = unpooled)
    num_docs   u64
    per doc:   u32 id length, id bytes (utf-8), u32 nnz, nnz x u64 terms, nnz x f64 weights
    num_terms  u64
    per term:  u64 term, u64 length, length x u32 ordinals, length x f64 impacts
    sha256     32 bytes over everything above

The file is parsed only after the checksum verifies, so a damaged file never
yields a partially loaded index.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .index import InvertedIndex, PostingList
from .sparse import SparseVector
from .store import atomic_write_bytes

MAGIC = b"SPCIDX\x00\x01"
VERSION = 1
_DIGEST = 32


class IndexFileError(ValueError):
    pass


class IndexVersionError(IndexFileError):
    pass


class IndexChecksumError(IndexFileError):
    pass


def index_to_bytes(index: InvertedIndex) -> bytes:
    parts = [MAGIC, struct.pack("<IQQ", VERSION, index.doc_pool or 0, index.num_docs)]
    for doc_id, vec in zip(index.doc_ids, index.forward):
        raw = doc_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", len(vec)))
        parts.append(np.asarray(vec.terms, dtype="<u8").tobytes())
        parts.append(np.asarray(vec.weights, dtype="<f8").tobytes())
    parts.append(struct.pack("<Q", len(index.postings)))
    for term in sorted(index.postings):
        pl = index.postings[term]
        parts.append(struct.pack("<QQ", term, len(pl)))
        parts.append(np.asarray(pl.docs, dtype="<u4").tobytes())
        parts.append(np.asarray(pl.impacts, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, buf: bytes, pos: int):
        self.buf = buf
        self.pos = pos

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise IndexFileError("unexpected end of index payload")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def array(self, dtype: str, n: int) -> list:
        size = np.dtype(dtype).itemsize * n
        if self.pos + size > len(self.buf):
            raise IndexFileError("unexpected end of index payload")
        out = np.frombuffer(self.buf, dtype=dtype, count=n, offset=self.pos).tolist()
        self.pos += size
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise IndexFileError("unexpected end of index payload")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out


def index_from_bytes(data: bytes) -> InvertedIndex:
    if len(data) >= len(MAGIC) and data[: len(MAGIC)] != MAGIC:
        raise IndexVersionError("not an index file (bad magic bytes)")
    header = len(MAGIC) + 4
    if len(data) < header + _DIGEST:
        raise IndexChecksumError("index file is truncated")
    (version,) = struct.unpack_from("<I", data, len(MAGIC))
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise IndexChecksumError("index checksum mismatch (truncated or corrupted file)")
    if version != VERSION:
        raise IndexVersionError(f"unsupported index format version {version} (expected {VERSION})")

    r = _Reader(body, header)
    doc_pool, num_docs = r.unpack("<QQ")
    doc_ids, forward = [], []
    for _ in range(num_docs):
        (n,) = r.unpack("<I")
        doc_ids.append(r.raw(n).decode("utf-8"))
        (nnz,) = r.unpack("<I")
        forward.append(SparseVector(tuple(r.array("<u8", nnz)), tuple(r.array("<f8", nnz))))
    (num_terms,) = r.unpack("<Q")
    postings = {}
    for _ in range(num_terms):
        term, n = r.unpack("<QQ")
        docs = r.array("<u4", n)
        if docs and max(docs) >= num_docs:
            raise IndexFileError(f"posting list {term} references an unknown document")
        postings[term] = PostingList(term, tuple(docs), tuple(r.array("<f8", n)))
    if r.pos != len(body):
        raise IndexFileError("trailing bytes after index payload")
    return InvertedIndex(doc_ids, forward, postings, doc_pool or None)


def save_index(index: InvertedIndex, path) -> None:
    atomic_write_bytes(path, index_to_bytes(index))


def load_index(path) -> InvertedIndex:
    with open(path, "rb") as fh:
        return index_from_bytes(fh.read())
