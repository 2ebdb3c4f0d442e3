"""Text file formats: JSONL vectors, TREC runs, TREC qrels.

Every writer emits canonical bytes (floats in shortest round-trip form, term
ids ascending) so canonical files survive read -> write unchanged.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .sparse import SparseVector, SparseVectorError

Qrels = dict[str, dict[str, int]]


class FormatError(ValueError):
    """Malformed input file; carries the offending path and 1-based line."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class RunNormalizationWarning(UserWarning):
    pass


class RunInvariantError(ValueError):
    pass


class VectorRecord(NamedTuple):
    id: str
    vector: SparseVector


def check_doc_id(doc_id: str) -> str:
    if not isinstance(doc_id, str) or not doc_id or any(c.isspace() for c in doc_id):
        raise ValueError(f"invalid doc id {doc_id!r}: must be non-empty with no whitespace")
    return doc_id


def sort_key(item: tuple[str, float]) -> tuple[float, str]:
    """(score desc, doc id asc); str order equals UTF-8 byte order."""
    return (-item[1], item[0])


@dataclass
class RankedRun:
    """Per-query ranked lists of (doc id, score); dict order is write order."""

    tag: str
    queries: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    @classmethod
    def from_scores(cls, tag: str, scores: dict[str, dict[str, float]]) -> RankedRun:
        return cls(tag, {q: sorted(d.items(), key=sort_key) for q, d in scores.items()})

    def __len__(self) -> int:
        return len(self.queries)

    def __getitem__(self, qid: str) -> list[tuple[str, float]]:
        return self.queries[qid]

    def __contains__(self, qid: object) -> bool:
        return qid in self.queries

    def docs(self, qid: str) -> list[str]:
        return [d for d, _ in self.queries.get(qid, [])]

    def validate(self) -> None:
        """Raise RunInvariantError unless every list is sorted and duplicate-free."""
        if any(self.queries.values()) and (not self.tag or any(c.isspace() for c in self.tag)):
            raise RunInvariantError(f"run tag {self.tag!r} must be non-empty with no whitespace")
        for qid, hits in self.queries.items():
            check_doc_id(qid)
            seen = set()
            for i, (doc, score) in enumerate(hits):
                check_doc_id(doc)
                if doc in seen:
                    raise RunInvariantError(f"query {qid}: duplicate doc {doc}")
                seen.add(doc)
                if not math.isfinite(score):
                    raise RunInvariantError(f"query {qid}: non-finite score for {doc}")
                if i and sort_key(hits[i - 1]) >= sort_key((doc, score)):
                    raise RunInvariantError(
                        f"query {qid}: rank {i + 1} ({doc}) breaks (score desc, doc asc) order"
                    )


def atomic_write_bytes(path, data: bytes) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# -- vectors -----------------------------------------------------------------


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def parse_vector_line(line: str) -> VectorRecord:
    obj = json.loads(line, object_pairs_hook=_no_duplicate_keys)
    if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
        raise ValueError('expected an object with "id" and "vector"')
    doc_id = check_doc_id(obj["id"])
    raw = obj["vector"]
    if not isinstance(raw, dict):
        raise ValueError('"vector" must be an object of term -> weight')
    entries: dict[int, float] = {}
    for key, w in raw.items():
        if not (key.isascii() and key.isdigit()):
            raise ValueError(f"term id {key!r} is not a non-negative integer")
        term = int(key)
        if term in entries:
            raise ValueError(f"duplicate term id {term}")
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise ValueError(f"weight for term {key} is not a number")
        if not (w > 0 and math.isfinite(w)):
            raise ValueError(f"weight for term {key} must be positive, got {w!r}")
        entries[term] = float(w)
    return VectorRecord(doc_id, SparseVector.from_dict(entries))


def format_vector_line(record: VectorRecord) -> str:
    vec = {str(t): w for t, w in zip(record.vector.terms, record.vector.weights)}
    return json.dumps({"id": record.id, "vector": vec}, separators=(",", ":"))


def read_vectors(path) -> Iterator[VectorRecord]:
    """Stream records in file order; blank lines are skipped."""
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = parse_vector_line(line)
            except (ValueError, SparseVectorError) as exc:
                raise FormatError(path, lineno, str(exc)) from None
            if rec.id in seen:
                raise FormatError(path, lineno, f"duplicate id {rec.id!r}")
            seen.add(rec.id)
            yield rec


def write_vectors(records: Iterable[VectorRecord], path) -> None:
    atomic_write_text(path, "".join(format_vector_line(r) + "\n" for r in records))


# -- runs --------------------------------------------------------------------


def format_run(run: RankedRun) -> str:
    lines = []
    for qid, hits in run.queries.items():
        for rank, (doc, score) in enumerate(hits, 1):
            lines.append(f"{qid} Q0 {doc} {rank} {score!r} {run.tag}\n")
    return "".join(lines)


def write_run(run: RankedRun, path) -> None:
    """TREC six-column format: ``qid Q0 docid rank score tag``."""
    run.validate()
    atomic_write_text(path, format_run(run))


def read_run(path, tag: str | None = None) -> RankedRun:
    """Parse a TREC run; lists are re-sorted by (score desc, doc asc) if needed.

    A RunNormalizationWarning is issued when the file's ranks disagree with
    that order.
    """
    grouped: dict[str, list[tuple[int, str, float]]] = {}
    seen: set[tuple[str, str]] = set()
    file_tag = None
    mixed_tags = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise FormatError(path, lineno, f"expected 6 columns, got {len(parts)}")
            qid, _, doc, rank_s, score_s, line_tag = parts
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError:
                raise FormatError(path, lineno, "rank must be an integer and score a number") from None
            if not math.isfinite(score):
                raise FormatError(path, lineno, f"non-finite score {score_s}")
            if (qid, doc) in seen:
                raise FormatError(path, lineno, f"duplicate entry for query {qid}, doc {doc}")
            seen.add((qid, doc))
            if file_tag is None:
                file_tag = line_tag
            elif line_tag != file_tag and not mixed_tags:
                mixed_tags = True
                warnings.warn(
                    f"{path}:{lineno}: mixed run tags ({file_tag!r}, {line_tag!r}); keeping the first",
                    RunNormalizationWarning,
                    stacklevel=2,
                )
            grouped.setdefault(qid, []).append((rank, doc, score))

    queries: dict[str, list[tuple[str, float]]] = {}
    renumbered = []
    for qid, rows in grouped.items():
        hits = sorted(((doc, score) for _, doc, score in rows), key=sort_key)
        file_order = [doc for _, doc, _ in sorted(rows, key=lambda r: r[0])]
        ranks = sorted(r for r, _, _ in rows)
        if file_order != [d for d, _ in hits] or ranks != list(range(1, len(rows) + 1)):
            renumbered.append(qid)
        queries[qid] = hits
    if renumbered:
        warnings.warn(
            f"{path}: re-ranked {len(renumbered)} queries whose ranks disagreed with "
            f"(score desc, doc asc) order, e.g. {renumbered[0]}",
            RunNormalizationWarning,
            stacklevel=2,
        )
    return RankedRun(tag if tag is not None else (file_tag or ""), queries)


# -- qrels -------------------------------------------------------------------


def read_qrels(path) -> Qrels:
    """Four-column ``qid 0 docid grade``; grades are non-negative integers."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise FormatError(path, lineno, f"expected 4 columns, got {len(parts)}")
            qid, _, doc, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError:
                raise FormatError(path, lineno, f"grade {grade_s!r} is not an integer") from None
            if grade < 0:
                raise FormatError(path, lineno, f"negative grade {grade}")
            judged = qrels.setdefault(qid, {})
            if doc in judged:
                raise FormatError(path, lineno, f"duplicate judgment for query {qid}, doc {doc}")
            judged[doc] = grade
    return qrels


def format_qrels(qrels: Qrels) -> str:
    return "".join(
        f"{qid} 0 {doc} {grade}\n" for qid, judged in qrels.items() for doc, grade in judged.items()
    )


def write_qrels(qrels: Qrels, path) -> None:
    atomic_write_text(path, format_qrels(qrels))
