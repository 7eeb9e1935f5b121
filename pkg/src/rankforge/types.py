"""Value types shared by every pipeline stage.

All types are immutable after construction. Scores are 32-bit floats and are
compared exactly; ties are always broken by ascending doc_id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DuplicateDocError


def _frozen_f32(values, ndim: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != ndim:
        raise ValueError(f"{what}: expected {ndim}-d values, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite entries")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _check_id(value: str, what: str) -> None:
    if not isinstance(value, str) or not value:
        raise ValueError(f"{what} must be a non-empty string")
    if any(ch.isspace() for ch in value):
        raise ValueError(f"{what} must not contain whitespace: {value!r}")


def as_score(value: float) -> float:
    """Round a score to float32 precision; scores never carry more."""
    out = float(np.float32(value))
    if not np.isfinite(out):
        raise ValueError(f"non-finite score: {value!r}")
    return out


@dataclass(frozen=True, slots=True)
class DocRecord:
    """One document: a whitespace-free id and its raw text."""

    doc_id: str
    text: str

    def __post_init__(self):
        _check_id(self.doc_id, "doc_id")


@dataclass(frozen=True, slots=True)
class QueryRecord:
    """One query: a whitespace-free id and its raw text."""

    query_id: str
    text: str

    def __post_init__(self):
        _check_id(self.query_id, "query_id")


@dataclass(frozen=True, eq=False)
class DenseEmbedding:
    """A single dense vector; `values` is a read-only float32 array."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_f32(self.values, 1, "DenseEmbedding"))
        if self.values.shape[0] < 1:
            raise ValueError("DenseEmbedding must have dim >= 1")

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, DenseEmbedding) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class MultiEmbedding:
    """One vector per token: a read-only (num_tokens, dim) float32 matrix."""

    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", _frozen_f32(self.vectors, 2, "MultiEmbedding"))
        if self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise ValueError("MultiEmbedding must have at least one token and dim >= 1")

    @property
    def num_tokens(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiEmbedding) and np.array_equal(self.vectors, other.vectors)


@dataclass(frozen=True, eq=False)
class SparseEmbedding:
    """Sparse term->weight vector.

    term_ids are strictly increasing int64, weights are strictly positive
    float32; zero weights are never stored.
    """

    term_ids: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ids = np.ascontiguousarray(np.asarray(self.term_ids, dtype=np.int64))
        wts = _frozen_f32(self.weights, 1, "SparseEmbedding")
        if ids.ndim != 1 or ids.shape[0] != wts.shape[0]:
            raise ValueError("term_ids and weights must be 1-d and of equal length")
        if ids.size:
            if np.any(ids < 0):
                raise ValueError("term_ids must be non-negative")
            if np.any(np.diff(ids) <= 0):
                raise ValueError("term_ids must be strictly increasing")
            if np.any(wts <= 0):
                raise ValueError("weights must be strictly positive")
        ids.flags.writeable = False
        object.__setattr__(self, "term_ids", ids)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float]) -> "SparseEmbedding":
        items = sorted((int(t), float(w)) for t, w in mapping.items() if np.float32(w) != 0)
        return cls(
            term_ids=np.array([t for t, _ in items], dtype=np.int64),
            weights=np.array([w for _, w in items], dtype=np.float32),
        )

    def to_mapping(self) -> dict[int, float]:
        return {int(t): float(w) for t, w in zip(self.term_ids, self.weights)}

    @property
    def nnz(self) -> int:
        return int(self.term_ids.shape[0])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseEmbedding)
            and np.array_equal(self.term_ids, other.term_ids)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True, slots=True)
class ScoredDoc:
    """A retrieved document with its float32 score and 1-based rank."""

    doc_id: str
    score: float
    rank: int

    def __post_init__(self):
        _check_id(self.doc_id, "doc_id")
        object.__setattr__(self, "score", as_score(self.score))
        if not isinstance(self.rank, int) or self.rank < 1:
            raise ValueError(f"rank must be a positive integer, got {self.rank!r}")


def rank_documents(scored: Iterable[tuple[str, float]]) -> tuple[ScoredDoc, ...]:
    """Order (doc_id, score) pairs by score descending, doc_id ascending.

    This is the one canonical tie rule; every ranked list in the package is
    produced by it or verified against it.
    """
    pairs = [(doc_id, as_score(score)) for doc_id, score in scored]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return tuple(ScoredDoc(d, s, i + 1) for i, (d, s) in enumerate(pairs))


def _validate_ranking(query_id: str, docs: Sequence[ScoredDoc]) -> tuple[ScoredDoc, ...]:
    seen: set[str] = set()
    for i, doc in enumerate(docs):
        if doc.rank != i + 1:
            raise ValueError(f"query {query_id!r}: rank {doc.rank} at position {i + 1}")
        if doc.doc_id in seen:
            raise DuplicateDocError(f"query {query_id!r}: duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        if i > 0:
            prev = docs[i - 1]
            if doc.score > prev.score:
                raise ValueError(f"query {query_id!r}: scores increase at rank {doc.rank}")
            if doc.score == prev.score and doc.doc_id < prev.doc_id:
                raise ValueError(
                    f"query {query_id!r}: tie between {prev.doc_id!r} and {doc.doc_id!r} "
                    "breaks doc_id order"
                )
    return tuple(docs)


@dataclass(frozen=True)
class Run:
    """Ranked results for a set of queries, tagged with the producing system.

    `rankings` preserves query insertion order; each ranking obeys the
    canonical tie rule and carries ranks 1..n.
    """

    tag: str
    rankings: Mapping[str, tuple[ScoredDoc, ...]]

    def __post_init__(self):
        _check_id(self.tag, "run tag")
        checked: dict[str, tuple[ScoredDoc, ...]] = {}
        for query_id, docs in self.rankings.items():
            _check_id(query_id, "query_id")
            checked[query_id] = _validate_ranking(query_id, tuple(docs))
        object.__setattr__(self, "rankings", checked)

    @classmethod
    def from_scores(
        cls, tag: str, scores: Mapping[str, Iterable[tuple[str, float]]]
    ) -> "Run":
        """Build a run from raw per-query scores, applying the tie rule."""
        return cls(tag, {qid: rank_documents(pairs) for qid, pairs in scores.items()})

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self.rankings.keys())

    def ranking(self, query_id: str) -> tuple[ScoredDoc, ...]:
        return self.rankings[query_id]

    def __len__(self) -> int:
        return len(self.rankings)


@dataclass(frozen=True)
class Qrels:
    """Relevance judgments: non-negative integer grades keyed (query, doc)."""

    grades: Mapping[tuple[str, str], int]
    _by_query: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        checked: dict[tuple[str, str], int] = {}
        by_query: dict[str, dict[str, int]] = {}
        for (query_id, doc_id), grade in self.grades.items():
            _check_id(query_id, "query_id")
            _check_id(doc_id, "doc_id")
            if not isinstance(grade, int) or isinstance(grade, bool) or grade < 0:
                raise ValueError(f"grade must be a non-negative integer, got {grade!r}")
            checked[(query_id, doc_id)] = grade
            by_query.setdefault(query_id, {})[doc_id] = grade
        object.__setattr__(self, "grades", checked)
        object.__setattr__(self, "_by_query", by_query)

    def grade(self, query_id: str, doc_id: str) -> int:
        """Grade of a pair; unjudged pairs are grade 0."""
        return self.grades.get((query_id, doc_id), 0)

    def query_grades(self, query_id: str) -> Mapping[str, int]:
        """All judged docs for a query (empty mapping if none)."""
        return self._by_query.get(query_id, {})

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self._by_query.keys())

    def __len__(self) -> int:
        return len(self.grades)


@dataclass(frozen=True)
class TrainSample:
    """One query with candidate docs and per-doc relevance labels.

    Labels need not be binary, but at least two must differ: a sample where
    every doc is labeled the same expresses no preference.
    """

    query: QueryRecord
    docs: tuple[DocRecord, ...]
    labels: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "docs", tuple(self.docs))
        object.__setattr__(self, "labels", tuple(float(x) for x in self.labels))
        if len(self.docs) < 2:
            raise ValueError("TrainSample needs at least two docs")
        if len(self.docs) != len(self.labels):
            raise ValueError("docs and labels must have equal length")
        if any(not np.isfinite(x) for x in self.labels):
            raise ValueError("labels must be finite")

    @property
    def has_preference(self) -> bool:
        return max(self.labels) > min(self.labels)
