"""Document indexes for the three embedding kinds, with disk persistence.

An index directory holds `meta.txt` (ordered key: value lines), `docids.txt`
(one doc_id per line, position = internal doc index), and `payload.bin`
(sectioned little-endian arrays). Building and saving are deterministic:
the same corpus and model produce byte-identical directories.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .binio import read_array_file, read_kv_file, write_array_file, write_kv_file
from .encoders import OutputKind, SimilarityFunction
from .errors import CorruptIndexError, DuplicateDocError, EmptyCorpusError, EmptyTextError
from .models import BiEncoder
from .types import DocRecord, MultiEmbedding, SparseEmbedding

_MAGIC = b"IDXP0001"
_FORMAT_VERSION = "1"

META_FILE = "meta.txt"
DOCIDS_FILE = "docids.txt"
PAYLOAD_FILE = "payload.bin"


def _check_doc_ids(doc_ids: tuple[str, ...]) -> None:
    if not doc_ids:
        raise ValueError("index must contain at least one doc")
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("doc_ids must be unique")
    for doc_id in doc_ids:
        if not doc_id or any(ch.isspace() for ch in doc_id):
            raise ValueError(f"invalid doc_id {doc_id!r}")


@dataclass(frozen=True, eq=False)
class DenseFlatIndex:
    """All single-vector embeddings in one (n, dim) float32 matrix."""

    doc_ids: tuple[str, ...]
    matrix: np.ndarray
    similarity: SimilarityFunction

    kind = "dense"

    def __post_init__(self):
        _check_doc_ids(self.doc_ids)
        object.__setattr__(self, "similarity", SimilarityFunction(self.similarity))
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float32))
        if m.ndim != 2 or m.shape[0] != len(self.doc_ids) or m.shape[1] < 1:
            raise ValueError(f"matrix shape {m.shape} does not match {len(self.doc_ids)} docs")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.doc_ids)


@dataclass(frozen=True, eq=False)
class SparseInvertedIndex:
    """CSR-style postings over terms: term t owns doc_indices[indptr[t]:indptr[t+1]].

    Postings are sorted by ascending doc index and weights are strictly
    positive, so document-at-a-time traversal visits each doc's terms in
    ascending term order.
    """

    doc_ids: tuple[str, ...]
    vocab_size: int
    indptr: np.ndarray
    doc_indices: np.ndarray
    weights: np.ndarray

    kind = "sparse"
    similarity = SimilarityFunction.DOT

    def __post_init__(self):
        _check_doc_ids(self.doc_ids)
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        indptr = np.ascontiguousarray(np.asarray(self.indptr, dtype=np.uint64))
        docidx = np.ascontiguousarray(np.asarray(self.doc_indices, dtype=np.uint32))
        weights = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float32))
        if indptr.ndim != 1 or indptr.shape[0] != self.vocab_size + 1:
            raise ValueError("indptr must have vocab_size + 1 entries")
        if indptr[0] != 0 or np.any(np.diff(indptr.astype(np.int64)) < 0):
            raise ValueError("indptr must start at 0 and be non-decreasing")
        nnz = int(indptr[-1])
        if docidx.shape != (nnz,) or weights.shape != (nnz,):
            raise ValueError("postings arrays must match indptr[-1]")
        if nnz:
            if int(docidx.max()) >= len(self.doc_ids):
                raise ValueError("posting doc index out of range")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("posting weights must be finite and positive")
        for t in range(self.vocab_size):
            lo, hi = int(indptr[t]), int(indptr[t + 1])
            if hi - lo > 1 and np.any(np.diff(docidx[lo:hi].astype(np.int64)) <= 0):
                raise ValueError(f"postings for term {t} are not strictly increasing")
        for name, arr in (("indptr", indptr), ("doc_indices", docidx), ("weights", weights)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def postings(self, term_id: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = int(self.indptr[term_id]), int(self.indptr[term_id + 1])
        return self.doc_indices[lo:hi], self.weights[lo:hi]

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def __len__(self) -> int:
        return len(self.doc_ids)


@dataclass(frozen=True, eq=False)
class MultiVectorIndex:
    """Token vectors of all docs stacked into one (total, dim) matrix.

    offsets[i] = (start, length) locates doc i's rows; docs are stored
    contiguously in corpus order.
    """

    doc_ids: tuple[str, ...]
    vectors: np.ndarray
    offsets: np.ndarray
    similarity: SimilarityFunction

    kind = "multi"

    def __post_init__(self):
        _check_doc_ids(self.doc_ids)
        object.__setattr__(self, "similarity", SimilarityFunction(self.similarity))
        vec = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float32))
        off = np.ascontiguousarray(np.asarray(self.offsets, dtype=np.uint64))
        if vec.ndim != 2 or vec.shape[1] < 1 or not np.all(np.isfinite(vec)):
            raise ValueError("vectors must be a finite (total, dim) matrix")
        if off.shape != (len(self.doc_ids), 2):
            raise ValueError("offsets must be (num_docs, 2)")
        expected_start = 0
        for i in range(off.shape[0]):
            start, length = int(off[i, 0]), int(off[i, 1])
            if start != expected_start or length < 1:
                raise ValueError(f"doc {i}: offsets must be contiguous with length >= 1")
            expected_start = start + length
        if expected_start != vec.shape[0]:
            raise ValueError("offsets do not cover the vector matrix")
        vec.flags.writeable = False
        off.flags.writeable = False
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "offsets", off)

    def doc_vectors(self, doc_index: int) -> np.ndarray:
        start, length = int(self.offsets[doc_index, 0]), int(self.offsets[doc_index, 1])
        return self.vectors[start : start + length]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def total_vectors(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return len(self.doc_ids)


Index = Union[DenseFlatIndex, SparseInvertedIndex, MultiVectorIndex]

_KIND_BY_OUTPUT = {
    OutputKind.SINGLE_VECTOR: "dense",
    OutputKind.SPARSE: "sparse",
    OutputKind.MULTI_VECTOR: "multi",
}


def index_kind_for(model: BiEncoder) -> str:
    return _KIND_BY_OUTPUT[model.config.output_kind]


def build_index(corpus: Iterable[DocRecord], model: BiEncoder, threads: int = 1) -> Index:
    """Encode a corpus and assemble the index matching the model's kind.

    Encoding may run on a thread pool; results are assembled in corpus
    order, so the built index does not depend on thread count.
    """
    docs = list(corpus)
    if not docs:
        raise EmptyCorpusError("corpus is empty")
    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise DuplicateDocError(f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)

    def encode(doc: DocRecord):
        try:
            return model.encode_doc(doc.text)
        except EmptyTextError as exc:
            raise EmptyTextError(f"doc {doc.doc_id!r}: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            embeddings = list(pool.map(encode, docs))
    else:
        embeddings = [encode(doc) for doc in docs]
    doc_ids = tuple(doc.doc_id for doc in docs)
    kind = model.config.output_kind
    if kind is OutputKind.SINGLE_VECTOR:
        return DenseFlatIndex(
            doc_ids=doc_ids,
            matrix=np.stack([e.values for e in embeddings]),
            similarity=model.config.similarity_function,
        )
    if kind is OutputKind.MULTI_VECTOR:
        return _build_multi(doc_ids, embeddings, model.config.similarity_function)
    return _build_sparse(doc_ids, embeddings, model.config.vocab_size)


def _build_multi(
    doc_ids: tuple[str, ...], embeddings: list[MultiEmbedding], similarity: SimilarityFunction
) -> MultiVectorIndex:
    offsets = np.zeros((len(embeddings), 2), dtype=np.uint64)
    start = 0
    for i, emb in enumerate(embeddings):
        offsets[i] = (start, emb.num_tokens)
        start += emb.num_tokens
    return MultiVectorIndex(
        doc_ids=doc_ids,
        vectors=np.concatenate([e.vectors for e in embeddings], axis=0),
        offsets=offsets,
        similarity=similarity,
    )


def _build_sparse(
    doc_ids: tuple[str, ...], embeddings: list[SparseEmbedding], vocab_size: int
) -> SparseInvertedIndex:
    all_terms = np.concatenate([e.term_ids for e in embeddings])
    all_docs = np.concatenate(
        [np.full(e.nnz, i, dtype=np.uint32) for i, e in enumerate(embeddings)]
    )
    all_weights = np.concatenate([e.weights for e in embeddings])
    # Stable sort by term keeps docs ascending within each posting list.
    order = np.argsort(all_terms, kind="stable")
    counts = np.bincount(all_terms, minlength=vocab_size)
    indptr = np.zeros(vocab_size + 1, dtype=np.uint64)
    indptr[1:] = np.cumsum(counts)
    return SparseInvertedIndex(
        doc_ids=doc_ids,
        vocab_size=vocab_size,
        indptr=indptr,
        doc_indices=all_docs[order],
        weights=all_weights[order],
    )


def save_index(index: Index, index_dir: Path) -> None:
    """Write an index directory (created if needed; files are overwritten)."""
    index_dir = Path(index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    items: list[tuple[str, str]] = [
        ("format_version", _FORMAT_VERSION),
        ("kind", index.kind),
        ("similarity", index.similarity.value),
        ("doc_count", str(len(index.doc_ids))),
    ]
    if index.kind == "dense":
        items.append(("dim", str(index.dim)))
        arrays = [("EMB", index.matrix)]
    elif index.kind == "sparse":
        items.append(("vocab_size", str(index.vocab_size)))
        items.append(("nnz", str(index.nnz)))
        arrays = [
            ("INDPTR", index.indptr),
            ("DOCIDX", index.doc_indices),
            ("WEIGHT", index.weights),
        ]
    else:
        items.append(("dim", str(index.dim)))
        items.append(("total_vectors", str(index.total_vectors)))
        arrays = [("EMB", index.vectors), ("OFFSET", index.offsets)]
    write_kv_file(index_dir / META_FILE, items)
    (index_dir / DOCIDS_FILE).write_text(
        "".join(f"{doc_id}\n" for doc_id in index.doc_ids), encoding="utf-8"
    )
    write_array_file(index_dir / PAYLOAD_FILE, _MAGIC, arrays)


def _expect_sections(sections: dict[str, np.ndarray], names: set[str], path: Path) -> None:
    if set(sections) != names:
        raise CorruptIndexError(f"{path}: expected sections {sorted(names)}, got {sorted(sections)}")


def load_index(index_dir: Path) -> Index:
    """Load an index directory; raises CorruptIndexError on any inconsistency."""
    index_dir = Path(index_dir)
    meta_path = index_dir / META_FILE
    payload_path = index_dir / PAYLOAD_FILE
    docids_path = index_dir / DOCIDS_FILE
    if not (meta_path.is_file() and payload_path.is_file() and docids_path.is_file()):
        raise CorruptIndexError(f"{index_dir} is not an index directory")
    try:
        meta = read_kv_file(meta_path)
        sections = read_array_file(payload_path, _MAGIC)
    except ValueError as exc:
        raise CorruptIndexError(str(exc)) from exc
    if meta.get("format_version") != _FORMAT_VERSION:
        raise CorruptIndexError(f"{meta_path}: unsupported format_version")
    raw_ids = docids_path.read_text(encoding="utf-8")
    doc_ids = tuple(raw_ids.splitlines())
    try:
        doc_count = int(meta["doc_count"])
        kind = meta["kind"]
        similarity = meta["similarity"]
        if doc_count != len(doc_ids):
            raise ValueError(f"doc_count {doc_count} does not match docids.txt ({len(doc_ids)})")
        if kind == "dense":
            _expect_sections(sections, {"EMB"}, payload_path)
            index: Index = DenseFlatIndex(
                doc_ids=doc_ids, matrix=sections["EMB"], similarity=similarity
            )
            if index.dim != int(meta["dim"]):
                raise ValueError("dim does not match payload")
        elif kind == "sparse":
            _expect_sections(sections, {"INDPTR", "DOCIDX", "WEIGHT"}, payload_path)
            index = SparseInvertedIndex(
                doc_ids=doc_ids,
                vocab_size=int(meta["vocab_size"]),
                indptr=sections["INDPTR"],
                doc_indices=sections["DOCIDX"],
                weights=sections["WEIGHT"],
            )
            if index.nnz != int(meta["nnz"]) or similarity != "dot":
                raise ValueError("sparse metadata does not match payload")
        elif kind == "multi":
            _expect_sections(sections, {"EMB", "OFFSET"}, payload_path)
            index = MultiVectorIndex(
                doc_ids=doc_ids,
                vectors=sections["EMB"],
                offsets=sections["OFFSET"],
                similarity=similarity,
            )
            if index.dim != int(meta["dim"]) or index.total_vectors != int(meta["total_vectors"]):
                raise ValueError("multi metadata does not match payload")
        else:
            raise ValueError(f"unknown index kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise CorruptIndexError(f"{index_dir}: {exc}") from exc
    return index
