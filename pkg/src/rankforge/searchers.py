"""Exact top-k retrieval over the three index kinds.

Every searcher is exact: dense and multi-vector scan all candidates, sparse
traverses postings document-at-a-time. Selection uses a bounded heap whose
ordering is the canonical tie rule (score descending, doc_id ascending), so
truncation at k never depends on traversal order.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .encoders import OutputKind, SimilarityFunction
from .errors import (
    ConfigConflictError,
    DimMismatchError,
    DuplicateQueryError,
    EmptyTextError,
)
from .indexes import DenseFlatIndex, Index, MultiVectorIndex, SparseInvertedIndex
from .models import BiEncoder
from .similarity import dense_scores, max_sim_matrix, max_sim_value
from .types import (
    DenseEmbedding,
    MultiEmbedding,
    QueryRecord,
    Run,
    ScoredDoc,
    SparseEmbedding,
)


@dataclass(frozen=True)
class SearchConfig:
    """Retrieval depth and, for multi-vector, candidate generation width.

    candidate_k defaults to 10*k. A similarity, when given, must match the
    index being searched.
    """

    k: int = 10
    candidate_k: int | None = None
    similarity: SimilarityFunction | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.candidate_k is not None and self.candidate_k < self.k:
            raise ValueError(f"candidate_k must be >= k, got {self.candidate_k}")
        if self.similarity is not None:
            object.__setattr__(self, "similarity", SimilarityFunction(self.similarity))

    @property
    def resolved_candidate_k(self) -> int:
        return self.candidate_k if self.candidate_k is not None else 10 * self.k


class _RevId:
    """Wraps a doc_id so a min-heap evicts the LARGEST id among score ties."""

    __slots__ = ("value",)

    def __init__(self, value: str):
        self.value = value

    def __lt__(self, other: "_RevId") -> bool:
        return self.value > other.value

    def __eq__(self, other) -> bool:
        return isinstance(other, _RevId) and self.value == other.value


def _check_similarity(config: SearchConfig, index: Index) -> None:
    if config.similarity is not None and config.similarity is not index.similarity:
        raise ConfigConflictError(
            f"search similarity {config.similarity.value!r} does not match "
            f"index similarity {index.similarity.value!r}"
        )


def _top_k(candidates: Iterable[tuple[str, float]], k: int) -> list[ScoredDoc]:
    """Exact top-k under the canonical tie rule via a bounded min-heap."""
    heap: list[tuple[float, _RevId]] = []
    for doc_id, score in candidates:
        item = (float(score), _RevId(doc_id))
        if len(heap) < k:
            heapq.heappush(heap, item)
        else:
            heapq.heappushpop(heap, item)
    ordered = sorted(heap, key=lambda item: (-item[0], item[1].value))
    return [ScoredDoc(rev.value, score, rank) for rank, (score, rev) in enumerate(ordered, 1)]


def search_dense(index: DenseFlatIndex, query: DenseEmbedding, config: SearchConfig) -> list[ScoredDoc]:
    """Exact flat search: score every doc, return the top k."""
    _check_similarity(config, index)
    if query.dim != index.dim:
        raise DimMismatchError(f"query dim {query.dim} vs index dim {index.dim}")
    scores = dense_scores(index.matrix, query.values, index.similarity)
    return _top_k(zip(index.doc_ids, scores.tolist()), config.k)


def search_sparse(
    index: SparseInvertedIndex, query: SparseEmbedding, config: SearchConfig
) -> list[ScoredDoc]:
    """Document-at-a-time traversal of the postings for the query's terms.

    Docs sharing no term with the query are never candidates. Accumulation
    runs in ascending term order, bit-identical to `sparse_dot`.
    """
    _check_similarity(config, index)
    if query.nnz and int(query.term_ids[-1]) >= index.vocab_size:
        raise DimMismatchError(
            f"query term {int(query.term_ids[-1])} outside vocab of {index.vocab_size}"
        )
    acc = np.zeros(len(index.doc_ids), dtype=np.float64)
    touched = np.zeros(len(index.doc_ids), dtype=bool)
    for term_id, q_weight in zip(query.term_ids, query.weights):
        doc_idx, weights = index.postings(int(term_id))
        if doc_idx.shape[0]:
            acc[doc_idx] += float(q_weight) * weights.astype(np.float64)
            touched[doc_idx] = True
    candidates = np.nonzero(touched)[0]
    scores = acc[candidates].astype(np.float32)
    return _top_k(
        ((index.doc_ids[i], s) for i, s in zip(candidates.tolist(), scores.tolist())),
        config.k,
    )


def search_multi(
    index: MultiVectorIndex, query: MultiEmbedding, config: SearchConfig
) -> list[ScoredDoc]:
    """Candidate generation over token vectors, then exact re-scoring.

    Stage 1 takes, per query token, the candidate_k most similar token
    vectors across the whole index (exact scan); stage 2 computes the exact
    late-interaction score for every doc owning a selected token. With
    candidate_k >= total_vectors this is exhaustive search.
    """
    _check_similarity(config, index)
    if query.dim != index.dim:
        raise DimMismatchError(f"query dim {query.dim} vs index dim {index.dim}")
    candidate_k = config.resolved_candidate_k
    starts = index.offsets[:, 0].astype(np.int64)
    doc_set: set[int] = set()
    if candidate_k >= index.total_vectors:
        doc_set = set(range(len(index.doc_ids)))
    else:
        sims = max_sim_matrix(query.vectors, index.vectors, index.similarity)
        token_order = np.arange(index.total_vectors)
        for row in sims:
            # Exact top-candidate_k tokens: similarity desc, token index asc.
            order = np.lexsort((token_order, -row))
            chosen = order[:candidate_k]
            owners = np.searchsorted(starts, chosen, side="right") - 1
            doc_set.update(owners.tolist())
    scored = []
    for doc_index in sorted(doc_set):
        score = max_sim_value(query.vectors, index.doc_vectors(doc_index), index.similarity)
        scored.append((index.doc_ids[doc_index], score))
    return _top_k(scored, config.k)


@dataclass(frozen=True)
class BatchSearchResult:
    """A run plus the query ids skipped because their text had no tokens."""

    run: Run
    skipped: tuple[str, ...]


def _check_model_index(model: BiEncoder, index: Index) -> None:
    kind = model.config.output_kind
    expected = {
        OutputKind.SINGLE_VECTOR: "dense",
        OutputKind.SPARSE: "sparse",
        OutputKind.MULTI_VECTOR: "multi",
    }[kind]
    if index.kind != expected:
        raise ConfigConflictError(
            f"model produces {kind.value} embeddings but index kind is {index.kind!r}"
        )
    if model.config.similarity_function is not index.similarity:
        raise ConfigConflictError(
            f"model similarity {model.config.similarity_function.value!r} "
            f"does not match index similarity {index.similarity.value!r}"
        )
    if index.kind == "sparse" and model.config.vocab_size != index.vocab_size:
        raise ConfigConflictError(
            f"model vocab {model.config.vocab_size} does not match index vocab {index.vocab_size}"
        )
    if index.kind == "dense" and model.config.embedding_dim != index.dim:
        raise ConfigConflictError(
            f"model dim {model.config.embedding_dim} does not match index dim {index.dim}"
        )
    if index.kind == "multi" and model.config.embedding_dim != index.dim:
        raise ConfigConflictError(
            f"model dim {model.config.embedding_dim} does not match index dim {index.dim}"
        )


def batch_search(
    index: Index,
    queries: Iterable[QueryRecord],
    model: BiEncoder,
    config: SearchConfig,
    threads: int = 1,
) -> BatchSearchResult:
    """Search every query and assemble a Run tagged with the model name.

    Queries whose text yields no tokens are skipped and reported; duplicate
    query ids are an error. Results are assembled in query order regardless
    of thread count.
    """
    if not isinstance(model, BiEncoder):
        raise ConfigConflictError("first-stage search requires a bi-encoder")
    _check_model_index(model, index)
    query_list = list(queries)
    seen: set[str] = set()
    for query in query_list:
        if query.query_id in seen:
            raise DuplicateQueryError(f"duplicate query_id {query.query_id!r}")
        seen.add(query.query_id)

    searcher = {
        "dense": search_dense,
        "sparse": search_sparse,
        "multi": search_multi,
    }[index.kind]

    def run_one(query: QueryRecord):
        try:
            embedding = model.encode_query(query.text)
        except EmptyTextError:
            return None
        return searcher(index, embedding, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, query_list))
    else:
        results = [run_one(query) for query in query_list]
    rankings: dict[str, tuple[ScoredDoc, ...]] = {}
    skipped: list[str] = []
    for query, result in zip(query_list, results):
        if result is None:
            skipped.append(query.query_id)
        else:
            rankings[query.query_id] = tuple(result)
    return BatchSearchResult(run=Run(tag=model.name, rankings=rankings), skipped=tuple(skipped))
