"""Similarity primitives for all embedding kinds.

Reductions accumulate in float64 and round to float32 at the boundary.
`sparse_dot` adds term products in ascending term_id order, one at a time;
the inverted-index searcher accumulates in exactly that order, so both paths
produce bit-identical scores.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .encoders import (
    BiEncoderConfig,
    CrossEncoderConfig,
    OutputKind,
    ProjectionParams,
    SimilarityFunction,
    encode_bi,
    encode_cross,
)
from .errors import DimMismatchError
from .types import DenseEmbedding, MultiEmbedding, SparseEmbedding, as_score

Embedding = Union[DenseEmbedding, MultiEmbedding, SparseEmbedding]


def _check_dims(a_dim: int, b_dim: int) -> None:
    if a_dim != b_dim:
        raise DimMismatchError(f"dimension mismatch: {a_dim} vs {b_dim}")


def dot(a: DenseEmbedding, b: DenseEmbedding) -> float:
    """Inner product of two dense embeddings."""
    _check_dims(a.dim, b.dim)
    return as_score(np.dot(a.values.astype(np.float64), b.values.astype(np.float64)))


def cosine(a: DenseEmbedding, b: DenseEmbedding) -> float:
    """Cosine similarity; zero whenever either vector has zero norm."""
    _check_dims(a.dim, b.dim)
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return as_score(np.dot(av, bv) / (na * nb))


def sparse_dot(a: SparseEmbedding, b: SparseEmbedding) -> float:
    """Dot product over shared term_ids, accumulated in ascending id order."""
    common, ia, ib = np.intersect1d(a.term_ids, b.term_ids, assume_unique=True, return_indices=True)
    total = 0.0
    for wa, wb in zip(a.weights[ia].astype(np.float64), b.weights[ib].astype(np.float64)):
        total += wa * wb
    return as_score(total)


def _cosine_normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-normalize; all-zero rows stay zero."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe

def max_sim_matrix(
    q_vectors: np.ndarray, d_vectors: np.ndarray, similarity: SimilarityFunction
) -> np.ndarray:
    """Token-level similarity matrix (num_q_tokens, num_d_tokens) in float64."""
    similarity = SimilarityFunction(similarity)
    q64 = q_vectors.astype(np.float64)
    d64 = d_vectors.astype(np.float64)
    if similarity is SimilarityFunction.COSINE:
        q64 = _cosine_normalize_rows(q64)
        d64 = _cosine_normalize_rows(d64)
    return q64 @ d64.T


def max_sim_value(
    q_vectors: np.ndarray, d_vectors: np.ndarray, similarity: SimilarityFunction
) -> float:
    """MaxSim on raw vector stacks; shared by the scorer and the searcher."""
    sims = max_sim_matrix(q_vectors, d_vectors, similarity)
    return as_score(float(np.sum(sims.max(axis=1))))


def max_sim(a: MultiEmbedding, b: MultiEmbedding, similarity: SimilarityFunction) -> float:
    """Late-interaction score: sum over query tokens of the best doc token."""
    _check_dims(a.dim, b.dim)
    similarity = SimilarityFunction(similarity)
    return max_sim_value(a.vectors, b.vectors, similarity)


def dense_scores(
    matrix: np.ndarray, query: np.ndarray, similarity: SimilarityFunction
) -> np.ndarray:
    """Score every row of a (n, dim) float32 matrix against one query vector.

    Returns float32 scores; float64 inside. This is the score-all primitive
    behind flat search, equal to calling `dot`/`cosine` row by row.
    """
    similarity = SimilarityFunction(similarity)
    m64 = matrix.astype(np.float64)
    q64 = query.astype(np.float64)
    raw = m64 @ q64
    if similarity is SimilarityFunction.COSINE:
        qn = np.linalg.norm(q64)
        if qn == 0.0:
            return np.zeros(matrix.shape[0], dtype=np.float32)
        norms = np.linalg.norm(m64, axis=1)
        out = np.zeros(matrix.shape[0], dtype=np.float64)
        nonzero = norms != 0.0
        out[nonzero] = raw[nonzero] / (norms[nonzero] * qn)
        return out.astype(np.float32)
    return raw.astype(np.float32)


def score_pairs(
    query: str,
    docs: Sequence[str],
    config: BiEncoderConfig | CrossEncoderConfig,
    params: ProjectionParams,
) -> list[float]:
    """Score one query against each doc text with the configured model."""
    if not docs:
        raise ValueError("docs must be non-empty")
    if isinstance(config, CrossEncoderConfig):
        return [encode_cross(query, doc, config, params) for doc in docs]
    q = encode_bi(query, config, params, side="query")
    scores: list[float] = []
    for doc in docs:
        d = encode_bi(doc, config, params, side="doc")
        if config.output_kind is OutputKind.SINGLE_VECTOR:
            if config.similarity_function is SimilarityFunction.COSINE:
                scores.append(cosine(q, d))
            else:
                scores.append(dot(q, d))
        elif config.output_kind is OutputKind.MULTI_VECTOR:
            scores.append(max_sim(q, d, config.similarity_function))
        else:
            scores.append(sparse_dot(q, d))
    return scores
