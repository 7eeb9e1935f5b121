"""Encoder configurations, parameters, and text-to-embedding encoding.

Three bi-encoder output kinds share one projection architecture:

* ``single_vector``: pool projected token rows into one dense vector.
* ``multi_vector``: keep one projected row per token (no pooling).
* ``sparse``: project into vocabulary space, apply log1p(relu(.)), then
  max-pool over tokens; only strictly positive weights survive.

The cross-encoder mean-pools query and doc rows separately, then scores the
concatenation [q, d, q*d] with a linear head.

All reductions accumulate in float64; stored embeddings and returned scores
are float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .backbone import backbone_features, tokenize
from .errors import EmptyTextError
from .rng import salt, unit_block
from .types import DenseEmbedding, MultiEmbedding, SparseEmbedding, as_score

_PROJECTION_SALT = salt(b"projection-init")

_MAX_SEED = (1 << 64) - 1


class SimilarityFunction(str, Enum):
    DOT = "dot"
    COSINE = "cosine"


class PoolingStrategy(str, Enum):
    NONE = "none"
    FIRST = "first"
    MEAN = "mean"
    MAX = "max"


class OutputKind(str, Enum):
    SINGLE_VECTOR = "single_vector"
    MULTI_VECTOR = "multi_vector"
    SPARSE = "sparse"


class Sparsification(str, Enum):
    NONE = "none"
    LOG1P_RELU = "log1p_relu"


class ScoringMode(str, Enum):
    POINTWISE = "pointwise"
    LISTWISE = "listwise"


def _coerce(value, enum_cls):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ValueError(f"expected one of {{{allowed}}}, got {value!r}") from None


def _check_seed(seed: int) -> None:
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= _MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")


@dataclass(frozen=True)
class BiEncoderConfig:
    """Architecture and determinism knobs for a bi-encoder."""

    similarity_function: SimilarityFunction = SimilarityFunction.DOT
    query_pooling: PoolingStrategy = PoolingStrategy.MEAN
    doc_pooling: PoolingStrategy = PoolingStrategy.MEAN
    embedding_dim: int = 128
    output_kind: OutputKind = OutputKind.SINGLE_VECTOR
    sparsification: Sparsification = Sparsification.NONE
    vocab_size: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "similarity_function", _coerce(self.similarity_function, SimilarityFunction)
        )
        object.__setattr__(self, "query_pooling", _coerce(self.query_pooling, PoolingStrategy))
        object.__setattr__(self, "doc_pooling", _coerce(self.doc_pooling, PoolingStrategy))
        object.__setattr__(self, "output_kind", _coerce(self.output_kind, OutputKind))
        object.__setattr__(self, "sparsification", _coerce(self.sparsification, Sparsification))
        if self.embedding_dim < 1:
            raise ValueError(f"embedding_dim must be positive, got {self.embedding_dim}")
        _check_seed(self.seed)
        kind = self.output_kind
        poolings = (self.query_pooling, self.doc_pooling)
        if kind is OutputKind.MULTI_VECTOR:
            if poolings != (PoolingStrategy.NONE, PoolingStrategy.NONE):
                raise ValueError("multi_vector output requires pooling 'none' on both sides")
        elif PoolingStrategy.NONE in poolings:
            raise ValueError(f"pooling 'none' is only valid for multi_vector, not {kind.value}")
        if kind is OutputKind.SPARSE:
            if self.sparsification is not Sparsification.LOG1P_RELU:
                raise ValueError("sparse output requires sparsification 'log1p_relu'")
            if self.similarity_function is not SimilarityFunction.DOT:
                raise ValueError("sparse output requires similarity 'dot'")
            if self.vocab_size < 1:
                raise ValueError("sparse output requires vocab_size >= 1")
        else:
            if self.sparsification is not Sparsification.NONE:
                raise ValueError("sparsification only applies to sparse output")
            if self.vocab_size != 0:
                raise ValueError("vocab_size only applies to sparse output")

    @property
    def projection_dim(self) -> int:
        """Width of the projection: vocab for sparse, embedding dim otherwise."""
        if self.output_kind is OutputKind.SPARSE:
            return self.vocab_size
        return self.embedding_dim


@dataclass(frozen=True)
class CrossEncoderConfig:
    """Architecture and determinism knobs for a cross-encoder."""

    scoring_mode: ScoringMode = ScoringMode.POINTWISE
    embedding_dim: int = 128
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scoring_mode", _coerce(self.scoring_mode, ScoringMode))
        if self.embedding_dim < 1:
            raise ValueError(f"embedding_dim must be positive, got {self.embedding_dim}")
        _check_seed(self.seed)

    @property
    def projection_dim(self) -> int:
        return self.embedding_dim


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ProjectionParams:
    """Trainable parameters.

    weight: (backbone_dim, projection_dim), bias: (projection_dim,).
    Cross-encoders additionally carry a linear head over [q, d, q*d]:
    head_weights: (3*embedding_dim,), head_bias: scalar.
    """

    weight: np.ndarray
    bias: np.ndarray
    head_weights: np.ndarray | None = None
    head_bias: float | None = None

    def __post_init__(self):
        weight = _frozen(self.weight)
        bias = _frozen(self.bias)
        if weight.ndim != 2 or bias.ndim != 1 or weight.shape[1] != bias.shape[0]:
            raise ValueError(
                f"weight {weight.shape} and bias {bias.shape} shapes are inconsistent"
            )
        if not np.all(np.isfinite(weight)) or not np.all(np.isfinite(bias)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)
        if (self.head_weights is None) != (self.head_bias is None):
            raise ValueError("head_weights and head_bias must be set together")
        if self.head_weights is not None:
            head = _frozen(self.head_weights)
            if head.ndim != 1 or head.shape[0] % 3 != 0:
                raise ValueError(f"head_weights must be 1-d with length 3*dim, got {head.shape}")
            hb = float(np.float32(self.head_bias))
            if not np.all(np.isfinite(head)) or not np.isfinite(hb):
                raise ValueError("head parameters must be finite")
            object.__setattr__(self, "head_weights", head)
            object.__setattr__(self, "head_bias", hb)

    @property
    def backbone_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def projection_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def has_head(self) -> bool:
        return self.head_weights is not None

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjectionParams):
            return NotImplemented
        if not (np.array_equal(self.weight, other.weight) and np.array_equal(self.bias, other.bias)):
            return False
        if self.has_head != other.has_head:
            return False
        if self.has_head:
            return (
                np.array_equal(self.head_weights, other.head_weights)
                and self.head_bias == other.head_bias
            )
        return True


def _draw_params(seed: int, backbone_dim: int, counts: list[int]) -> list[np.ndarray]:
    """Consecutive uniform blocks in [-1/sqrt(B), 1/sqrt(B)) from one stream."""
    bound = 1.0 / np.sqrt(float(backbone_dim))
    block = unit_block(seed ^ _PROJECTION_SALT, sum(counts))
    out = []
    start = 0
    for count in counts:
        chunk = (2.0 * block[start : start + count] - 1.0) * bound
        out.append(chunk.astype(np.float32))
        start += count
    return out


def init_bi_params(config: BiEncoderConfig, backbone_dim: int) -> ProjectionParams:
    """Fresh bi-encoder parameters, fully determined by config.seed."""
    if backbone_dim < 1:
        raise ValueError(f"backbone_dim must be positive, got {backbone_dim}")
    p = config.projection_dim
    weight_flat, bias = _draw_params(config.seed, backbone_dim, [backbone_dim * p, p])
    return ProjectionParams(weight=weight_flat.reshape(backbone_dim, p), bias=bias)


def init_cross_params(config: CrossEncoderConfig, backbone_dim: int) -> ProjectionParams:
    """Fresh cross-encoder parameters, fully determined by config.seed."""
    if backbone_dim < 1:
        raise ValueError(f"backbone_dim must be positive, got {backbone_dim}")
    e = config.embedding_dim
    weight_flat, bias, head, head_bias = _draw_params(
        config.seed, backbone_dim, [backbone_dim * e, e, 3 * e, 1]
    )
    return ProjectionParams(
        weight=weight_flat.reshape(backbone_dim, e),
        bias=bias,
        head_weights=head,
        head_bias=float(head_bias[0]),
    )


def pool(matrix: np.ndarray, strategy: PoolingStrategy) -> np.ndarray:
    """Reduce a (num_tokens, dim) matrix per the strategy.

    'none' returns the matrix unchanged; the others return a (dim,) vector.
    Mean accumulates in float64 regardless of input dtype.
    """
    strategy = _coerce(strategy, PoolingStrategy)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise ValueError(f"pool expects a non-empty 2-d matrix, got shape {matrix.shape}")
    if strategy is PoolingStrategy.NONE:
        return matrix
    if strategy is PoolingStrategy.FIRST:
        return matrix[0]
    if strategy is PoolingStrategy.MEAN:
        out = matrix.astype(np.float64).mean(axis=0)
        return out.astype(matrix.dtype) if matrix.dtype != np.float64 else out
    return matrix.max(axis=0)


def _project(text: str, seed: int, params: ProjectionParams) -> np.ndarray:
    """Tokenize, embed, and project; returns (num_tokens, projection_dim) f64."""
    tokens = tokenize(text)
    if not tokens:
        raise EmptyTextError(f"text {text!r} produced no tokens")
    feats = backbone_features(tokens, seed, params.backbone_dim)
    return feats.matrix.astype(np.float64) @ params.weight.astype(
        np.float64
    ) + params.bias.astype(np.float64)


def sparsify_projection(projected: np.ndarray) -> SparseEmbedding:
    """Max-pooled log1p(relu(.)) activations as a sparse embedding."""
    act = np.log1p(np.maximum(projected, 0.0))
    pooled = act.max(axis=0)
    weights = pooled.astype(np.float32)
    keep = weights > 0
    ids = np.nonzero(keep)[0].astype(np.int64)
    return SparseEmbedding(term_ids=ids, weights=weights[keep])


def encode_bi(
    text: str, config: BiEncoderConfig, params: ProjectionParams, side: str
) -> DenseEmbedding | MultiEmbedding | SparseEmbedding:
    """Encode one text with a bi-encoder. `side` is 'query' or 'doc'."""
    if side not in ("query", "doc"):
        raise ValueError(f"side must be 'query' or 'doc', got {side!r}")
    if params.projection_dim != config.projection_dim:
        raise ValueError(
            f"params project to {params.projection_dim}, config wants {config.projection_dim}"
        )
    projected = _project(text, config.seed, params)
    if config.output_kind is OutputKind.MULTI_VECTOR:
        return MultiEmbedding(projected.astype(np.float32))
    if config.output_kind is OutputKind.SPARSE:
        return sparsify_projection(projected)
    strategy = config.query_pooling if side == "query" else config.doc_pooling
    return DenseEmbedding(pool(projected, strategy).astype(np.float32))


def cross_joint_features(query_vec: np.ndarray, doc_vec: np.ndarray) -> np.ndarray:
    """Interaction features [q, d, q*d] for the cross-encoder head."""
    return np.concatenate([query_vec, doc_vec, query_vec * doc_vec])


def encode_cross(
    query: str, doc: str, config: CrossEncoderConfig, params: ProjectionParams
) -> float:
    """Joint relevance score of a (query, doc) pair as a float32 value."""
    if not params.has_head:
        raise ValueError("cross-encoder params must include a head")
    if params.projection_dim != config.embedding_dim:
        raise ValueError(
            f"params project to {params.projection_dim}, config wants {config.embedding_dim}"
        )
    q = pool(_project(query, config.seed, params), PoolingStrategy.MEAN)
    d = pool(_project(doc, config.seed, params), PoolingStrategy.MEAN)
    joint = cross_joint_features(q, d)
    raw = float(joint @ params.head_weights.astype(np.float64)) + float(params.head_bias)
    return as_score(raw)
