"""Losses, analytic gradients, and the SGD fine-tuning loop.

There is no autodiff: every backward pass is written out by hand, which keeps
training free of heavyweight dependencies and makes gradients directly
checkable against finite differences. The whole forward/backward runs in
float64; parameters are rounded to float32 after every update, matching how
they are stored.

Subgradient conventions at kinks: argmax ties pick the lowest index, relu
contributes zero gradient at exactly zero, and cosine has zero gradient when
either vector has zero norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .backbone import backbone_features, tokenize
from .encoders import (
    BiEncoderConfig,
    CrossEncoderConfig,
    OutputKind,
    PoolingStrategy,
    ProjectionParams,
    SimilarityFunction,
)
from .errors import DivergedError, EmptyTextError, NoPreferenceError
from .rng import SplitMix64, salt
from .types import TrainSample

_SHUFFLE_SALT = salt(b"fit-shuffle")

_MAX_SEED = (1 << 64) - 1


class LossKind(str, Enum):
    INFONCE = "infonce"
    RANKNET = "ranknet"
    LISTWISE_CE = "listwise_ce"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one fine-tuning run."""

    loss: LossKind = LossKind.INFONCE
    temperature: float = 1.0
    learning_rate: float = 0.001
    epochs: int = 1
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be finite and positive, got {self.temperature}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be finite and positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed <= _MAX_SEED:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


def _check_loss_inputs(scores: np.ndarray, labels: np.ndarray, temperature: float) -> None:
    if scores.ndim != 1 or labels.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be 1-d arrays of equal length")
    if scores.shape[0] < 2:
        raise ValueError("at least two docs are required")
    if not (np.all(np.isfinite(scores)) and np.all(np.isfinite(labels))):
        raise ValueError("scores and labels must be finite")
    if not (np.isfinite(temperature) and temperature > 0):
        raise ValueError(f"temperature must be finite and positive, got {temperature}")
    if np.min(labels) == np.max(labels):
        raise NoPreferenceError("all labels are equal; the sample expresses no preference")


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(x - m))))


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / np.sum(e)


def _sigmoid(x: float) -> float:
    # exp only ever sees a non-positive argument, so it cannot overflow
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _ranknet_pairs(labels: np.ndarray) -> list[tuple[int, int]]:
    n = labels.shape[0]
    return [(i, j) for i in range(n) for j in range(n) if labels[i] > labels[j]]


def loss_value(
    kind: LossKind, scores: Sequence[float], labels: Sequence[float], temperature: float = 1.0
) -> float:
    """Loss of one sample given model scores and relevance labels.

    infonce treats the highest label (lowest index on ties) as the positive;
    ranknet averages logistic pair losses over all preference pairs;
    listwise_ce is cross-entropy against labels normalized to a distribution
    (labels must be non-negative).
    """
    kind = LossKind(kind)
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check_loss_inputs(s, y, temperature)
    if kind is LossKind.INFONCE:
        pos = int(np.argmax(y))
        st = s / temperature
        return _logsumexp(st) - float(st[pos])
    if kind is LossKind.RANKNET:
        pairs = _ranknet_pairs(y)
        total = 0.0
        for i, j in pairs:
            total += float(np.logaddexp(0.0, s[j] - s[i]))
        return total / len(pairs)
    if np.any(y < 0):
        raise ValueError("listwise_ce requires non-negative labels")
    targets = y / np.sum(y)
    return _logsumexp(s) - float(np.dot(targets, s))


def loss_gradient(
    kind: LossKind, scores: Sequence[float], labels: Sequence[float], temperature: float = 1.0
) -> np.ndarray:
    """d(loss)/d(scores) as a float64 array; conventions match `loss_value`."""
    kind = LossKind(kind)
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check_loss_inputs(s, y, temperature)
    if kind is LossKind.INFONCE:
        pos = int(np.argmax(y))
        grad = _softmax(s / temperature) / temperature
        grad[pos] -= 1.0 / temperature
        return grad
    if kind is LossKind.RANKNET:
        pairs = _ranknet_pairs(y)
        grad = np.zeros_like(s)
        for i, j in pairs:
            sig = _sigmoid(s[j] - s[i])
            grad[i] -= sig / len(pairs)
            grad[j] += sig / len(pairs)
        return grad
    if np.any(y < 0):
        raise ValueError("listwise_ce requires non-negative labels")
    targets = y / np.sum(y)
    return _softmax(s) - targets


def _features64(text: str, seed: int, backbone_dim: int) -> np.ndarray:
    tokens = tokenize(text)
    if not tokens:
        raise EmptyTextError(f"text {text!r} produced no tokens")
    return backbone_features(tokens, seed, backbone_dim).matrix.astype(np.float64)


def _pool_forward(projected: np.ndarray, strategy: PoolingStrategy):
    if strategy is PoolingStrategy.FIRST:
        return projected[0], None
    if strategy is PoolingStrategy.MEAN:
        return projected.mean(axis=0), None
    winners = np.argmax(projected, axis=0)
    return projected[winners, np.arange(projected.shape[1])], winners


def _pool_backward(
    g_vec: np.ndarray, shape: tuple[int, int], strategy: PoolingStrategy, cache
) -> np.ndarray:
    g = np.zeros(shape, dtype=np.float64)
    if strategy is PoolingStrategy.FIRST:
        g[0] = g_vec
    elif strategy is PoolingStrategy.MEAN:
        g[:] = g_vec / shape[0]
    else:
        np.add.at(g, (cache, np.arange(shape[1])), g_vec)
    return g


def _cosine_backward(qv: np.ndarray, dv: np.ndarray, ds: float):
    nq = float(np.linalg.norm(qv))
    nd = float(np.linalg.norm(dv))
    if nq == 0.0 or nd == 0.0:
        return np.zeros_like(qv), np.zeros_like(dv)
    c = float(np.dot(qv, dv)) / (nq * nd)
    g_q = ds * (dv / (nq * nd) - c * qv / (nq * nq))
    g_d = ds * (qv / (nq * nd) - c * dv / (nd * nd))
    return g_q, g_d


def _normalize_rows(matrix: np.ndarray):
    norms = np.linalg.norm(matrix, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe[:, None], norms


class _SampleEngine:
    """Forward/backward machinery for one training sample.

    Holds float64 parameter views plus per-text caches, so the backward pass
    never recomputes a projection.
    """

    def __init__(
        self,
        sample: TrainSample,
        config: BiEncoderConfig | CrossEncoderConfig,
        weight: np.ndarray,
        bias: np.ndarray,
        head_weights: np.ndarray | None = None,
        head_bias: float = 0.0,
    ):
        self.sample = sample
        self.config = config
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.head_weights = (
            None if head_weights is None else np.asarray(head_weights, dtype=np.float64)
        )
        self.head_bias = float(head_bias)
        self.is_cross = isinstance(config, CrossEncoderConfig)
        if self.is_cross and self.head_weights is None:
            raise ValueError("cross-encoder forward requires head parameters")
        self._feats = [_features64(sample.query.text, config.seed, self.weight.shape[0])] + [
            _features64(doc.text, config.seed, self.weight.shape[0]) for doc in sample.docs
        ]
        self._proj = [f @ self.weight + self.bias for f in self._feats]
        self._caches: list = [None] * len(self._proj)
        self.scores = self._forward()

    # -- forward ----------------------------------------------------------

    def _forward(self) -> np.ndarray:
        if self.is_cross:
            return self._forward_cross()
        kind = self.config.output_kind
        if kind is OutputKind.SINGLE_VECTOR:
            return self._forward_single()
        if kind is OutputKind.MULTI_VECTOR:
            return self._forward_multi()
        return self._forward_sparse()

    def _forward_single(self) -> np.ndarray:
        cfg = self.config
        qv, qcache = _pool_forward(self._proj[0], cfg.query_pooling)
        self._caches[0] = (qv, qcache)
        scores = np.zeros(len(self.sample.docs), dtype=np.float64)
        for i in range(len(self.sample.docs)):
            dv, dcache = _pool_forward(self._proj[i + 1], cfg.doc_pooling)
            self._caches[i + 1] = (dv, dcache)
            if cfg.similarity_function is SimilarityFunction.COSINE:
                nq = float(np.linalg.norm(qv))
                nd = float(np.linalg.norm(dv))
                scores[i] = 0.0 if nq == 0.0 or nd == 0.0 else float(np.dot(qv, dv)) / (nq * nd)
            else:
                scores[i] = float(np.dot(qv, dv))
        return scores

    def _forward_multi(self) -> np.ndarray:
        cosine = self.config.similarity_function is SimilarityFunction.COSINE
        q = self._proj[0]
        if cosine:
            qn, q_norms = _normalize_rows(q)
        scores = np.zeros(len(self.sample.docs), dtype=np.float64)
        for i in range(len(self.sample.docs)):
            d = self._proj[i + 1]
            if cosine:
                dn, d_norms = _normalize_rows(d)
                sims = qn @ dn.T
                winners = np.argmax(sims, axis=1)
                self._caches[i + 1] = (winners, q_norms, d_norms, qn, dn, sims)
            else:
                sims = q @ d.T
                winners = np.argmax(sims, axis=1)
                self._caches[i + 1] = winners
            scores[i] = float(np.sum(sims[np.arange(q.shape[0]), winners]))
        return scores

    def _forward_sparse(self) -> np.ndarray:
        embeddings = []
        for idx, p in enumerate(self._proj):
            act = np.log1p(np.maximum(p, 0.0))
            winners = np.argmax(act, axis=0)
            z = act[winners, np.arange(act.shape[1])]
            self._caches[idx] = winners
            embeddings.append(z)
        self._sparse_z = embeddings
        zq = embeddings[0]
        return np.array([float(np.dot(zq, zd)) for zd in embeddings[1:]], dtype=np.float64)

    def _forward_cross(self) -> np.ndarray:
        e = self.config.embedding_dim
        qv = self._proj[0].mean(axis=0)
        self._caches[0] = qv
        h1, h2, h3 = self.head_weights[:e], self.head_weights[e : 2 * e], self.head_weights[2 * e :]
        scores = np.zeros(len(self.sample.docs), dtype=np.float64)
        for i in range(len(self.sample.docs)):
            dv = self._proj[i + 1].mean(axis=0)
            self._caches[i + 1] = dv
            scores[i] = (
                float(np.dot(h1, qv))
                + float(np.dot(h2, dv))
                + float(np.dot(h3, qv * dv))
                + self.head_bias
            )
        return scores

    # -- backward ---------------------------------------------------------

    def backward(self, dscores: np.ndarray) -> dict[str, np.ndarray | float]:
        """Accumulate parameter gradients for the given score gradients.

        Docs contribute in ascending index order; the query side is folded in
        once at the end, so accumulation order is fixed.
        """
        self._g_proj = [np.zeros_like(p) for p in self._proj]
        self._g_head = None if self.head_weights is None else np.zeros_like(self.head_weights)
        self._g_head_bias = 0.0
        if self.is_cross:
            self._backward_cross(dscores)
        elif self.config.output_kind is OutputKind.SINGLE_VECTOR:
            self._backward_single(dscores)
        elif self.config.output_kind is OutputKind.MULTI_VECTOR:
            self._backward_multi(dscores)
        else:
            self._backward_sparse(dscores)
        g_weight = np.zeros_like(self.weight)
        g_bias = np.zeros_like(self.bias)
        for feats, g_proj in zip(self._feats, self._g_proj):
            g_weight += feats.T @ g_proj
            g_bias += g_proj.sum(axis=0)
        grads: dict[str, np.ndarray | float] = {"weight": g_weight, "bias": g_bias}
        if self._g_head is not None:
            grads["head_weights"] = self._g_head
            grads["head_bias"] = self._g_head_bias
        return grads

    def _backward_single(self, dscores: np.ndarray) -> None:
        cfg = self.config
        qv, qcache = self._caches[0]
        g_qv = np.zeros_like(qv)
        for i, ds in enumerate(dscores):
            dv, dcache = self._caches[i + 1]
            if cfg.similarity_function is SimilarityFunction.COSINE:
                gq, gd = _cosine_backward(qv, dv, float(ds))
            else:
                gq = float(ds) * dv
                gd = float(ds) * qv
            g_qv += gq
            self._g_proj[i + 1] += _pool_backward(
                gd, self._proj[i + 1].shape, cfg.doc_pooling, dcache
            )
        self._g_proj[0] += _pool_backward(g_qv, self._proj[0].shape, cfg.query_pooling, qcache)

    def _backward_multi(self, dscores: np.ndarray) -> None:
        cosine = self.config.similarity_function is SimilarityFunction.COSINE
        q = self._proj[0]
        g_q = np.zeros_like(q)
        for i, ds in enumerate(dscores):
            d = self._proj[i + 1]
            g_d = np.zeros_like(d)
            if cosine:
                winners, q_norms, d_norms, qn, dn, sims = self._caches[i + 1]
                for t in range(q.shape[0]):
                    j = int(winners[t])
                    c = float(sims[t, j])
                    if q_norms[t] != 0.0:
                        g_q[t] += float(ds) * (dn[j] - c * qn[t]) / q_norms[t]
                    if d_norms[j] != 0.0:
                        g_d[j] += float(ds) * (qn[t] - c * dn[j]) / d_norms[j]
            else:
                winners = self._caches[i + 1]
                for t in range(q.shape[0]):
                    j = int(winners[t])
                    g_q[t] += float(ds) * d[j]
                    g_d[j] += float(ds) * q[t]
            self._g_proj[i + 1] += g_d
        self._g_proj[0] += g_q

    def _backward_sparse(self, dscores: np.ndarray) -> None:
        embeddings = self._sparse_z
        zq = embeddings[0]
        g_zq = np.zeros_like(zq)
        for i, ds in enumerate(dscores):
            zd = embeddings[i + 1]
            g_zq += float(ds) * zd
            self._apply_sparse_chain(i + 1, float(ds) * zq)
        self._apply_sparse_chain(0, g_zq)

    def _apply_sparse_chain(self, idx: int, g_z: np.ndarray) -> None:
        p = self._proj[idx]
        winners = self._caches[idx]
        cols = np.arange(p.shape[1])
        winner_vals = p[winners, cols]
        factor = np.where(winner_vals > 0.0, 1.0 / (1.0 + np.maximum(winner_vals, 0.0)), 0.0)
        np.add.at(self._g_proj[idx], (winners, cols), g_z * factor)

    def _backward_cross(self, dscores: np.ndarray) -> None:
        e = self.config.embedding_dim
        h1 = self.head_weights[:e]
        h3 = self.head_weights[2 * e :]
        qv = self._caches[0]
        g_qv = np.zeros_like(qv)
        n_q = self._proj[0].shape[0]
        for i, ds in enumerate(dscores):
            dv = self._caches[i + 1]
            ds = float(ds)
            self._g_head += ds * np.concatenate([qv, dv, qv * dv])
            self._g_head_bias += ds
            g_qv += ds * (h1 + h3 * dv)
            g_dv = ds * (self.head_weights[e : 2 * e] + h3 * qv)
            n_d = self._proj[i + 1].shape[0]
            self._g_proj[i + 1] += g_dv[None, :] / n_d
        self._g_proj[0] += g_qv[None, :] / n_q


def sample_scores(
    sample: TrainSample,
    config: BiEncoderConfig | CrossEncoderConfig,
    weight: np.ndarray,
    bias: np.ndarray,
    head_weights: np.ndarray | None = None,
    head_bias: float = 0.0,
) -> np.ndarray:
    """Float64 model scores of a sample's docs; the training-side forward."""
    return _SampleEngine(sample, config, weight, bias, head_weights, head_bias).scores


def sample_loss(
    sample: TrainSample,
    config: BiEncoderConfig | CrossEncoderConfig,
    train_config: TrainConfig,
    weight: np.ndarray,
    bias: np.ndarray,
    head_weights: np.ndarray | None = None,
    head_bias: float = 0.0,
) -> float:
    """Loss of one sample as a pure function of float64 parameters."""
    scores = sample_scores(sample, config, weight, bias, head_weights, head_bias)
    return loss_value(train_config.loss, scores, sample.labels, train_config.temperature)


def sample_gradients(
    sample: TrainSample,
    config: BiEncoderConfig | CrossEncoderConfig,
    train_config: TrainConfig,
    weight: np.ndarray,
    bias: np.ndarray,
    head_weights: np.ndarray | None = None,
    head_bias: float = 0.0,
) -> tuple[float, dict[str, np.ndarray | float]]:
    """Loss and analytic parameter gradients for one sample."""
    engine = _SampleEngine(sample, config, weight, bias, head_weights, head_bias)
    loss = loss_value(train_config.loss, engine.scores, sample.labels, train_config.temperature)
    dscores = loss_gradient(train_config.loss, engine.scores, sample.labels, train_config.temperature)
    return loss, engine.backward(dscores)


@dataclass(frozen=True)
class FitResult:
    """Trained parameters plus the per-epoch mean loss trace."""

    params: ProjectionParams
    loss_trace: tuple[float, ...]
    steps: int


def fit(
    samples: Iterable[TrainSample],
    config: BiEncoderConfig | CrossEncoderConfig,
    params: ProjectionParams,
    train_config: TrainConfig,
) -> FitResult:
    """Plain SGD over shuffled samples.

    Each step averages gradients over `batch_size` samples and applies one
    update; parameters are stored as float32 after every step. The shuffle
    stream depends only on train_config.seed, so runs are reproducible.
    """
    sample_list = list(samples)
    if not sample_list:
        raise ValueError("no training samples")
    is_cross = isinstance(config, CrossEncoderConfig)
    if is_cross != params.has_head:
        raise ValueError("params do not match the config kind")
    current = params
    rng = SplitMix64(train_config.seed ^ _SHUFFLE_SALT)
    trace: list[float] = []
    steps = 0
    for epoch in range(train_config.epochs):
        order = list(range(len(sample_list)))
        rng.shuffle(order)
        epoch_losses: list[float] = []
        for start in range(0, len(order), train_config.batch_size):
            batch = order[start : start + train_config.batch_size]
            weight = current.weight.astype(np.float64)
            bias = current.bias.astype(np.float64)
            head = None if not is_cross else current.head_weights.astype(np.float64)
            head_bias = 0.0 if not is_cross else float(current.head_bias)
            g_weight = np.zeros_like(weight)
            g_bias = np.zeros_like(bias)
            g_head = None if head is None else np.zeros_like(head)
            g_head_bias = 0.0
            for idx in batch:
                loss, grads = sample_gradients(
                    sample_list[idx], config, train_config, weight, bias, head, head_bias
                )
                if not np.isfinite(loss):
                    raise DivergedError(f"non-finite loss in epoch {epoch}", epoch=epoch)
                epoch_losses.append(loss)
                g_weight += grads["weight"]
                g_bias += grads["bias"]
                if g_head is not None:
                    g_head += grads["head_weights"]
                    g_head_bias += grads["head_bias"]
            scale = train_config.learning_rate / len(batch)
            # a float64 value can be finite yet overflow the float32 cast;
            # that still counts as divergence, not a warning
            with np.errstate(over="ignore"):
                try:
                    current = ProjectionParams(
                        weight=(weight - scale * g_weight).astype(np.float32),
                        bias=(bias - scale * g_bias).astype(np.float32),
                        head_weights=None if g_head is None else (head - scale * g_head).astype(np.float32),
                        head_bias=None if g_head is None else float(np.float32(head_bias - scale * g_head_bias)),
                    )
                except ValueError as exc:
                    raise DivergedError(f"non-finite parameters in epoch {epoch}", epoch=epoch) from exc
            steps += 1
        trace.append(sum(epoch_losses) / len(epoch_losses))
    return FitResult(params=current, loss_trace=tuple(trace), steps=steps)
