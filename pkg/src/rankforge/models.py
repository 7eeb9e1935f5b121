"""Model objects: a config, its parameters, and a display name.

The name becomes the run tag when the model produces or re-ranks a run, so it
must be whitespace-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .encoders import (
    BiEncoderConfig,
    CrossEncoderConfig,
    ProjectionParams,
    encode_bi,
    init_bi_params,
    init_cross_params,
)
from .similarity import score_pairs
from .types import DenseEmbedding, MultiEmbedding, SparseEmbedding


def _check_name(name: str) -> None:
    if not name or any(ch.isspace() for ch in name):
        raise ValueError(f"model name must be non-empty without whitespace: {name!r}")


@dataclass(frozen=True)
class BiEncoder:
    """A bi-encoder: independent query/doc encoders plus a similarity."""

    config: BiEncoderConfig
    params: ProjectionParams
    name: str = "bi-encoder"

    def __post_init__(self):
        _check_name(self.name)
        if self.params.has_head:
            raise ValueError("bi-encoder params must not include a head")
        if self.params.projection_dim != self.config.projection_dim:
            raise ValueError(
                f"params project to {self.params.projection_dim}, "
                f"config wants {self.config.projection_dim}"
            )

    def encode_query(self, text: str) -> DenseEmbedding | MultiEmbedding | SparseEmbedding:
        return encode_bi(text, self.config, self.params, side="query")

    def encode_doc(self, text: str) -> DenseEmbedding | MultiEmbedding | SparseEmbedding:
        return encode_bi(text, self.config, self.params, side="doc")

    def score(self, query: str, docs: Sequence[str]) -> list[float]:
        return score_pairs(query, docs, self.config, self.params)


@dataclass(frozen=True)
class CrossEncoder:
    """A cross-encoder: jointly scores (query, doc) text pairs."""

    config: CrossEncoderConfig
    params: ProjectionParams
    name: str = "cross-encoder"

    def __post_init__(self):
        _check_name(self.name)
        if not self.params.has_head:
            raise ValueError("cross-encoder params must include a head")
        if self.params.projection_dim != self.config.embedding_dim:
            raise ValueError(
                f"params project to {self.params.projection_dim}, "
                f"config wants {self.config.embedding_dim}"
            )

    def score(self, query: str, docs: Sequence[str]) -> list[float]:
        return score_pairs(query, docs, self.config, self.params)


Model = Union[BiEncoder, CrossEncoder]


def new_bi_encoder(
    config: BiEncoderConfig, backbone_dim: int = 64, name: str = "bi-encoder"
) -> BiEncoder:
    """Bi-encoder with freshly initialized parameters (seeded by the config)."""
    return BiEncoder(config=config, params=init_bi_params(config, backbone_dim), name=name)


def new_cross_encoder(
    config: CrossEncoderConfig, backbone_dim: int = 64, name: str = "cross-encoder"
) -> CrossEncoder:
    """Cross-encoder with freshly initialized parameters (seeded by the config)."""
    return CrossEncoder(config=config, params=init_cross_params(config, backbone_dim), name=name)
