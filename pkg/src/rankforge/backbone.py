"""Reference text backbone: tokenization and deterministic token features.

The backbone is non-contextual: a token's feature row depends only on the
token string, the seed, and the dimension. Every downstream quantity can
therefore be recomputed by hand, which is what the test oracles do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import hash_token, unit_matrix


def tokenize(text: str) -> list[str]:
    """Lowercased maximal runs of alphanumeric characters, in input order."""
    tokens: list[str] = []
    current: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


@dataclass(frozen=True, eq=False)
class TokenFeatures:
    """Backbone output: tokens plus their (num_tokens, dim) float32 rows."""

    tokens: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.tokens):
            raise ValueError("one feature row per token required")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def backbone_features(tokens: list[str], seed: int, dim: int) -> TokenFeatures:
    """Deterministic feature rows for a token sequence.

    Each row is drawn from the SplitMix64 stream keyed by
    ``seed XOR fnv1a64(token)``, mapped to [-1, 1) and scaled by 1/sqrt(dim),
    so identical tokens always share a row and rows have unit expected norm.
    """
    if dim < 1:
        raise ValueError(f"backbone dim must be positive, got {dim}")
    keys = [seed ^ hash_token(tok) for tok in tokens]
    if keys:
        rows = (2.0 * unit_matrix(keys, dim) - 1.0) / math.sqrt(dim)
        matrix = rows.astype(np.float32)
    else:
        matrix = np.zeros((0, dim), dtype=np.float32)
    matrix = np.ascontiguousarray(matrix)
    matrix.flags.writeable = False
    return TokenFeatures(tokens=tuple(tokens), matrix=matrix)
