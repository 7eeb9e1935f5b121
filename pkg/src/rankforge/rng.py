"""Deterministic randomness: FNV-1a hashing and a SplitMix64 stream.

Embeddings, parameter initialization, shuffling, and sampling must reproduce
bit-for-bit across platforms and library versions, so nothing here delegates
to an external RNG implementation. All arithmetic is unsigned 64-bit with
wrap-around.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

import numpy as np

_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB

# 2**-53; top 53 bits of a u64 scaled by this give a uniform double in [0, 1).
_U53_INV = 1.0 / 9007199254740992.0

T = TypeVar("T")


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def hash_token(token: str) -> int:
    """Stable 64-bit id of a token (FNV-1a over its UTF-8 bytes)."""
    return fnv1a64(token.encode("utf-8"))


def salt(name: bytes) -> int:
    """Derive a fixed stream salt from a short label."""
    return fnv1a64(name)


def _finalize(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_SM_MUL1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_SM_MUL2)
    return z ^ (z >> np.uint64(31))


def unit_block(key: int, count: int) -> np.ndarray:
    """`count` doubles in [0, 1) from the SplitMix64 stream keyed by `key`.

    Element i equals the (i+1)-th draw of ``SplitMix64(key)``, so block and
    sequential access agree.
    """
    with np.errstate(over="ignore"):
        idx = np.arange(1, count + 1, dtype=np.uint64)
        states = np.uint64(key & _MASK64) + idx * np.uint64(_SM_GAMMA)
        z = _finalize(states)
    return (z >> np.uint64(11)).astype(np.float64) * _U53_INV


def unit_matrix(keys: Sequence[int], count: int) -> np.ndarray:
    """Stack of `unit_block(key, count)` rows, one per key."""
    with np.errstate(over="ignore"):
        karr = np.array([k & _MASK64 for k in keys], dtype=np.uint64)
        idx = np.arange(1, count + 1, dtype=np.uint64)
        states = karr[:, None] + idx[None, :] * np.uint64(_SM_GAMMA)
        z = _finalize(states)
    return (z >> np.uint64(11)).astype(np.float64) * _U53_INV


class SplitMix64:
    """Sequential SplitMix64 generator; the streaming twin of `unit_block`."""

    def __init__(self, key: int):
        self._state = key & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _SM_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _SM_MUL1) & _MASK64
        z = ((z ^ (z >> 27)) * _SM_MUL2) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _U53_INV

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo bias is below n / 2**64."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: Sequence[T], k: int) -> list[T]:
        """k distinct items drawn without replacement (partial Fisher-Yates)."""
        if k < 0 or k > len(items):
            raise ValueError(f"cannot sample {k} of {len(items)} items")
        pool = list(items)
        for i in range(k):
            j = i + self.randint(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
