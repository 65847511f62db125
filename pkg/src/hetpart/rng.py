"""Deterministic, platform-independent random streams.

All randomness in the toolkit flows through SplitMix64 (Steele, Lea &
Flood 2014) applied to an affine counter: output ``j`` of stream ``seed``
is ``mix64(seed + (j + 1) * GOLDEN)``.  This is a pure function of
``(seed, j)``, so streams are reproducible bit-for-bit across platforms,
numpy versions and chunking schemes.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_DOUBLE_SCALE = float(2.0**-53)


def mix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer: bijective 64-bit mix of ``x``."""
    z = np.uint64(x) if np.isscalar(x) else x.astype(np.uint64, copy=True)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def raw_stream(seed: int, start: int, count: int) -> np.ndarray:
    """``count`` raw 64-bit outputs of stream ``seed`` beginning at index ``start``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * GOLDEN)


def doubles(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Uniform doubles in [0, 1): the top 53 bits of each raw output."""
    return (raw_stream(seed, start, count) >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE


def permutation(seed: int, n: int) -> np.ndarray:
    """Deterministic permutation of 0..n-1: argsort of per-index random keys.

    Key collisions fall back to index order (stable sort), which keeps the
    result well defined.
    """
    keys = raw_stream(seed, 0, n)
    return np.argsort(keys, kind="stable")
