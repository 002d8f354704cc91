"""Deterministic random numbers built on SplitMix64.

The whole package draws randomness from this one generator so that runs are
reproducible bit-for-bit across platforms.  SplitMix64 (Steele, Lea &
Flood, 2014) is a counter-based generator: draw i from seed s is
``mix64(s + (i + 1) * GOLDEN_GAMMA)`` with all arithmetic mod 2**64.  That
makes bulk generation a vectorised numpy expression while the scalar path
produces the identical stream.

Seeds for the different random duties of a run (weight init, train/val
split, per-epoch shuffling, dropout, synthetic data) are fanned out from
the single user-facing seed with `derive_seed`, so changing one duty's
consumption pattern never perturbs the others.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# 2**-53, the spacing used to map 53 random bits onto [0, 1).
_DOUBLE_UNIT = 1.0 / (1 << 53)


def _mix64(z: int) -> int:
    """Finalising mixer of SplitMix64 on a Python int (mod 2**64)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    """Vectorised `_mix64` on a uint64 array (wrapping multiplies)."""
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX_A)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


def derive_seed(master: int, label: str) -> int:
    """Derive an independent 64-bit seed from `master` and a duty label.

    The label is hashed with FNV-1a and folded into the master seed through
    the SplitMix64 finaliser, so distinct labels give unrelated streams.
    """
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return _mix64((master & MASK64) ^ h)


class SplitMix64:
    """Counter-based SplitMix64 stream.

    Scalar draws and vectorised `fill_*` draws advance the same counter, so
    any interleaving of the two produces one well-defined stream.
    """

    def __init__(self, seed: int):
        self._seed = seed & MASK64
        self._count = 0

    def next_u64(self) -> int:
        self._count += 1
        return _mix64(self._seed + self._count * GOLDEN_GAMMA)

    def next_double(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _DOUBLE_UNIT

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.next_double()

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by the multiply-shift reduction.

        Bias is O(bound / 2**64), negligible for the index ranges used here.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.next_u64() * bound) >> 64

    def fill_u64(self, n: int) -> np.ndarray:
        """Next `n` raw draws as a uint64 array."""
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        z = np.uint64(self._seed) + idx * np.uint64(GOLDEN_GAMMA)
        return _mix64_np(z)

    def fill_uniform(self, n: int, low: float = 0.0,
                     high: float = 1.0) -> np.ndarray:
        """Next `n` uniforms in [low, high) as a float64 array."""
        bits = self.fill_u64(n) >> np.uint64(11)
        u = bits.astype(np.float64) * _DOUBLE_UNIT
        return low + (high - low) * u

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n) as an int64 array."""
        order = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order
