"""Deterministic counter-based random streams.

A stream is (seed, counter): raw 64-bit words come from splitmix64 applied
to seed + k*golden for k = counter, counter+1, .... Uniforms are the top 53
bits; Gaussians are Box-Muller pairs over the uniform stream. Identical
seeds therefore replay bit-identical streams regardless of platform or
numpy version, and noise used anywhere in the system can be regenerated
exactly.
"""

from __future__ import annotations

import math

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_U53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


def _mix(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps modulo 2**64 by design
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def mix64(value: int) -> int:
    """One splitmix64 finalizer round on a single 64-bit value."""
    return int(_mix(np.uint64(value & 0xFFFFFFFFFFFFFFFF)))


class SeededRng:
    """Replayable random stream; never thread-shared, spawn children instead."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.counter = int(counter)

    def _words(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return _mix(np.uint64(self.seed) + (ks + np.uint64(1)) * _GOLDEN)

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniforms in [0, 1)."""
        if shape is None:
            return float(self._words(1)[0] >> np.uint64(11)) * _U53
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self._words(n) >> np.uint64(11)).astype(np.float64) * _U53
        return u.reshape(shape)

    def normal(self, shape=None) -> np.ndarray | float:
        """Standard Gaussians via Box-Muller over the uniform stream."""
        scalar = shape is None
        shape = (1,) if scalar else ((shape,) if isinstance(shape, int) else tuple(shape))
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        w = self._words(2 * m)
        # u1 in (0, 1] keeps the log finite
        u1 = ((w[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53
        u2 = (w[m:] >> np.uint64(11)).astype(np.float64) * _U53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = _TWO_PI * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return float(z[0]) if scalar else z.reshape(shape)

    def integers(self, low: int, high: int, shape=None):
        """Integers in [low, high)."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        span = high - low
        u = self.uniform(shape)
        return low + np.minimum(np.floor(u * span), span - 1).astype(np.int64) if shape is not None \
            else low + min(int(u * span), span - 1)

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def shuffle(self, values: list) -> list:
        perm = self.permutation(len(values))
        return [values[i] for i in perm]

    def spawn(self, key: int) -> "SeededRng":
        """Independent child stream; deterministic in (self.seed, key)."""
        child = mix64(self.seed ^ mix64((int(key) + 1) * 0x9E3779B97F4A7C15))
        return SeededRng(child)
