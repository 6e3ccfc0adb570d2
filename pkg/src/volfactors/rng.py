"""Deterministic counter-based random number generation.

All randomness in this package flows through :class:`Rng`, a SplitMix64
generator driven in counter mode: draw ``i`` of the stream with seed ``s``
is a pure function of ``(s, i)``, so streams are reproducible from a single
integer seed regardless of platform or process history.

Update equations (every operation modulo 2**64):

    state(i) = s + (i + 1) * 0x9E3779B97F4A7C15
    z = state(i)
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB
    out(i) = z XOR (z >> 31)

Uniform doubles keep the top 53 bits: ``u = (out >> 11) * 2**-53``, giving
values in [0, 1). Standard normals come from the Box-Muller transform on
consecutive uniform pairs; ``normal`` therefore consumes ``2 * ceil(n / 2)``
counter positions. The mapping from counters to floats is fixed, but the
stream position after a call depends on the sequence of calls, as with any
stateful generator.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


class Rng:
    """SplitMix64 stream identified by an integer seed."""

    def __init__(self, seed: int):
        self._seed = np.uint64(int(seed) & _MASK)
        self._counter = 0

    def u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        if n < 0:
            raise ValueError("n must be non-negative")
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            z = self._seed + idx * _GOLDEN
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            return z ^ (z >> np.uint64(31))

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1)."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, shape: int | tuple[int, ...]) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        if isinstance(shape, int):
            n, out_shape = shape, (shape,)
        else:
            out_shape = tuple(shape)
            n = int(np.prod(out_shape)) if out_shape else 1
        m = (n + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        # 1 - u1 > 0 always (u1 < 1), so the log is finite.
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = (2.0 * np.pi) * u2
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(out_shape)

    def uniform_range(self, lo: float, hi: float, shape: int | tuple[int, ...]) -> np.ndarray:
        """Uniform draws on [lo, hi)."""
        if isinstance(shape, int):
            n, out_shape = shape, (shape,)
        else:
            out_shape = tuple(shape)
            n = int(np.prod(out_shape)) if out_shape else 1
        return (lo + (hi - lo) * self.uniform(n)).reshape(out_shape)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) by sorting a uniform draw."""
        return np.argsort(self.uniform(n), kind="stable")

    def integers(self, lo: int, hi: int, n: int) -> np.ndarray:
        """``n`` integers uniform on [lo, hi) (modulo reduction; fine for test-scale use)."""
        if hi <= lo:
            raise ValueError("hi must exceed lo")
        span = np.uint64(hi - lo)
        return (self.u64(n) % span).astype(np.int64) + lo
