"""Deterministic random number generation.

The generator is xoshiro256++ (Blackman & Vigna, 2019), seeded through
splitmix64. Both are fixed here and must never change: golden-file tests
depend on bit-exact streams across platforms. Gaussian variates come from
the Box-Muller transform applied to 53-bit uniforms.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53


class Rng:
    """xoshiro256++ stream, single-owner. Same seed, same stream, forever."""

    def __init__(self, seed: int):
        self.seed = seed
        s = seed & _MASK
        state = []
        for _ in range(4):
            s = (s + 0x9E3779B97F4A7C15) & _MASK
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
            state.append(z ^ (z >> 31))
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        x = (s0 + s3) & _MASK
        result = (((x << 23) | (x >> 41)) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return result

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles in [0, 1) with 53-bit resolution."""
        if n < 0:
            raise ValueError("negative draw count")
        s0, s1, s2, s3 = self._s
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            x = (s0 + s3) & _MASK
            out[i] = ((((x << 23) | (x >> 41)) + s0) & _MASK) >> 11
            t = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        out *= _INV_2_53
        return out

    def gaussians(self, n: int) -> np.ndarray:
        """n i.i.d. standard normals via Box-Muller; draws ceil(n/2) pairs."""
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        u1 = u[0::2]
        u2 = u[1::2]
        # shift u1 into (0, 1] so the log is finite
        r = np.sqrt(-2.0 * np.log1p(u1 - 1.0 + _INV_2_53))
        theta = (2.0 * math.pi) * u2
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]
