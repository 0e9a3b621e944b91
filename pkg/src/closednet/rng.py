"""Reproducible 64-bit random streams.

The generator is xoshiro256** (Blackman & Vigna), seeded through the
splitmix64 sequence.  Every draw is pure integer arithmetic followed by a
small set of libm calls (``log``, ``sqrt``, ``pow``), so the compiled kernel
reproduces this module bit for bit on the same platform.

Seed derivation
---------------
A stream is identified by ``(seed, key, rep)``.  Its 64-bit seed is::

    seed ^ mix64(mix64(key + GOLDEN) ^ (rep * GOLDEN))

where ``mix64`` is the splitmix64 output finalizer.  Key 0 is the routing
stream of a replication, key ``j + 1`` is client station ``j``.
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_TWO_M53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """splitmix64 finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, key: int, rep: int) -> int:
    h = mix64(mix64((key + GOLDEN) & MASK64) ^ ((rep * GOLDEN) & MASK64))
    return (seed & MASK64) ^ h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** with the draw helpers used by the simulator."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        x = seed & MASK64
        out = []
        for _ in range(4):
            x = (x + GOLDEN) & MASK64
            out.append(mix64(x))
        self.s0, self.s1, self.s2, self.s3 = out

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        """Uniform on the open interval (0, 1); never returns 0 or 1."""
        return (float(self.next_u64() >> 11) + 0.5) * _TWO_M53

    def exponential(self) -> float:
        return -math.log(self.uniform())

    def normal(self) -> float:
        # Marsaglia polar method, second variate discarded.
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                return u * math.sqrt(-2.0 * math.log(s) / s)

    def gamma(self, shape: float) -> float:
        """Unit-scale gamma variate (Marsaglia-Tsang)."""
        if shape < 1.0:
            g = self.gamma(shape + 1.0)
            return g * (self.uniform() ** (1.0 / shape))
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            z = self.normal()
            v = 1.0 + c * z
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.uniform()
            if u < 1.0 - 0.0331 * z * z * z * z:
                return d * v
            if math.log(u) < 0.5 * z * z + d * (1.0 - v + math.log(v)):
                return d * v

    def choice_cum(self, cum, n: int) -> int:
        """Index of the first cumulative weight exceeding a uniform draw."""
        u = self.uniform()
        for idx in range(n):
            if u < cum[idx]:
                return idx
        return n - 1
