"""Deterministic random number generation.

Every stochastic step in the package (parameter init, dataset synthesis,
augmentation, epoch shuffles) draws from :class:`SeededRng` so that a seed
fully determines the run on every platform. The generator is xorshift64*
seeded through one splitmix64 mixing step.

Constants (all fixed, part of the reproducibility contract):

* splitmix64 increment ``0x9E3779B97F4A7C15`` and mixers ``0xBF58476D1CE4E5B9``,
  ``0x94D049BB133111EB``
* xorshift64* shifts ``12, 25, 27`` and multiplier ``0x2545F4914F6CDD1D``
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_XSTAR_MULT = 0x2545F4914F6CDD1D
# fallback state when splitmix64 maps a seed to 0 (xorshift state must be nonzero)
_NONZERO_STATE = _GOLDEN


def splitmix64(x: int) -> int:
    """One splitmix64 step: mix ``x + GOLDEN`` into a 64-bit output."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """xorshift64* generator with splitmix64 seeding.

    Same seed, same sequence, on every platform; state is a single 64-bit
    word. Not suitable for cryptography.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = splitmix64(self.seed)
        if self._state == 0:
            self._state = _NONZERO_STATE

    def next_u64(self) -> int:
        """Next raw 64-bit output."""
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * _XSTAR_MULT) & _MASK64

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, lo: float, hi: float) -> float:
        """Uniform float in [lo, hi)."""
        return lo + (hi - lo) * self.uniform()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) via the multiply-shift reduction."""
        if n <= 0:
            raise ValueError(f"randint bound must be positive, got {n}")
        return (self.next_u64() * n) >> 64

    def normal(self) -> float:
        """Standard normal draw (Box-Muller; consumes exactly two uniforms)."""
        u1 = 1.0 - self.uniform()  # (0, 1], keeps log() finite
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def spawn(self, index: int) -> "SeededRng":
        """Child generator for stream ``index``.

        Children are a pure function of (seed, index), so per-record
        generators produce the same corpus whether records are processed
        serially or in parallel.
        """
        return SeededRng((self.seed + (index + 1) * _GOLDEN) & _MASK64)
