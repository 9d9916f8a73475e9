"""SplitMix64 pseudo-random number generator.

All randomness in this package (campaign sampling, synthetic fixtures) goes
through this generator so that logs and fixtures are bit-reproducible across
runs, platforms and implementations.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 output scrambler (bijective on 64-bit words)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Tiny 64-bit PRNG with a single word of state."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        return mix64(self.state)

    def below(self, n: int) -> int:
        """Uniform-ish draw in [0, n). Modulo bias is < n / 2**64."""
        if n <= 0:
            raise ValueError(f"below() needs a positive bound, got {n}")
        return self.next_u64() % n

    def int8(self, lo: int = -128, hi: int = 127) -> int:
        return lo + self.below(hi - lo + 1)


def stream_seed(seed: int, image_id: int, iteration: int) -> int:
    """Derive an independent per-injection seed from (seed, image, iter).

    The scrambler is bijective, so distinct (image, iter) pairs map to
    distinct seeds for a fixed campaign seed.
    """
    s = mix64((seed + _GAMMA * (1 + image_id)) & _MASK64)
    return mix64((s + _GAMMA * (1 + iteration)) & _MASK64)
