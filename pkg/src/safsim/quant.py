"""Integer arithmetic kernel of the accelerator.

Everything here models hardware register semantics: int8 x int8 products are
accumulated into 32-bit registers that wrap on overflow (no saturation), and
results are brought back to int8 by a power-of-two right shift with
round-half-up and clipping.
"""

from __future__ import annotations

from dataclasses import dataclass

INT8_MIN = -128
INT8_MAX = 127
INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1

_MASK32 = (1 << 32) - 1
MAX_SHIFT = 31


def wrap32(x: int) -> int:
    """Reduce x modulo 2**32 into the signed int32 range."""
    v = x & _MASK32
    return v - (1 << 32) if v > INT32_MAX else v


def mac(a: int, w: int, acc: int) -> int:
    """One multiply-accumulate: acc + a*w with wrapping 32-bit arithmetic."""
    return wrap32(acc + a * w)


def clip8(x: int) -> int:
    if x > INT8_MAX:
        return INT8_MAX
    if x < INT8_MIN:
        return INT8_MIN
    return x


def requantize(acc: int, shift: int) -> int:
    """Rescale a 32-bit accumulator value to int8.

    The scale factor is 2**-shift; division becomes an arithmetic right
    shift.  Rounding is half-up, realised in hardware style by adding
    2**(shift-1) (in wrapping 32-bit arithmetic) before the shift.  The
    shifted result is clipped to [-128, 127].  shift == 0 is a plain clip.
    """
    if not 0 <= shift <= MAX_SHIFT:
        raise ValueError(f"shift must be in [0, {MAX_SHIFT}], got {shift}")
    v = wrap32(acc)
    if shift > 0:
        v = wrap32(v + (1 << (shift - 1))) >> shift
    return clip8(v)


@dataclass(frozen=True)
class Lut:
    """256-entry int8 -> int8 lookup table.

    Indexed by the unsigned reinterpretation of the int8 input, i.e. entry
    ``table[x & 0xFF]`` is the output for input x.
    """

    table: tuple

    def __post_init__(self):
        if len(self.table) != 256:
            raise ValueError(f"LUT must have 256 entries, got {len(self.table)}")
        for v in self.table:
            if not INT8_MIN <= v <= INT8_MAX:
                raise ValueError(f"LUT entry {v} outside int8 range")


def nlf_apply(lut: Lut, x: int) -> int:
    """Apply a non-linear function through its lookup table."""
    return lut.table[x & 0xFF]


def make_identity_lut() -> Lut:
    signed = lambda u: u - 256 if u >= 128 else u
    return Lut(tuple(signed(u) for u in range(256)))


def make_relu_lut() -> Lut:
    signed = lambda u: u - 256 if u >= 128 else u
    return Lut(tuple(max(signed(u), 0) for u in range(256)))


def max2(a: int, b: int) -> int:
    """Two-input max, the primitive of the streaming pool unit."""
    return a if a >= b else b
