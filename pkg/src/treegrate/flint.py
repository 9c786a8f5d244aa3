"""Binary32 bit manipulation and the order-preserving integer key transform.

Branch thresholds and feature values are binary32 numbers carried around as
32-bit patterns.  Comparing two such values with IEEE semantics is equivalent
to comparing their *keys* as signed 32-bit integers, where the key of a
non-negative float is its own bit pattern and the key of a negative float is
its bit pattern with the low 31 bits inverted (sign-magnitude order runs
backwards for negatives).  Negative zero is folded onto positive zero before
keying so that IEEE's ``-0.0 == +0.0`` survives the transform.

NaN patterns have no key; callers must route them through missing-value
handling before comparing.
"""

from __future__ import annotations

import enum
import struct

__all__ = [
    "Op",
    "NEG_ZERO_BITS",
    "POS_INF_BITS",
    "NEG_INF_BITS",
    "MAX_FINITE_BITS",
    "MIN_SUBNORMAL_BITS",
    "bits_of_f32",
    "f32_of_bits",
    "f32_round",
    "bits_of_f64",
    "f64_of_bits",
    "is_nan_bits",
    "flint_key",
    "compare_as_int",
]

_PACK_F32 = struct.Struct("<f")
_PACK_U32 = struct.Struct("<I")
_PACK_F64 = struct.Struct("<d")
_PACK_U64 = struct.Struct("<Q")

NEG_ZERO_BITS = 0x8000_0000
POS_INF_BITS = 0x7F80_0000
NEG_INF_BITS = 0xFF80_0000
MAX_FINITE_BITS = 0x7F7F_FFFF
MIN_SUBNORMAL_BITS = 0x0000_0001

_EXP_MASK = 0x7F80_0000
_MANT_MASK = 0x007F_FFFF
_SIGN_MASK = 0x8000_0000


class Op(enum.Enum):
    """Branch comparison operator: value <= threshold or value < threshold."""

    LE = "le"
    LT = "lt"


def bits_of_f32(value: float) -> int:
    """Bit pattern of ``value`` narrowed to binary32 (round to nearest even).

    Values beyond the binary32 range narrow to the matching infinity.
    """
    try:
        return _PACK_U32.unpack(_PACK_F32.pack(value))[0]
    except OverflowError:
        return NEG_INF_BITS if value < 0 else POS_INF_BITS


def f32_of_bits(bits: int) -> float:
    """The binary32 value encoded by ``bits``, widened exactly to a Python float."""
    return _PACK_F32.unpack(_PACK_U32.pack(bits))[0]


def f32_round(value: float) -> float:
    """``value`` rounded to the nearest binary32, returned as a Python float."""
    return f32_of_bits(bits_of_f32(value))


def bits_of_f64(value: float) -> int:
    return _PACK_U64.unpack(_PACK_F64.pack(value))[0]


def f64_of_bits(bits: int) -> float:
    return _PACK_F64.unpack(_PACK_U64.pack(bits))[0]


def is_nan_bits(bits: int) -> bool:
    """True iff ``bits`` encodes a binary32 NaN (all-ones exponent, nonzero mantissa)."""
    return (bits & _EXP_MASK) == _EXP_MASK and (bits & _MANT_MASK) != 0


def flint_key(bits: int) -> int:
    """Signed 32-bit comparison key for a non-NaN binary32 bit pattern.

    Strictly monotone: for non-NaN values a, b (after -0.0 is folded onto
    +0.0), a < b as floats exactly when flint_key(a) < flint_key(b) as
    signed integers, and a == b exactly when the keys are equal.
    """
    if not 0 <= bits <= 0xFFFF_FFFF:
        raise ValueError(f"not a 32-bit pattern: {bits:#x}")
    if (bits & _EXP_MASK) == _EXP_MASK and (bits & _MANT_MASK) != 0:
        raise ValueError("NaN has no comparison key; treat it as a missing value")
    if bits == NEG_ZERO_BITS:
        return 0
    if bits & _SIGN_MASK:
        # Negative: invert low 31 bits, keep the sign bit, read as two's complement.
        return (bits ^ 0x7FFF_FFFF) - 0x1_0000_0000
    return bits


def compare_as_int(value_bits: int, threshold_bits: int, op: Op) -> bool:
    """Integer-key comparison equal to the IEEE float comparison for ``op``.

    Both inputs must be non-NaN binary32 patterns.
    """
    kv = flint_key(value_bits)
    kt = flint_key(threshold_bits)
    return kv <= kt if op is Op.LE else kv < kt
