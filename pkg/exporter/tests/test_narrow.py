from __future__ import annotations

import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treegrate_exporter.export import narrow_threshold


def f32_of_bits(bits: int) -> float:
    return struct.unpack("<f", struct.pack("<I", bits))[0]


def bits_of_f32(x: float) -> int:
    return struct.unpack("<I", struct.pack("<f", x))[0]


def oracle_largest_at_most(t: float) -> float:
    """Independent next-down oracle via numpy neighbor stepping."""
    with np.errstate(over="ignore"):
        c = np.float32(t)  # out-of-range doubles cast to infinity
    while float(c) > t:
        c = np.nextafter(c, np.float32("-inf"))
    return float(c)


def oracle_largest_below(t: float) -> float:
    with np.errstate(over="ignore"):
        c = np.float32(t)
    while float(c) >= t:
        c = np.nextafter(c, np.float32("-inf"))
    return float(c)


def test_exactly_representable_le():
    bits, op = narrow_threshold(87.5, "le")
    assert (bits, op) == (0x42AF0000, "le")
    assert f32_of_bits(bits) == 87.5


def test_le_narrows_downward():
    bits, op = narrow_threshold(0.1, "le")
    assert bits == 0x3DCCCCCC  # largest binary32 <= 0.1, from the neighbor oracle
    assert op == "le"
    assert f32_of_bits(bits) == oracle_largest_at_most(0.1)


def test_lt_of_representable_steps_down():
    bits, op = narrow_threshold(1.0, "lt")
    assert (bits, op) == (0x3F7FFFFF, "le")
    assert f32_of_bits(bits) == oracle_largest_below(1.0)


def test_lt_of_unrepresentable_equals_le():
    assert narrow_threshold(0.1, "lt") == narrow_threshold(0.1, "le")


def test_negative_thresholds():
    for t in (-0.1, -87.5, -1e-30, -3.9e38):
        bits, _ = narrow_threshold(t, "le")
        assert f32_of_bits(bits) == oracle_largest_at_most(t)


def test_zero_edge_cases():
    bits, _ = narrow_threshold(-0.0, "le")
    assert bits == 0  # canonical +0.0, same comparison outcomes
    bits, _ = narrow_threshold(0.0, "lt")
    assert bits == 0x80000001  # largest value strictly below zero
    bits, _ = narrow_threshold(5e-324, "le")  # smallest positive double
    assert f32_of_bits(bits) == 0.0


def test_beyond_binary32_range():
    bits, _ = narrow_threshold(1e39, "le")
    assert bits == 0x7F7FFFFF  # max finite binary32


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        narrow_threshold(float("inf"), "le")
    with pytest.raises(ValueError):
        narrow_threshold(float("nan"), "le")
    with pytest.raises(ValueError):
        narrow_threshold(1.0, "ge")


finite_doubles = st.floats(allow_nan=False, allow_infinity=False)
binary32_values = st.floats(allow_nan=False, allow_infinity=False, width=32)


@given(finite_doubles, binary32_values)
def test_le_decision_preserved(t, x):
    bits, op = narrow_threshold(t, "le")
    assert op == "le"
    assert (x <= t) == (x <= f32_of_bits(bits))


@given(finite_doubles, binary32_values)
def test_lt_decision_preserved(t, x):
    bits, _ = narrow_threshold(t, "lt")
    assert (x < t) == (x <= f32_of_bits(bits))


@given(finite_doubles)
def test_narrowed_value_matches_oracle(t):
    bits, _ = narrow_threshold(t, "le")
    assert f32_of_bits(bits) == oracle_largest_at_most(t)
