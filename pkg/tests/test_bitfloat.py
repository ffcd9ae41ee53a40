# tests/test_bitfloat.py
import random
from fractions import Fraction

import pytest

from bnn.bitfloat import (
    BIAS,
    MANT_MASK,
    LEARNING_RATES,
    Comparison,
    Fp32Bits,
    Operation,
    RangeError,
    align,
    compare_magnitude,
    decode,
    encode,
    native_update,
    resolve_sign_op,
    update_weight,
)

TOLERANCE = Fraction(1, 1 << 22)


def random_weight(rng: random.Random) -> Fp32Bits:
    return Fp32Bits(rng.randint(0, 1), rng.randint(100, BIAS), rng.randint(0, MANT_MASK))


def random_j(rng: random.Random) -> Fraction:
    return rng.choice(LEARNING_RATES) * rng.choice((1, -1))


def test_encode_truncates_toward_zero():
    tenth = encode(Fraction(1, 10))
    assert tenth.hex() == "3dcccccc"
    assert decode(tenth) < Fraction(1, 10)
    assert encode(Fraction(-3, 4)) == Fp32Bits.from_float(-0.75)


def test_encode_rejects_out_of_range():
    with pytest.raises(RangeError):
        encode(2)
    with pytest.raises(RangeError):
        Fp32Bits.from_hex("40000000")


def test_compare_and_resolve():
    w, j = Fp32Bits.from_float(0.5), Fp32Bits.from_float(-0.75)
    assert compare_magnitude(w, j) is Comparison.W_L
    assert resolve_sign_op(Comparison.W_L, 0, 1) == (0, Operation.ADD)
    assert resolve_sign_op(Comparison.W_L, 0, 0) == (1, Operation.SUB)
    assert resolve_sign_op(Comparison.SAME, 1, 1) == (0, Operation.SUB)


def test_align_shifts_by_exponent_distance():
    fixed, shifts = align(Fp32Bits.from_float(0.25), 24)
    assert shifts == 2
    assert fixed.value == Fraction(1, 4)
    zero, shifts = align(Fp32Bits.from_int(0), 24)
    assert zero.significand == 0 and shifts == 0


def test_zero_j_bypasses():
    w = Fp32Bits.from_float(0.3)
    outcome = update_weight(w, 0)
    assert outcome.op is Operation.ZERO_BYPASS
    assert outcome.result == w


def test_equal_magnitudes_cancel_to_positive_zero():
    w = encode(Fraction(1, 2))
    assert update_weight(w, Fraction(1, 2)).result == Fp32Bits.from_int(0)
    negative = Fp32Bits(1, 126, 0)
    assert update_weight(negative, Fraction(-1, 2)).result == Fp32Bits.from_int(0)


def test_opposite_signs_add():
    outcome = update_weight(Fp32Bits.from_float(-0.5), Fraction(1, 2))
    assert outcome.op is Operation.ADD
    assert outcome.result == Fp32Bits.from_float(-1.0)


def test_overflow_saturates():
    outcome = update_weight(Fp32Bits.from_float(1.5), Fraction(-9, 10))
    assert outcome.saturated
    assert outcome.result == Fp32Bits(0, BIAS, MANT_MASK)


def test_rejects_j_outside_the_rate_grid():
    with pytest.raises(RangeError):
        update_weight(Fp32Bits.from_float(0.5), Fraction(1, 3))


def test_randomized_update_matches_exact_difference():
    rng = random.Random(2024)
    checked = 0
    for _ in range(10_000):
        w, j = random_weight(rng), random_j(rng)
        outcome = update_weight(w, j)
        if outcome.saturated:
            continue
        exact = decode(w) - decode(encode(j))
        assert abs(decode(outcome.result) - exact) <= TOLERANCE, (w, j)
        checked += 1
    assert checked > 9_000


def test_native_update_close_to_exact():
    w = Fp32Bits.from_float(0.75)
    native = native_update(w, Fraction(1, 10))
    exact = update_weight(w, Fraction(1, 10)).result
    assert abs(native.to_float() - exact.to_float()) <= 2 ** -22
