# tests/test_weight_update.py
import random
from fractions import Fraction

import pytest

from blueprints.weight_update import gen_weight_update
from bnn.bitfloat import BIAS, LEARNING_RATES, MANT_MASK, Fp32Bits, encode, update_weight
from engine.simulator import Simulator
from verify.suites import apply_update


@pytest.fixture(scope="module")
def update_segment():
    return gen_weight_update()


@pytest.fixture(scope="module")
def update_sim(update_segment):
    return Simulator(update_segment.net)


def random_pairs(seed: int, n: int):
    rng = random.Random(seed)
    for _ in range(n):
        w = Fp32Bits(rng.randint(0, 1), rng.randint(110, BIAS), rng.randint(0, MANT_MASK))
        j = rng.choice(LEARNING_RATES) * rng.choice((1, -1))
        yield w, j


@pytest.mark.parametrize("w,j", [
    (Fp32Bits.from_float(0.75), Fraction(1, 10)),
    (Fp32Bits.from_float(-0.1), Fraction(-9, 10)),
    (Fp32Bits.from_float(0.5), Fraction(1, 2)),
    (Fp32Bits.from_float(-0.5), Fraction(1, 2)),
    (Fp32Bits.from_float(1.5), Fraction(-9, 10)),
    (Fp32Bits.from_int(0), Fraction(3, 10)),
    (Fp32Bits.from_float(0.3), Fraction(0)),
])
def test_segment_matches_bit_level_update(update_segment, update_sim, w, j):
    assert apply_update(update_segment, w, j, update_sim) == update_weight(w, j).result


def test_random_pairs_agree(update_segment, update_sim):
    for w, j in random_pairs(7, 30):
        assert apply_update(update_segment, w, j, update_sim) == update_weight(w, j).result, (w.hex(), j)


@pytest.mark.slow
def test_thousand_random_pairs_agree(update_segment, update_sim):
    for w, j in random_pairs(1234, 1000):
        assert apply_update(update_segment, w, j, update_sim) == update_weight(w, j).result, (w.hex(), j)


def ulp_neighbour(j: Fraction, delta: int) -> Fp32Bits:
    return Fp32Bits.from_int(encode(j).to_int() + delta)


# 1 ulp of 0.1 is 2**-27 and of 0.3 is 2**-25
NEAR_CANCELLATIONS = [(ulp_neighbour(Fraction(1, 10), d), Fraction(1, 10)) for d in (1, -1, 3, -3)] + \
                     [(ulp_neighbour(Fraction(3, 10), d), Fraction(3, 10)) for d in (1, -1)]


@pytest.mark.parametrize("w,j", NEAR_CANCELLATIONS)
def test_near_cancellation_normalizes_far(update_segment, update_sim, w, j):
    outcome = update_weight(w, j)
    assert outcome.norm_shifts > 24
    assert apply_update(update_segment, w, j, update_sim) == outcome.result


@pytest.mark.parametrize("w,j", [
    (Fp32Bits(0, 1, 0x2AAAAA), Fraction(1, 2)),
    (Fp32Bits(1, 60, 0x7FFFFF), Fraction(-7, 10)),
    (Fp32Bits(0, 109, 1), Fraction(1, 10)),
    (Fp32Bits(1, 0, 0), Fraction(3, 10)),
    (Fp32Bits(1, 0, 0), Fraction(-9, 10)),
    (Fp32Bits(1, 0, 0), Fraction(0)),
])
def test_tiny_and_negative_zero_weights(update_segment, update_sim, w, j):
    assert apply_update(update_segment, w, j, update_sim) == update_weight(w, j).result
