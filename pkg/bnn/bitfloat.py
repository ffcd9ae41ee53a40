# bnn/bitfloat.py
"""
Bit-level binary32 values and the fixed-point weight-update arithmetic.

The update pipeline works on a fixed-point grid whose integer bit sits at
scale 2^0: a guard bit, the integer (implicit-1) bit and 47 fraction bits
(23 mantissa bits followed by 24 sticky bits). Results are truncated
toward zero and saturate at 2 - 2^-23 when the guard bit is set.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

BIAS = 127
MANT_BITS = 23
MANT_MASK = (1 << MANT_BITS) - 1
FRACTION_BITS = 47
INT_POS = FRACTION_BITS
GUARD_POS = FRACTION_BITS + 1
W_STICKY = 24
J_STICKY = 4
MAX_MAGNITUDE = Fraction(2) - Fraction(1, 1 << MANT_BITS)

LEARNING_RATES: Tuple[Fraction, ...] = tuple(Fraction(k, 10) for k in range(1, 10))
J_VALUES = frozenset([Fraction(0)] + [s * r for r in LEARNING_RATES for s in (1, -1)])

Rational = Union[Fraction, int, str]


class RangeError(ValueError):
    """Value outside the representable weight range (|v| >= 2, NaN, Inf)."""


class Comparison(str, Enum):
    W_G = "W_G"
    W_L = "W_L"
    SAME = "Same"


class Operation(str, Enum):
    ADD = "add"
    SUB = "sub"
    ZERO_BYPASS = "zero-bypass"


@dataclass(frozen=True)
class Fp32Bits:
    """IEEE-754 binary32 fields restricted to magnitudes below 2 (bit 30 clear)."""
    sign: int
    exponent: int
    mantissa: int

    def __post_init__(self):
        if self.sign not in (0, 1):
            raise RangeError(f"sign bit must be 0 or 1, got {self.sign}")
        if not 0 <= self.exponent <= BIAS:
            raise RangeError(f"exponent {self.exponent} outside 0..127 (magnitude must stay below 2)")
        if not 0 <= self.mantissa <= MANT_MASK:
            raise RangeError(f"mantissa {self.mantissa:#x} does not fit 23 bits")

    @classmethod
    def from_int(cls, value: int) -> "Fp32Bits":
        if not 0 <= value < (1 << 32):
            raise RangeError(f"{value:#x} is not a 32-bit pattern")
        if value & (1 << 30):
            raise RangeError(f"{value:#010x} has bit 30 set (magnitude >= 2, NaN or Inf)")
        return cls(value >> 31, (value >> MANT_BITS) & 0xFF, value & MANT_MASK)

    @classmethod
    def from_hex(cls, text: str) -> "Fp32Bits":
        return cls.from_int(int(text, 16))

    @classmethod
    def from_float(cls, value: float) -> "Fp32Bits":
        return cls.from_int(struct.unpack(">I", struct.pack(">f", value))[0])

    def to_int(self) -> int:
        return (self.sign << 31) | (self.exponent << MANT_BITS) | self.mantissa

    def to_float(self) -> float:
        return struct.unpack(">f", struct.pack(">I", self.to_int()))[0]

    def hex(self) -> str:
        return f"{self.to_int():08x}"

    def bit(self, position: int) -> int:
        return (self.to_int() >> position) & 1

    @property
    def is_zero(self) -> bool:
        return self.exponent == 0 and self.mantissa == 0

    @property
    def is_subnormal(self) -> bool:
        return self.exponent == 0 and self.mantissa != 0

    def __str__(self) -> str:
        return f"0x{self.hex()} ({self.to_float()!r})"


POSITIVE_ZERO = Fp32Bits(0, 0, 0)


@dataclass(frozen=True)
class FixedPoint:
    """Sign and magnitude on the exponent-0 grid: value = sign * significand / 2^47."""
    sign: int
    significand: int

    @property
    def guard(self) -> int:
        return (self.significand >> GUARD_POS) & 1

    @property
    def integer(self) -> int:
        return (self.significand >> INT_POS) & 1

    @property
    def fraction(self) -> int:
        return self.significand & ((1 << FRACTION_BITS) - 1)

    @property
    def value(self) -> Fraction:
        return self.sign * Fraction(self.significand, 1 << FRACTION_BITS)

    def fraction_bit(self, i: int) -> int:
        """Fraction bit i (1-based, i=1 is worth 2^-1)."""
        return (self.significand >> (FRACTION_BITS - i)) & 1


@dataclass(frozen=True)
class Normalized:
    mantissa: int
    shifts: int
    zero: bool


@dataclass(frozen=True)
class UpdateOutcome:
    result: Fp32Bits
    cmp: Comparison
    op: Operation
    align_shifts_w: int
    align_shifts_j: int
    norm_shifts: int
    saturated: bool


def decode(b: Fp32Bits) -> Fraction:
    sign = -1 if b.sign else 1
    if b.exponent == 0:
        return sign * Fraction(b.mantissa, 1 << (MANT_BITS + BIAS - 1))
    return sign * Fraction((1 << MANT_BITS) | b.mantissa, 1 << MANT_BITS) * Fraction(2) ** (b.exponent - BIAS)


def encode(v: Rational) -> Fp32Bits:
    """Nearest binary32 toward zero; magnitudes below the normal range flush to a signed zero."""
    v = Fraction(v)
    if abs(v) >= 2:
        raise RangeError(f"{v} is outside (-2, 2)")
    sign = 1 if v < 0 else 0
    mag = abs(v)
    if mag == 0:
        return POSITIVE_ZERO
    e = mag.numerator.bit_length() - mag.denominator.bit_length()
    if Fraction(2) ** e > mag:
        e -= 1
    if e < 1 - BIAS:
        return Fp32Bits(sign, 0, 0)
    mantissa = int((mag / Fraction(2) ** e - 1) * (1 << MANT_BITS))
    return Fp32Bits(sign, e + BIAS, mantissa)


def compare_magnitude(w: Fp32Bits, j: Fp32Bits) -> Comparison:
    """Bitwise comparison of bits 30..0, most significant first."""
    a, b = w.to_int() & 0x7FFFFFFF, j.to_int() & 0x7FFFFFFF
    if a > b:
        return Comparison.W_G
    if a < b:
        return Comparison.W_L
    return Comparison.SAME


def resolve_sign_op(cmp: Comparison, w_sign: int, j_sign: int) -> Tuple[int, Operation]:
    """Sign and magnitude operation of W - J."""
    if w_sign != j_sign:
        return w_sign, Operation.ADD
    if cmp is Comparison.W_G:
        return w_sign, Operation.SUB
    if cmp is Comparison.W_L:
        return 1 - w_sign, Operation.SUB
    return 0, Operation.SUB


def align(b: Fp32Bits, sticky_budget: int) -> Tuple[FixedPoint, int]:
    """
    Place the significand (implicit 1 included) on the exponent-0 grid.

    Returns the aligned value and the number of single-bit shifts
    (127 - exponent). Bits shifted past the sticky budget are discarded.
    An exponent field of 0 aligns to zero with no shifts.
    """
    if not 0 <= sticky_budget <= W_STICKY:
        raise ValueError(f"sticky budget must be within 0..{W_STICKY}")
    sign = -1 if b.sign else 1
    if b.exponent == 0:
        return FixedPoint(sign, 0), 0
    shifts = BIAS - b.exponent
    significand = (((1 << MANT_BITS) | b.mantissa) << sticky_budget) >> shifts
    return FixedPoint(sign, significand << (W_STICKY - sticky_budget)), shifts


def add_magnitudes(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    """Magnitude sum; the guard bit may end up set (the caller saturates)."""
    return FixedPoint(1, a.significand + b.significand)


def sub_magnitudes(larger: FixedPoint, smaller: FixedPoint) -> FixedPoint:
    if larger.significand < smaller.significand:
        raise ValueError("sub_magnitudes needs |larger| >= |smaller|")
    return FixedPoint(1, larger.significand - smaller.significand)


def normalize(f: FixedPoint) -> Normalized:
    """Left-shift until the integer bit holds 1; mantissa truncated to 23 bits."""
    significand = f.significand
    if significand >> GUARD_POS:
        raise ValueError("guard bit set, saturate before normalizing")
    if significand == 0:
        return Normalized(0, 0, True)
    shifts = INT_POS - (significand.bit_length() - 1)
    significand <<= shifts
    mantissa = (significand >> (FRACTION_BITS - MANT_BITS)) & MANT_MASK
    return Normalized(mantissa, shifts, False)


def new_exponent(norm_shifts: int) -> int:
    return BIAS - norm_shifts


def check_jvalue(j_value: Rational) -> Fraction:
    j = Fraction(j_value)
    if j not in J_VALUES:
        raise RangeError(f"J value {j} is not 0 or a multiple of 0.1 within 0.9")
    return j


def jvalue(eta: Rational, grad: int) -> Fraction:
    """The update amount eta * dL/dW_r for a gradient in {-1, 0, 1}."""
    return check_jvalue(Fraction(eta) * grad)


def update_weight(w: Fp32Bits, j_value: Rational) -> UpdateOutcome:
    """W - J through the fixed-point pipeline the weight-update net implements."""
    j_value = check_jvalue(j_value)
    if j_value == 0:
        return UpdateOutcome(w, compare_magnitude(w, POSITIVE_ZERO), Operation.ZERO_BYPASS, 0, 0, 0, False)
    j = encode(j_value)
    cmp = compare_magnitude(w, j)
    sign, op = resolve_sign_op(cmp, w.sign, j.sign)
    wf, shifts_w = align(w, W_STICKY)
    jf, shifts_j = align(j, J_STICKY)
    if op is Operation.ADD:
        raw = add_magnitudes(wf, jf)
    elif cmp is Comparison.W_L:
        raw = sub_magnitudes(jf, wf)
    else:
        raw = sub_magnitudes(wf, jf)
    if raw.guard:
        logger.warning(f"weight update {w} - {j_value} overflowed, saturating")
        result = Fp32Bits(sign, BIAS, MANT_MASK)
        return UpdateOutcome(result, cmp, op, shifts_w, shifts_j, 0, True)
    norm = normalize(raw)
    if norm.zero:
        result = POSITIVE_ZERO
    else:
        result = Fp32Bits(sign, new_exponent(norm.shifts), norm.mantissa)
    return UpdateOutcome(result, cmp, op, shifts_w, shifts_j, norm.shifts, False)


def native_update(w: Fp32Bits, j_value: Rational) -> Fp32Bits:
    """W - J in hardware binary32 (round to nearest), saturated to the weight range."""
    result = np.float32(w.to_float()) - np.float32(float(Fraction(j_value)))
    limit = np.float32(float(MAX_MAGNITUDE))
    if abs(result) > limit:
        logger.warning(f"native update {w} - {j_value} overflowed, saturating")
        result = np.copysign(limit, result)
    return Fp32Bits.from_float(float(result))
