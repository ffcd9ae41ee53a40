# blueprints/tables.py
"""
Finite-domain function tables for the arithmetic of the BNN.

Every value flowing through the net lives in a small exact domain, so each
operation is a table from input combinations to an output value; the
mapper generator turns a table into one transition per row.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, Mapping, Sequence, Tuple

from bnn.bitfloat import J_VALUES, LEARNING_RATES


@dataclass(frozen=True)
class ValueDomain:
    values: Tuple[Fraction, ...]

    def __post_init__(self):
        values = tuple(Fraction(v) for v in self.values)
        if not values:
            raise ValueError("a value domain cannot be empty")
        if list(values) != sorted(set(values)):
            raise ValueError(f"domain values must be distinct and ascending: {values}")
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, values: Iterable) -> "ValueDomain":
        return cls(tuple(sorted({Fraction(v) for v in values})))

    @classmethod
    def span(cls, lo: int, hi: int, step: int = 1) -> "ValueDomain":
        return cls(tuple(Fraction(v) for v in range(lo, hi + 1, step)))

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, value) -> bool:
        return Fraction(value) in self.values

    def index(self, value) -> int:
        return self.values.index(Fraction(value))


BIT = ValueDomain.span(0, 1)
SIGN = ValueDomain.of([-1, 1])
TERNARY = ValueDomain.span(-1, 1)
RATES = ValueDomain(LEARNING_RATES)
JDOMAIN = ValueDomain.of(J_VALUES)


@dataclass(frozen=True)
class FunctionTable:
    inputs: Tuple[Tuple[str, ValueDomain], ...]
    output: ValueDomain
    rows: Mapping[Tuple[Fraction, ...], Fraction]
    read_only: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        names = [n for n, _ in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate input names {names}")
        unknown = set(self.read_only) - set(names)
        if unknown:
            raise ValueError(f"read-only inputs {sorted(unknown)} are not inputs")
        for combo in self.combinations():
            if combo not in self.rows:
                raise ValueError(f"table is not total: missing row {combo}")
            if self.rows[combo] not in self.output:
                raise ValueError(f"row {combo} maps outside the output domain")

    def combinations(self) -> Iterator[Tuple[Fraction, ...]]:
        return itertools.product(*(d.values for _, d in self.inputs))

    def __call__(self, *values) -> Fraction:
        return self.rows[tuple(Fraction(v) for v in values)]

    @property
    def input_names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.inputs)

    def domain_of(self, name: str) -> ValueDomain:
        return dict(self.inputs)[name]

    def with_rows(self, overrides: Mapping[Tuple, Fraction]) -> "FunctionTable":
        """Copy with some rows replaced (used to inject faults)."""
        rows = dict(self.rows)
        for combo, value in overrides.items():
            rows[tuple(Fraction(v) for v in combo)] = Fraction(value)
        output = ValueDomain.of(list(self.output.values) + list(rows.values()))
        return FunctionTable(self.inputs, output, rows, self.read_only)


def tabulate(inputs: Sequence[Tuple[str, ValueDomain]], fn: Callable[..., Fraction],
             output: ValueDomain = None, read_only: Iterable[str] = ()) -> FunctionTable:
    rows: Dict[Tuple[Fraction, ...], Fraction] = {}
    for combo in itertools.product(*(d.values for _, d in inputs)):
        rows[combo] = Fraction(fn(*combo))
    if output is None:
        output = ValueDomain.of(rows.values())
    return FunctionTable(tuple(inputs), output, rows, frozenset(read_only))


def sign(x: Fraction) -> int:
    return 1 if x >= 0 else -1


def hardtanh(x: Fraction) -> Fraction:
    return max(Fraction(-1), min(Fraction(1), Fraction(x)))


def table_sign(domain: ValueDomain, read_only: bool = False) -> FunctionTable:
    return tabulate([("x", domain)], sign, read_only=("x",) if read_only else ())


def table_hardtanh(domain: ValueDomain) -> FunctionTable:
    return tabulate([("x", domain)], hardtanh)


def table_product(dom_a: ValueDomain, dom_b: ValueDomain, names=("a", "b"),
                  read_only: Iterable[str] = ()) -> FunctionTable:
    return tabulate([(names[0], dom_a), (names[1], dom_b)], lambda a, b: a * b, read_only=read_only)


def table_sum(*domains: ValueDomain) -> FunctionTable:
    if not domains:
        raise ValueError("table_sum needs at least one operand")
    inputs = [(f"x{i}", d) for i, d in enumerate(domains)]
    return tabulate(inputs, lambda *xs: sum(xs, Fraction(0)))


def sum_domain(count: int) -> ValueDomain:
    """Reachable sums of `count` values from {-1, +1}."""
    return ValueDomain.span(-count, count, 2)


def table_hinge(z_domain: ValueDomain) -> Tuple[FunctionTable, FunctionTable, FunctionTable]:
    """Hinge loss split into y*z, 1 - y*z and max(0, .)."""
    mul = tabulate([("y", SIGN), ("z", z_domain)], lambda y, z: y * z)
    sub = tabulate([("u", mul.output)], lambda u: 1 - u)
    clip = tabulate([("v", sub.output)], lambda v: max(Fraction(0), v))
    return mul, sub, clip


def table_dloss(z_domain: ValueDomain = None) -> FunctionTable:
    """dL/dz = -y when y*z < 1, else 0."""
    z_domain = z_domain or sum_domain(2)
    return tabulate([("y", SIGN), ("z", z_domain)], lambda y, z: -y if y * z < 1 else 0,
                    output=TERNARY)


def table_grad(kind: str) -> FunctionTable:
    if kind == "input-hidden":
        return tabulate([("dldz", TERNARY), ("wbx", SIGN), ("a", BIT)],
                        lambda d, w, a: d * w * 1 * a, output=TERNARY, read_only=("a",))
    if kind == "hidden-output":
        return tabulate([("dldz", TERNARY), ("x", SIGN)], lambda d, x: d * x,
                        output=TERNARY, read_only=("x",))
    if kind == "real":
        return tabulate([("gb", TERNARY), ("ste", BIT)], lambda g, s: g * s, output=TERNARY)
    raise ValueError(f"unknown gradient kind {kind!r}")


def table_lr_product() -> FunctionTable:
    return tabulate([("eta", RATES), ("g", TERNARY)], lambda eta, g: eta * g,
                    output=JDOMAIN, read_only=("eta",))
