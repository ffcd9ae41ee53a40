# analyze/sizes.py
"""
Size accounting of the generated nets and the per-unit complexity estimate
for larger architectures.

A read arc counts as one arc everywhere. Borrowed places are counted by
the segment that owns them, so ledger rows add up to the composed net.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

from blueprints.compose import LedgerEntry, NetworkSpec, compose_bnn_with_ledger
from blueprints.segments import Segment
from net.model import Net

logger = logging.getLogger(__name__)

BILLION = 10 ** 9


@dataclass(frozen=True)
class SizeRow:
    name: str
    places: Union[int, Fraction]
    transitions: Union[int, Fraction]
    arcs: Union[int, Fraction]

    @property
    def total(self):
        return self.places + self.transitions + self.arcs

    def to_dict(self) -> Dict[str, object]:
        return {"name": self.name, "places": self.places, "transitions": self.transitions,
                "arcs": self.arcs, "total": self.total}


@dataclass(frozen=True)
class UnitSizes:
    """Element counts of one input feature wired to one neuron."""
    places: Fraction
    transitions: Fraction
    arcs: Fraction

    @property
    def total(self) -> Fraction:
        return self.places + self.transitions + self.arcs


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_features: int
    layer_sizes: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(self.layer_sizes))
        if self.input_features < 1 or not self.layer_sizes or min(self.layer_sizes) < 1:
            raise ValueError(f"architecture {self.name}: sizes must be positive")

    @property
    def neurons(self) -> int:
        return sum(self.layer_sizes)

    @property
    def unit_count(self) -> int:
        fan_in = [self.input_features] + list(self.layer_sizes[:-1])
        return sum(a * b for a, b in zip(fan_in, self.layer_sizes))

    @property
    def label(self) -> str:
        return f"{self.name} {self.neurons}x{self.input_features}"


REFERENCE_ROWS: Dict[str, SizeRow] = {row.name: row for row in [
    SizeRow("Inputs", 7, 4, 48),
    SizeRow("Weights", 67, 95, 532),
    SizeRow("mult a/b", 5, 4, 12),
    SizeRow("Sum of mult a and b", 5, 9, 27),
    SizeRow("TanH function", 3, 5, 10),
    SizeRow("Sign function", 2, 3, 6),
    SizeRow("mult x", 2, 4, 12),
    SizeRow("STE", 3, 31, 476),
    SizeRow("Hidden Neuron", 238, 409, 3109),
    SizeRow("Output Sum", 3, 4, 16),
    SizeRow("Prediction", 3, 3, 9),
    SizeRow("Hinge Loss", 10, 12, 42),
    SizeRow("Loss derivative", 21, 3, 21),
    SizeRow("gradient w.r.t W_bA/B", 5, 12, 60),
    SizeRow("gradient w.r.t W_bX", 5, 6, 24),
    SizeRow("gradient w.r.t W_r", 3, 6, 18),
    SizeRow("Learning rate", 10, 9, 18),
    SizeRow("LR*gradient", 19, 28, 82),
    SizeRow("Weight update", 1256, 1912, 10642),
    SizeRow("Next vector", 6, 1, 13),
    SizeRow("Full PN BNN Model", 8243, 12598, 71370),
]}
FULL_MODEL = "Full PN BNN Model"

ARCHITECTURE_PRESETS: Tuple[ArchitectureSpec, ...] = (
    ArchitectureSpec("KWS6", 377, (128, 6)),
    ArchitectureSpec("CIFAR2", 1024, (128, 2)),
    ArchitectureSpec("MNIST", 784, (128, 10)),
    ArchitectureSpec("KWS6", 377, (256, 6)),
    ArchitectureSpec("CIFAR2", 1024, (256, 2)),
    ArchitectureSpec("MNIST", 784, (256, 10)),
    ArchitectureSpec("KWS6", 377, (256, 128, 6)),
    ArchitectureSpec("CIFAR2", 1024, (256, 128, 2)),
    ArchitectureSpec("MNIST", 784, (256, 128, 10)),
)

# ledger instances (by prefix) behind each comparable reference row; "Loss derivative"
# has no row of its own since dL/dz is a companion output of the hinge multiplication
_SEGMENT_ROWS: Sequence[Tuple[str, Callable[[NetworkSpec], Tuple[str, ...]]]] = (
    ("Inputs", lambda s: ("loader",)),
    ("Weights", lambda s: ("w0",)),
    ("mult a/b", lambda s: ("h0.p0",)),
    ("Sum of mult a and b", lambda s: ("h0.sum",)),
    ("TanH function", lambda s: ("h0.tanh",)),
    ("Sign function", lambda s: ("h0.sign",)),
    ("mult x", lambda s: ("h0.out",)),
    ("STE", lambda s: ("ste0",)),
    ("Output Sum", lambda s: ("osum",)),
    ("Prediction", lambda s: ("pred",)),
    ("Hinge Loss", lambda s: ("hmul", "hsub", "hclip")),
    ("gradient w.r.t W_bA/B", lambda s: ("g0",)),
    ("gradient w.r.t W_bX", lambda s: (f"g{s.input_hidden_weights}",)),
    ("gradient w.r.t W_r", lambda s: ("gr0",)),
    ("Learning rate", lambda s: ("lr",)),
    ("LR*gradient", lambda s: ("lrp0",)),
    ("Weight update", lambda s: ("upd0",)),
    ("Next vector", lambda s: ("nv",)),
)


def _matches(instance: str, prefix: str) -> bool:
    return instance == prefix or instance.startswith(prefix + ".") or (
        instance.startswith(prefix) and instance[len(prefix):].isdigit())


def _sum_rows(name: str, rows: Iterable) -> SizeRow:
    places = transitions = arcs = 0
    for row in rows:
        places += row.places
        transitions += row.transitions
        arcs += row.arcs
    return SizeRow(name, places, transitions, arcs)


def size_report(source: Union[Net, Sequence[Segment], Sequence[LedgerEntry]], name: str = "net") -> List[SizeRow]:
    """One row per segment or ledger entry followed by their total; a bare net gives a single row."""
    if isinstance(source, Net):
        places, transitions, arcs = source.size()
        return [SizeRow(name, places, transitions, arcs)]
    rows = []
    for item in source:
        if isinstance(item, Segment):
            rows.append(SizeRow(item.name, *item.size()))
        else:
            rows.append(SizeRow(item.instance, item.places, item.transitions, item.arcs))
    rows.append(_sum_rows("total", rows))
    return rows


def group_sizes(ledger: Sequence[LedgerEntry]) -> List[SizeRow]:
    """Rows per ledger group, then the first hidden neuron, the core model and the model with its instrument."""
    groups: Dict[str, List[LedgerEntry]] = {}
    for entry in ledger:
        groups.setdefault(entry.group or "ungrouped", []).append(entry)
    rows = [_sum_rows(group, entries) for group, entries in groups.items()]
    if "hidden[0]" in groups:
        rows.append(_sum_rows("hidden neuron", groups["hidden[0]"]))
    core = [e for e in ledger if e.instance not in ("instrument", "budget")]
    rows.append(_sum_rows("core model", core))
    rows.append(_sum_rows("with instrument", ledger))
    return rows


def segment_rows(spec: NetworkSpec) -> List[SizeRow]:
    """The composed model's segments sized under the reference row names, ending with the core model."""
    _, ledger = compose_bnn_with_ledger(spec, instrument=False, budget=False)
    rows = []
    for name, prefixes in _SEGMENT_ROWS:
        wanted = prefixes(spec)
        entries = [e for e in ledger if any(_matches(e.instance, p) for p in wanted)]
        if entries:
            rows.append(_sum_rows(name, entries))
    hidden = [e for e in ledger if e.group == "hidden[0]"]
    rows.insert(8, _sum_rows("Hidden Neuron", hidden))
    rows.append(_sum_rows(FULL_MODEL, ledger))
    logger.info(f"sized {len(ledger)} segments: core model {rows[-1].total} elements")
    return rows


def deviation(row: SizeRow, reference: Optional[SizeRow] = None) -> Dict[str, float]:
    """Relative deviation of every count from the reference row (the reference row of the same name when omitted)."""
    reference = reference or REFERENCE_ROWS[row.name]
    result = {}
    for field in ("places", "transitions", "arcs", "total"):
        expected = getattr(reference, field)
        result[field] = float((getattr(row, field) - expected) / expected) if expected else 0.0
    return result


def unit_sizes(full_model: SizeRow = REFERENCE_ROWS[FULL_MODEL], features: int = 2, hidden: int = 2) -> UnitSizes:
    units = features * hidden
    if units <= 0:
        raise ValueError("features and hidden must be positive")
    return UnitSizes(Fraction(full_model.places, units), Fraction(full_model.transitions, units),
                     Fraction(full_model.arcs, units))


def estimate(arch: ArchitectureSpec, units: Optional[UnitSizes] = None) -> SizeRow:
    """Per-unit counts times the number of feature-neuron connections across all layers."""
    units = units or unit_sizes()
    count = arch.unit_count
    return SizeRow(arch.label, count * units.places, count * units.transitions, count * units.arcs)


def in_billions(row: SizeRow, digits: int = 3) -> Dict[str, float]:
    return {field: round(float(getattr(row, field)) / BILLION, digits)
            for field in ("places", "transitions", "arcs", "total")}


def to_frame(rows: Iterable[SizeRow], billions: bool = False) -> pd.DataFrame:
    records = []
    for row in rows:
        record = {"name": row.name, **(in_billions(row) if billions else
                                       {k: v for k, v in row.to_dict().items() if k != "name"})}
        if not billions:
            record = {k: (float(v) if isinstance(v, Fraction) and v.denominator != 1 else v)
                      for k, v in record.items()}
        records.append(record)
    return pd.DataFrame(records, columns=["name", "places", "transitions", "arcs", "total"])


def render_table(rows: Iterable[SizeRow], billions: bool = False) -> str:
    frame = to_frame(rows, billions)
    if billions:
        return frame.to_string(index=False, float_format=lambda v: f"{v:.3f}")
    return frame.to_string(index=False)
