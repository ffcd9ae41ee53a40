# bnn/metrics.py
"""
Per-cycle metric records and their tabular renderings.

The CSV column order is part of the output contract; METRIC_COLUMNS lists it.
List-valued fields are written as space-separated values, rationals as
"p/q" strings and weight bit patterns as 8-digit hex.
"""
import json
import logging
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepMetrics:
    epoch: int
    vector_index: int
    features: Tuple[int, ...]
    y_true: int
    learning_rate: Fraction
    binary_weights: Tuple[int, ...]
    pre_activations: Tuple[int, ...]
    activations: Tuple[int, ...]
    neuron_outputs: Tuple[int, ...]
    output_sum: int
    prediction: int
    loss: int
    dldz: int
    binary_grads: Tuple[int, ...]
    ste: Tuple[int, ...]
    real_grads: Tuple[int, ...]
    j_products: Tuple[Fraction, ...]
    updated_bits: Tuple[int, ...]

    def first_difference(self, other: "StepMetrics") -> Optional[str]:
        """Name of the first field (in column order) where the two records disagree."""
        for name in METRIC_COLUMNS:
            if getattr(self, name) != getattr(other, name):
                return name
        return None

    def to_record(self) -> Dict[str, Any]:
        record = {}
        for name in METRIC_COLUMNS:
            value = getattr(self, name)
            if name == "updated_bits":
                record[name] = " ".join(f"{v:08x}" for v in value)
            elif isinstance(value, tuple):
                record[name] = " ".join(str(v) for v in value)
            elif isinstance(value, Fraction):
                record[name] = str(value)
            else:
                record[name] = value
        return record

    def to_json(self) -> Dict[str, Any]:
        data = asdict(self)
        data["learning_rate"] = str(self.learning_rate)
        data["j_products"] = [str(v) for v in self.j_products]
        data["updated_bits"] = [f"{v:08x}" for v in self.updated_bits]
        for name in ("features", "binary_weights", "pre_activations", "activations",
                     "neuron_outputs", "binary_grads", "ste", "real_grads"):
            data[name] = list(data[name])
        return data

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "StepMetrics":
        values = dict(data)
        values["learning_rate"] = Fraction(values["learning_rate"])
        values["j_products"] = tuple(Fraction(v) for v in values["j_products"])
        values["updated_bits"] = tuple(int(v, 16) for v in values["updated_bits"])
        for name in ("features", "binary_weights", "pre_activations", "activations",
                     "neuron_outputs", "binary_grads", "ste", "real_grads"):
            values[name] = tuple(values[name])
        return cls(**values)


METRIC_COLUMNS: Tuple[str, ...] = tuple(f.name for f in fields(StepMetrics))


def metrics_frame(metrics: Iterable[StepMetrics]) -> pd.DataFrame:
    return pd.DataFrame([m.to_record() for m in metrics], columns=list(METRIC_COLUMNS))


def write_metrics_csv(metrics: Sequence[StepMetrics], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metrics_frame(metrics).to_csv(path, index=False)
    logger.info(f"wrote {len(metrics)} metric rows to {path}")
    return path


def write_metrics_json(metrics: Sequence[StepMetrics], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([m.to_json() for m in metrics], indent=2))
    logger.info(f"wrote {len(metrics)} metric records to {path}")
    return path


def read_metrics_json(path: Union[str, Path]) -> List[StepMetrics]:
    return [StepMetrics.from_json(d) for d in json.loads(Path(path).read_text())]
