# bnn/refbnn.py
"""
Reference BNN: one hidden layer of sign(hardtanh(.)) neurons, a single
output neuron summing the hidden outputs, hinge loss and SGD with the
straight-through estimator.

Real weights are kept as binary32 bit patterns; binary weights are always
recomputed from them, so the sign-consistency invariant cannot drift.
Weight k follows the net's ordering: input-hidden weight (i, j) of hidden
neuron i and feature j is k = i*F + j, hidden-output weight i is F*H + i.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from blueprints.tables import hardtanh, sign
from bnn.bitfloat import BIAS, Fp32Bits, decode, encode, jvalue, native_update, update_weight
from bnn.metrics import StepMetrics

if TYPE_CHECKING:
    from blueprints.compose import NetworkSpec

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    PN_EXACT = "pn-exact"
    NATIVE_FLOAT = "native-float"


def binarize(w: Fp32Bits) -> int:
    """sign(W_r) with both zeros mapping to +1."""
    return sign(decode(w))


def ste(w: Fp32Bits) -> int:
    """1 iff |W_r| <= 1."""
    if w.exponent < BIAS:
        return 1
    return 1 if w.mantissa == 0 else 0


@dataclass(frozen=True)
class BnnState:
    features: int
    hidden: int
    real_weights: Tuple[Fp32Bits, ...]
    learning_rate: Fraction

    def __post_init__(self):
        expected = self.features * self.hidden + self.hidden
        if len(self.real_weights) != expected:
            raise ValueError(f"expected {expected} weights, got {len(self.real_weights)}")

    @property
    def binary_weights(self) -> Tuple[int, ...]:
        return tuple(binarize(w) for w in self.real_weights)

    def input_weight(self, i: int, j: int) -> int:
        return self.binary_weights[i * self.features + j]

    def output_weight(self, i: int) -> int:
        return self.binary_weights[self.features * self.hidden + i]


class ForwardPass(NamedTuple):
    pre_activations: Tuple[int, ...]
    activations: Tuple[int, ...]
    neuron_outputs: Tuple[int, ...]
    output_sum: int
    prediction: int


class Gradients(NamedTuple):
    binary: Tuple[int, ...]
    ste: Tuple[int, ...]
    real: Tuple[int, ...]


def forward(state: BnnState, features: Sequence[int]) -> ForwardPass:
    if len(features) != state.features:
        raise ValueError(f"expected {state.features} features, got {len(features)}")
    binary = state.binary_weights
    s, x, o = [], [], []
    for i in range(state.hidden):
        total = sum(a * binary[i * state.features + j] for j, a in enumerate(features))
        act = sign(hardtanh(total))
        s.append(total)
        x.append(act)
        o.append(act * state.output_weight(i))
    z = sum(o)
    return ForwardPass(tuple(s), tuple(x), tuple(o), z, sign(z))


def loss(y: int, z: int) -> Tuple[int, int]:
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y}")
    margin = y * z
    return max(0, 1 - margin), (-y if margin < 1 else 0)


def backward(state: BnnState, features: Sequence[int], fp: ForwardPass, dldz: int) -> Gradients:
    binary = []
    for i in range(state.hidden):
        for j, a in enumerate(features):
            binary.append(dldz * state.output_weight(i) * 1 * a)
    for i in range(state.hidden):
        binary.append(dldz * fp.activations[i])
    estimator = tuple(ste(w) for w in state.real_weights)
    real = tuple(g * e for g, e in zip(binary, estimator))
    return Gradients(tuple(binary), estimator, real)


def step(state: BnnState, features: Sequence[int], y: int, mode: Mode = Mode.PN_EXACT,
         epoch: int = 1, vector_index: int = 0) -> Tuple[BnnState, StepMetrics]:
    mode = Mode(mode)
    fp = forward(state, features)
    l_value, dldz = loss(y, fp.output_sum)
    grads = backward(state, features, fp, dldz)
    products = tuple(jvalue(state.learning_rate, g) for g in grads.real)
    updated = []
    for w, j in zip(state.real_weights, products):
        if mode is Mode.PN_EXACT:
            updated.append(update_weight(w, j).result)
        else:
            updated.append(native_update(w, j))
    metrics = StepMetrics(
        epoch=epoch,
        vector_index=vector_index,
        features=tuple(features),
        y_true=y,
        learning_rate=state.learning_rate,
        binary_weights=state.binary_weights,
        pre_activations=fp.pre_activations,
        activations=fp.activations,
        neuron_outputs=fp.neuron_outputs,
        output_sum=fp.output_sum,
        prediction=fp.prediction,
        loss=l_value,
        dldz=dldz,
        binary_grads=grads.binary,
        ste=grads.ste,
        real_grads=grads.real,
        j_products=products,
        updated_bits=tuple(w.to_int() for w in updated),
    )
    return replace(state, real_weights=tuple(updated)), metrics


def initial_weights(spec: "NetworkSpec") -> Tuple[Fp32Bits, ...]:
    """Explicit spec weights, or seeded uniform draws in (-1, 1) truncated to binary32."""
    if spec.initial_weights is not None:
        return tuple(spec.initial_weights)
    rng = np.random.default_rng(spec.seed)
    draws = rng.uniform(-1.0, 1.0, size=spec.num_weights).astype(np.float32)
    return tuple(encode(Fraction(float(v))) for v in draws)


def initial_state(spec: "NetworkSpec", learning_rate: Optional[Fraction] = None,
                  weights: Optional[Sequence[Fp32Bits]] = None) -> BnnState:
    rate = Fraction(learning_rate) if learning_rate is not None else spec.learning_rates[0]
    if rate not in spec.learning_rates:
        raise ValueError(f"learning rate {rate} is not one of {[str(r) for r in spec.learning_rates]}")
    real = tuple(weights) if weights is not None else initial_weights(spec)
    return BnnState(spec.features, spec.hidden, real, rate)


class TrainingRun(NamedTuple):
    metrics: List[StepMetrics]
    loss_rate: List[float]
    final_state: BnnState


def train(spec: "NetworkSpec", epochs: int, mode: Mode = Mode.PN_EXACT,
          learning_rate: Optional[Fraction] = None,
          weights: Optional[Sequence[Fp32Bits]] = None) -> TrainingRun:
    """Cyclic passes over the dataset in its given order."""
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    state = initial_state(spec, learning_rate, weights)
    records: List[StepMetrics] = []
    for epoch in range(1, epochs + 1):
        for index, (row, label) in enumerate(spec.dataset):
            state, metrics = step(state, row, label, mode, epoch, index)
            records.append(metrics)
        logger.debug(f"reference epoch {epoch}: mean loss {np.mean([m.loss for m in records[-len(spec.dataset):]]):.3f}")
    logger.info(f"reference BNN trained {epochs} epochs ({len(records)} steps, {Mode(mode).value})")
    return TrainingRun(records, loss_rate_series(records), state)


def loss_rate_series(metrics: Sequence[StepMetrics]) -> List[float]:
    """Cumulative mean of L / 3 (3 is the largest hinge loss)."""
    if not metrics:
        return []
    normalized = np.array([m.loss / 3 for m in metrics], dtype=float)
    return [float(v) for v in np.cumsum(normalized) / np.arange(1, len(normalized) + 1)]


def misclassification_series(metrics: Sequence[StepMetrics]) -> List[float]:
    if not metrics:
        return []
    wrong = np.array([m.prediction != m.y_true for m in metrics], dtype=float)
    return [float(v) for v in np.cumsum(wrong) / np.arange(1, len(wrong) + 1)]
