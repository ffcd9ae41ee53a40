# engine/instrument.py
"""Reads the metric instrument's recorders out of a marking."""
import logging
from fractions import Fraction
from typing import List

from bnn.metrics import StepMetrics
from net.model import Marking, Net, NetError, Port

logger = logging.getLogger(__name__)


class InstrumentError(NetError):
    """A recorder group is missing or does not hold exactly one value."""


def has_instrument(net: Net) -> bool:
    return "rec.epoch" in net.port_map


def read_value(net: Net, marking: Marking, name: str) -> Fraction:
    port = _port(net, name)
    marked = [value for value, place in zip(port.domain, port.places) if marking.tokens(place)]
    if len(marked) != 1:
        raise InstrumentError(f"recorder {name} holds {len(marked)} values, expected exactly one")
    return marked[0]


def read_bits(net: Net, marking: Marking, k: int) -> int:
    """Weight k's 32-bit pattern from its bit buffers."""
    return sum(int(read_value(net, marking, f"w{k}.b{pos}")) << pos for pos in range(32))


def _port(net: Net, name: str) -> Port:
    try:
        return net.port_map[name]
    except KeyError:
        raise InstrumentError(f"net exports no recorder {name!r}") from None


def _count(net: Net, prefix: str) -> int:
    n = 0
    while f"{prefix}[{n}]" in net.port_map:
        n += 1
    return n


def decode_instrument(net: Net, marking: Marking) -> StepMetrics:
    """
    Decode one cycle. The marking must be taken after next_vector fired and
    before the flush chain ran, so every recorder holds this cycle's value.
    """
    features, hidden, weights = _count(net, "a"), _count(net, "x"), _count(net, "rec.wb")
    if not features or not hidden or not weights:
        raise InstrumentError("net has no instrument ports")

    def ints(prefix: str, n: int) -> tuple:
        return tuple(int(read_value(net, marking, f"{prefix}[{i}]")) for i in range(n))

    return StepMetrics(
        epoch=marking.tokens(_port(net, "rec.epoch").places[0]),
        vector_index=int(read_value(net, marking, "rec.vec")),
        features=ints("a", features),
        y_true=int(read_value(net, marking, "rec.y")),
        learning_rate=read_value(net, marking, "lr"),
        binary_weights=ints("rec.wb", weights),
        pre_activations=ints("rec.s", hidden),
        activations=ints("x", hidden),
        neuron_outputs=ints("rec.o", hidden),
        output_sum=int(read_value(net, marking, "rec.z")),
        prediction=int(read_value(net, marking, "yhat")),
        loss=int(read_value(net, marking, "loss")),
        dldz=int(read_value(net, marking, "rec.dldz")),
        binary_grads=ints("rec.gb", weights),
        ste=ints("rec.ste", weights),
        real_grads=ints("rec.gr", weights),
        j_products=tuple(read_value(net, marking, f"rec.j[{k}]") for k in range(weights)),
        updated_bits=tuple(read_bits(net, marking, k) for k in range(weights)),
    )


def initial_bits(net: Net) -> List[int]:
    """Weight bit patterns held by the net's initial marking."""
    return [read_bits(net, net.initial_marking, k) for k in range(_count_weights(net))]


def _count_weights(net: Net) -> int:
    k = 0
    while f"w{k}.b0" in net.port_map:
        k += 1
    return k
