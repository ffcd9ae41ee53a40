# blueprints/segments.py
"""
Blueprint segments: small nets with typed ports that compose into the BNN.

Each generator returns a Segment whose net contains every place its ports
mention. Ports marked `borrowed` name places owned by another segment; they
are present so the segment can be simulated on its own, and compose fuses
them onto the owner's places.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from blueprints.registers import add_register
from blueprints.tables import BIT, RATES, SIGN, FunctionTable, ValueDomain, tabulate
from bnn.bitfloat import BIAS, LEARNING_RATES, MANT_BITS, Fp32Bits
from net.model import Net, NetBuilder, NetError, Port, PortDirection, PortRole

logger = logging.getLogger(__name__)

UNBOUNDED_EPOCHS = (1 << 31) - 1


class PortMismatchError(NetError):
    """A port was missing, left unconnected or wired to a port of a different shape."""


class Category(str, Enum):
    INFERENCE = "inference"
    TRAINING = "training"
    INFRASTRUCTURE = "infrastructure"


@dataclass(frozen=True)
class Segment:
    name: str
    net: Net
    category: Category = Category.INFERENCE

    def __post_init__(self):
        for port in self.net.ports:
            missing = [p for p in port.places if p not in self.net.place_map]
            if missing:
                raise PortMismatchError(f"segment {self.name}: port {port.name} names unknown places {missing}")

    @property
    def ports(self) -> Dict[str, Port]:
        return self.net.port_map

    def port(self, name: str) -> Port:
        try:
            return self.net.port_map[name]
        except KeyError:
            raise PortMismatchError(f"segment {self.name} has no port {name!r}") from None

    def borrowed_places(self) -> frozenset:
        return frozenset(p for port in self.net.ports if port.borrowed for p in port.places)

    def size(self) -> Tuple[int, int, int]:
        """Places owned by the segment, transitions and arcs (a read arc counts once)."""
        return (len(self.net.places) - len(self.borrowed_places()),
                len(self.net.transitions), len(self.net.arcs))


def fmt_value(value) -> str:
    """Place-name form of a domain value: integers plain, other rationals as p/q."""
    value = Fraction(value)
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def value_places(builder: NetBuilder, port: str, domain: Iterable, label: str = "") -> Tuple[str, ...]:
    return tuple(builder.add_place(f"{port}.{fmt_value(v)}", f"{label or port}={fmt_value(v)}") for v in domain)


def value_port(name: str, places: Sequence[str], domain: ValueDomain, incoming: bool,
               direction: Optional[PortDirection] = None, borrowed: Optional[bool] = None) -> Port:
    role = PortRole.VALUE_IN if incoming else PortRole.VALUE_OUT
    return Port(name, role, tuple(places), tuple(domain), direction, borrowed)


@dataclass(frozen=True)
class OutputSpec:
    """One output of a mapper: `copies` one-hot groups plus an optional recorder tap."""
    port: str = "out"
    table: Optional[FunctionTable] = None
    copies: int = 1
    tap: bool = False

    def port_names(self) -> List[str]:
        return [self.port if c == 0 else f"{self.port}_{c}" for c in range(self.copies)]


def gen_function_mapper(name: str, table: FunctionTable, outputs: Sequence[OutputSpec] = (),
                        done: bool = False, category: Category = Category.INFERENCE) -> Segment:
    """
    One transition per input combination. Each transition takes one token
    from every consumed input and reads every read-only input, then puts the
    row's result into each output group.
    """
    outputs = list(outputs) or [OutputSpec()]
    builder = NetBuilder()
    input_places: Dict[str, Dict[Fraction, str]] = {}
    for input_name, domain in table.inputs:
        places = value_places(builder, input_name, domain)
        input_places[input_name] = dict(zip(domain, places))
        builder.add_port(value_port(input_name, places, domain, incoming=True))
    groups = []
    for spec in outputs:
        out_table = spec.table or table
        if out_table.input_names != table.input_names:
            raise PortMismatchError(f"{name}: companion table for {spec.port} has different inputs")
        names = spec.port_names() + ([f"{spec.port}_tap"] if spec.tap else [])
        for port_name in names:
            places = value_places(builder, port_name, out_table.output)
            is_tap = port_name.endswith("_tap")
            builder.add_port(value_port(port_name, places, out_table.output, incoming=False,
                                        borrowed=True if is_tap else None))
            groups.append((out_table, dict(zip(out_table.output, places))))
    done_place = None
    if done:
        done_place = builder.add_place("done", f"{name} done")
        builder.add_port(Port("done", PortRole.DONE, (done_place,)))
    for combo in table.combinations():
        consume, read = [], []
        for (input_name, _), value in zip(table.inputs, combo):
            place = input_places[input_name][value]
            (read if input_name in table.read_only else consume).append(place)
        produce = [places[out_table.rows[combo]] for out_table, places in groups]
        if done_place:
            produce.append(done_place)
        suffix = "_".join(fmt_value(v) for v in combo)
        args = ", ".join(f"{n}={fmt_value(v)}" for n, v in zip(table.input_names, combo))
        builder.add_transition(f"t.{suffix}", f"{name}({args})={fmt_value(table.rows[combo])}",
                               consume=consume, produce=produce, read=read)
    segment = Segment(name, builder.build(), category)
    logger.debug(f"generated mapper {name}: {segment.size()}")
    return segment


def gen_input_loader(dataset: Sequence[Tuple[Sequence[int], int]], taps: bool = False,
                     epoch_bound: Optional[int] = None, budget_bound: Optional[int] = None) -> Segment:
    """
    Cyclic data loader. Row k fires on data_vec and the ring place c{k},
    loads the one-hot features a{j} and the label y, and passes the ring on.
    The first row also feeds the epoch counter and spends one budget token.
    """
    if not dataset:
        raise ValueError("dataset must not be empty")
    width = len(dataset[0][0])
    builder = NetBuilder()
    data_vec = builder.add_place("data_vec", "data_vec", marked=True)
    builder.add_port(Port("data_vec", PortRole.CONTROL, (data_vec,), direction=PortDirection.IN, borrowed=False))
    ring = [builder.add_place(f"c{k}", f"row {k} next", marked=k == 0) for k in range(len(dataset))]
    features = []
    for j in range(width):
        places = value_places(builder, f"a{j}", BIT)
        builder.add_port(value_port(f"a{j}", places, BIT, incoming=False))
        features.append(places)
    labels = value_places(builder, "y", SIGN)
    builder.add_port(value_port("y", labels, SIGN, incoming=False))
    vec_domain = ValueDomain.span(0, len(dataset) - 1)
    y_tap = vec_tap = None
    if taps:
        y_tap = value_places(builder, "y_tap", SIGN)
        builder.add_port(value_port("y_tap", y_tap, SIGN, incoming=False, borrowed=True))
        vec_tap = value_places(builder, "vec_tap", vec_domain)
        builder.add_port(value_port("vec_tap", vec_tap, vec_domain, incoming=False, borrowed=True))
    epoch = budget = None
    if epoch_bound is not None:
        epoch = builder.add_counter("epoch", epoch_bound, label="epoch")
        builder.add_port(Port("epoch", PortRole.CONTROL, (epoch,), direction=PortDirection.OUT, borrowed=True))
    if budget_bound is not None:
        budget = builder.add_counter("budget", budget_bound, label="epoch budget")
        builder.add_port(Port("budget", PortRole.CONTROL, (budget,), direction=PortDirection.IN, borrowed=True))
    for k, (bits, label) in enumerate(dataset):
        if len(bits) != width:
            raise ValueError(f"row {k} has {len(bits)} features, expected {width}")
        consume = [data_vec, ring[k]]
        produce = [ring[(k + 1) % len(dataset)]]
        produce += [features[j][BIT.index(b)] for j, b in enumerate(bits)]
        produce.append(labels[SIGN.index(label)])
        if taps:
            produce += [y_tap[SIGN.index(label)], vec_tap[k]]
        if k == 0:
            if epoch:
                produce.append(epoch)
            if budget:
                consume.append(budget)
        builder.add_transition(f"row{k}", "".join(str(b) for b in bits), consume=consume, produce=produce)
    return Segment("loader", builder.build(), Category.INFRASTRUCTURE)


def gen_weight_register(initial: Fp32Bits, copies: int = 1, tap: bool = False, armed: bool = True,
                        editable: bool = False, name: str = "w") -> Segment:
    """
    32 bit buffers holding W_r, the editing toggles guarded by r, and the
    binarization transitions guarded by arb.

    Binarization: pve reads sign bit 0; all_0s reads sign bit 1 with every
    value bit 0 (negative zero); neg{k} reads sign bit 1 and value bit k set.
    Several neg{k} may be enabled together; they all consume arb, so exactly
    one fires. Every binarization emits the binary weight into each copy and
    a token for the STE.
    """
    if initial.to_int() & (1 << 30):
        raise ValueError("initial weight magnitude must be below 2")
    builder = NetBuilder()
    bits = add_register(builder, "b", range(32), initial.to_int(), label="W_r")
    r = builder.add_place("r", "r (edit weights)", marked=editable)
    arb = builder.add_place("arb", "arb", marked=armed and not editable)
    for pos in range(32):
        for old in (0, 1):
            builder.add_transition(f"toggle{pos}.{old}", f"toggle bit {pos}",
                                   consume=[bits.place(pos, old)], produce=[bits.place(pos, 1 - old)], read=[r])
    builder.add_transition("set_weights", "set_weights", consume=[r], produce=[arb])

    out_names = [("wb" if c == 0 else f"wb_{c}") for c in range(copies)] + (["wb_tap"] if tap else [])
    outs = {}
    for port_name in out_names:
        places = value_places(builder, port_name, SIGN)
        outs[port_name] = places
        builder.add_port(value_port(port_name, places, SIGN, incoming=False,
                                    borrowed=True if port_name == "wb_tap" else None))
    ste_go = builder.add_place("ste_go", "binarization finished")

    def emit(value: int) -> List[str]:
        return [places[SIGN.index(value)] for places in outs.values()] + [ste_go]

    sign_bit = 31
    builder.add_transition("pve", "pve", consume=[arb], produce=emit(1), read=[bits.place(sign_bit, 0)])
    builder.add_transition("all_0s", "all_0s", consume=[arb], produce=emit(1),
                           read=[bits.place(sign_bit, 1)] + [bits.place(k, 0) for k in range(31)])
    for k in range(31):
        builder.add_transition(f"neg{k}", "neg", consume=[arb], produce=emit(-1),
                               read=[bits.place(sign_bit, 1), bits.place(k, 1)])

    for pos in range(32):
        builder.add_port(Port(f"b{pos}", PortRole.VALUE_OUT, bits.places[pos], tuple(BIT),
                              PortDirection.STATE, False))
    builder.add_port(Port("arb", PortRole.CONTROL, (arb,), direction=PortDirection.IN, borrowed=False))
    builder.add_port(Port("r", PortRole.CONTROL, (r,), direction=PortDirection.STATE, borrowed=False))
    builder.add_port(Port("ste_go", PortRole.CONTROL, (ste_go,), direction=PortDirection.OUT, borrowed=False))
    return Segment(name, builder.build(), Category.INFERENCE)


def borrowed_bits(builder: NetBuilder, positions: Iterable[int], prefix: str = "b"):
    """Borrowed read/write view of a weight register's bit buffers."""
    reg = add_register(builder, prefix, positions, None, label="W_r")
    for pos in reg.positions:
        builder.add_port(Port(f"b{pos}", PortRole.VALUE_IN, reg.places[pos], tuple(BIT),
                              PortDirection.STATE, True))
    return reg


def gen_ste(tap: bool = False) -> Segment:
    """
    STE = 1 iff |W_r| <= 1, decided from the exponent bits 29..23 (bit 30 is
    always 0 for |W_r| < 2) and the mantissa:

    - exponent < 127: the highest 0 among bits 29..23 (7 transitions) -> 1
    - exponent = 127 and mantissa 0 -> 1
    - exponent = 127 and a mantissa bit set: the highest set bit (23 transitions) -> 0
    """
    builder = NetBuilder()
    bits = borrowed_bits(builder, range(30))
    go = builder.add_place("ste_go", "binarization finished")
    builder.add_port(Port("ste_go", PortRole.CONTROL, (go,), direction=PortDirection.IN, borrowed=True))
    out = value_places(builder, "out", BIT)
    builder.add_port(value_port("out", out, BIT, incoming=False))
    sinks = [out]
    if tap:
        tap_places = value_places(builder, "out_tap", BIT)
        builder.add_port(value_port("out_tap", tap_places, BIT, incoming=False, borrowed=True))
        sinks.append(tap_places)

    def emit(value: int) -> List[str]:
        return [places[value] for places in sinks]

    exponent = list(range(29, MANT_BITS - 1, -1))
    for i, pos in enumerate(exponent):
        read = [bits.place(p, 1) for p in exponent[:i]] + [bits.place(pos, 0)]
        builder.add_transition(f"exp{pos}", f"exponent below {BIAS}", consume=[go], produce=emit(1), read=read)
    ones = [bits.place(p, 1) for p in exponent]
    builder.add_transition("one", "|W| = 1", consume=[go], produce=emit(1),
                           read=ones + [bits.place(p, 0) for p in range(MANT_BITS)])
    for pos in range(MANT_BITS - 1, -1, -1):
        read = ones + [bits.place(p, 0) for p in range(MANT_BITS - 1, pos, -1)] + [bits.place(pos, 1)]
        builder.add_transition(f"man{pos}", "|W| > 1", consume=[go], produce=emit(0), read=read)
    return Segment("ste", builder.build(), Category.TRAINING)


def gen_loss_fork(num_weights: int, domain: ValueDomain = None) -> Segment:
    """Copies the dL/dz token onto one port per weight gradient chain."""
    if num_weights < 1:
        raise ValueError("num_weights must be at least 1")
    domain = domain or ValueDomain.span(-1, 1)
    identity = tabulate([("in", domain)], lambda v: v, output=domain)
    return gen_function_mapper("fork", identity, [OutputSpec("out", copies=num_weights)],
                               category=Category.TRAINING)


def gen_learning_rate(rates: Iterable = LEARNING_RATES) -> Segment:
    """Free choice of one rate, fired once; consumers only ever read the rate place."""
    rates = sorted({Fraction(r) for r in rates})
    if not rates or not set(rates) <= set(LEARNING_RATES):
        raise ValueError(f"learning rates must be a nonempty subset of 0.1..0.9, got {rates}")
    builder = NetBuilder()
    init = builder.add_place("init", "learning rate not chosen", marked=True)
    places = value_places(builder, "lr", RATES, label="eta")
    builder.add_port(value_port("lr", places, RATES, incoming=False, direction=PortDirection.STATE))
    for rate in rates:
        builder.add_transition(f"choose.{fmt_value(rate)}", f"eta={float(rate):g}",
                               consume=[init], produce=[places[RATES.index(rate)]])
    return Segment("lr", builder.build(), Category.TRAINING)


def gen_next_vector(num_weights: int, flush: Sequence[Tuple[str, ValueDomain]] = (),
                    waits: Sequence[str] = (), splice: bool = False) -> Segment:
    """
    Cycle boundary. next_vector joins the done token of every weight update
    (and any extra `waits`), then a flush chain empties each port listed in
    `flush`, and emit hands out data_vec plus one arb token per register.

    With `splice` the chain stops at flush_out and emit starts from emit_in,
    so another segment's flush chain can run in between.
    """
    if num_weights < 1:
        raise ValueError("num_weights must be at least 1")
    builder = NetBuilder()
    joined = []
    for name in [f"done{k}" for k in range(num_weights)] + list(waits):
        place = builder.add_place(name, name)
        builder.add_port(Port(name, PortRole.CONTROL, (place,), direction=PortDirection.IN, borrowed=True))
        joined.append(place)
    stage = builder.add_place("f0", "flush start")
    builder.add_transition("next_vector", "next_vector", consume=joined, produce=[stage])
    for i, (port_name, domain) in enumerate(flush):
        places = value_places(builder, port_name, domain)
        builder.add_port(value_port(port_name, places, domain, incoming=True))
        nxt = builder.add_place(f"f{i + 1}", f"flushed {port_name}")
        for value, place in zip(domain, places):
            builder.add_transition(f"flush.{port_name}.{fmt_value(value)}", f"flush {port_name}",
                                   consume=[stage, place], produce=[nxt])
        stage = nxt
    if splice:
        builder.add_port(Port("flush_out", PortRole.CONTROL, (stage,), direction=PortDirection.OUT, borrowed=True))
        stage = builder.add_place("emit_in", "instrument flushed")
        builder.add_port(Port("emit_in", PortRole.CONTROL, (stage,), direction=PortDirection.IN, borrowed=True))
    data_vec = builder.add_place("data_vec", "data_vec")
    builder.add_port(Port("data_vec", PortRole.CONTROL, (data_vec,), direction=PortDirection.OUT, borrowed=True))
    arbs = []
    for k in range(num_weights):
        place = builder.add_place(f"arb{k}", f"arb of weight {k}")
        builder.add_port(Port(f"arb{k}", PortRole.CONTROL, (place,), direction=PortDirection.OUT, borrowed=True))
        arbs.append(place)
    builder.add_transition("emit", "emit", consume=[stage], produce=[data_vec] + arbs)
    return Segment("nv", builder.build(), Category.INFRASTRUCTURE)


def gen_metric_instrument(recorders: Sequence[Tuple[str, ValueDomain]], epoch_bound: int) -> Segment:
    """
    Recorder groups fed by taps on the BNN transitions, the epoch counter and
    a flush chain that empties every recorder between data vectors. The
    learning rate and the epoch counter are never flushed.
    """
    builder = NetBuilder()
    epoch = builder.add_counter("epoch", epoch_bound, label="epoch")
    builder.add_port(Port("epoch", PortRole.CONTROL, (epoch,), direction=PortDirection.STATE, borrowed=False))
    start = builder.add_place("flush_start", "instrument flush")
    builder.add_port(Port("flush_start", PortRole.CONTROL, (start,), direction=PortDirection.IN, borrowed=False))
    stage = start
    for i, (group, domain) in enumerate(recorders):
        places = value_places(builder, group, domain)
        builder.add_port(value_port(group, places, domain, incoming=True, borrowed=False))
        nxt = builder.add_place(f"g{i + 1}", f"flushed {group}")
        for value, place in zip(domain, places):
            builder.add_transition(f"flush.{group}.{fmt_value(value)}", f"flush {group}",
                                   consume=[stage, place], produce=[nxt])
        stage = nxt
    end = builder.add_place("flush_end", "instrument flushed")
    builder.add_transition("flushed", "recorders flushed", consume=[stage], produce=[end])
    builder.add_port(Port("flush_end", PortRole.CONTROL, (end,), direction=PortDirection.OUT, borrowed=False))
    return Segment("instrument", builder.build(), Category.INFRASTRUCTURE)


def gen_epoch_budget(n: int) -> Segment:
    """Counter holding n tokens; the first data row spends one per epoch."""
    if n < 1:
        raise ValueError("epoch budget must be at least 1")
    builder = NetBuilder()
    place = builder.add_counter("budget", n, tokens=n, label="epoch budget")
    builder.add_port(Port("budget", PortRole.CONTROL, (place,), direction=PortDirection.OUT, borrowed=False))
    return Segment("budget", builder.build(), Category.INFRASTRUCTURE)
