# blueprints/compose.py
"""
Assembles the blueprint segments into the complete BNN net.

Segments are absorbed owner-first: the instrument (recorders, epoch
counter, flush places), the epoch budget, the loader, the learning rate
and the weight registers come before any segment that borrows their
places. Borrowed ports of every later segment are fused onto the ports
they are connected to.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Collection, Dict, List, Mapping, Optional, Sequence, Tuple

from blueprints.segments import (
    UNBOUNDED_EPOCHS,
    Category,
    OutputSpec,
    PortMismatchError,
    Segment,
    gen_epoch_budget,
    gen_function_mapper,
    gen_input_loader,
    gen_learning_rate,
    gen_loss_fork,
    gen_metric_instrument,
    gen_next_vector,
    gen_ste,
    gen_weight_register,
)
from blueprints.tables import (
    BIT,
    JDOMAIN,
    SIGN,
    TERNARY,
    FunctionTable,
    ValueDomain,
    sum_domain,
    table_dloss,
    table_grad,
    table_hardtanh,
    table_hinge,
    table_lr_product,
    table_product,
    table_sign,
    table_sum,
    tabulate,
)
from blueprints.weight_update import gen_weight_update
from bnn.bitfloat import LEARNING_RATES, Fp32Bits
from bnn.refbnn import initial_weights
from net.model import Net, NetBuilder, Port, validate

logger = logging.getLogger(__name__)

CYCLE_TRANSITION = "nv.next_vector"
DATA_VEC = "loader.data_vec"
XOR_DATASET: Tuple[Tuple[Tuple[int, ...], int], ...] = (
    ((0, 0), -1), ((0, 1), 1), ((1, 0), 1), ((1, 1), -1),
)
FAULTABLE_TABLES = (
    "input_product", "hardtanh", "sign", "output_product", "prediction", "hinge_mul", "hinge_sub",
    "hinge_clip", "dloss", "grad_input_hidden", "grad_hidden_output", "grad_real", "lr_product",
)


@dataclass(frozen=True)
class NetworkSpec:
    features: int = 2
    hidden: int = 2
    dataset: Tuple[Tuple[Tuple[int, ...], int], ...] = XOR_DATASET
    learning_rates: Tuple[Fraction, ...] = (Fraction(6, 10),)
    epoch_budget: Optional[int] = None
    seed: int = 7
    initial_weights: Optional[Tuple[Fp32Bits, ...]] = None

    def __post_init__(self):
        if self.features < 1 or self.hidden < 1:
            raise ValueError("features and hidden must be positive")
        dataset = tuple((tuple(int(b) for b in row), int(label)) for row, label in self.dataset)
        if not dataset:
            raise ValueError("dataset must not be empty")
        for k, (row, label) in enumerate(dataset):
            if len(row) != self.features:
                raise ValueError(f"row {k} has {len(row)} features, expected {self.features}")
            if any(b not in (0, 1) for b in row):
                raise ValueError(f"row {k} features must be bits")
            if label not in (-1, 1):
                raise ValueError(f"row {k} label must be -1 or +1")
        object.__setattr__(self, "dataset", dataset)
        rates = tuple(sorted({Fraction(r) for r in self.learning_rates}))
        if not rates or not set(rates) <= set(LEARNING_RATES):
            raise ValueError("learning rates must be a nonempty subset of 0.1..0.9")
        object.__setattr__(self, "learning_rates", rates)
        if self.epoch_budget is not None and self.epoch_budget < 1:
            raise ValueError("epoch budget must be at least 1")
        if self.initial_weights is not None:
            weights = tuple(self.initial_weights)
            if len(weights) != self.num_weights:
                raise ValueError(f"expected {self.num_weights} initial weights, got {len(weights)}")
            for k, w in enumerate(weights):
                if w.bit(30):
                    raise ValueError(f"initial weight {k} ({w}) has magnitude 2 or more")
                if w.is_subnormal:
                    raise ValueError(f"initial weight {k} ({w}) is subnormal")
            object.__setattr__(self, "initial_weights", weights)

    @property
    def num_weights(self) -> int:
        return self.features * self.hidden + self.hidden

    @property
    def input_hidden_weights(self) -> int:
        return self.features * self.hidden


@dataclass(frozen=True)
class LedgerEntry:
    """Size of one absorbed segment; borrowed places are counted by their owner."""
    instance: str
    segment: str
    category: Category
    group: str
    places: int
    transitions: int
    arcs: int

    @property
    def total(self) -> int:
        return self.places + self.transitions + self.arcs


class Assembler:
    """Absorbs segments one by one, fusing each borrowed port onto a connected port."""

    def __init__(self):
        self.builder = NetBuilder()
        self.ledger: List[LedgerEntry] = []
        self.logger = logging.getLogger(__name__)

    def add(self, instance: str, segment: Segment, connect: Optional[Mapping[str, Port]] = None,
            group: str = "", open_ports: Collection[str] = ()) -> Dict[str, Port]:
        """
        Absorb `segment` as `instance`. Borrowed ports must be connected unless
        listed in `open_ports`, which keeps their places as this instance's own.
        """
        connect = dict(connect or {})
        unknown = sorted(set(connect) - set(segment.ports))
        if unknown:
            raise PortMismatchError(f"{instance}: no ports named {unknown}")
        fuse: Dict[str, str] = {}
        for port in segment.net.ports:
            target = connect.get(port.name)
            if target is None:
                if port.borrowed and port.name not in open_ports:
                    raise PortMismatchError(f"{instance}: borrowed port {port.name} is not connected")
                continue
            if not port.borrowed:
                raise PortMismatchError(f"{instance}: port {port.name} owns its places and cannot be fused")
            if len(port.places) != len(target.places) or tuple(port.domain) != tuple(target.domain):
                raise PortMismatchError(
                    f"{instance}: port {port.name} ({len(port.places)} places) does not match {target.name} "
                    f"({len(target.places)} places)")
            fuse.update(zip(port.places, target.places))
        rename = self.builder.absorb(segment.net, fuse, prefix=instance)
        places, transitions, arcs = segment.size()
        self.ledger.append(LedgerEntry(instance, segment.name, segment.category, group,
                                       places, transitions, arcs))
        self.logger.debug(f"absorbed {instance} ({segment.name}): fused {len(fuse)} places")
        return {port.name: port.renamed(rename, f"{instance}.{port.name}") for port in segment.net.ports}


def export_port(port: Port, name: str) -> Port:
    return Port(name, port.role, port.places, port.domain, port.direction, False)


def instrument_recorders(spec: NetworkSpec) -> List[Tuple[str, str, ValueDomain]]:
    """(exported name, recorder group, domain) of every recorder, in flush order."""
    F, H, K = spec.features, spec.hidden, spec.num_weights
    rows = [("rec.vec", "vec", ValueDomain.span(0, len(spec.dataset) - 1)), ("rec.y", "y", SIGN)]
    rows += [(f"rec.wb[{k}]", f"wb{k}", SIGN) for k in range(K)]
    rows += [(f"rec.s[{i}]", f"s{i}", ValueDomain.span(-F, F)) for i in range(H)]
    rows += [(f"rec.o[{i}]", f"o{i}", SIGN) for i in range(H)]
    rows += [("rec.z", "z", sum_domain(H)), ("rec.dldz", "dldz", TERNARY)]
    rows += [(f"rec.gb[{k}]", f"gb{k}", TERNARY) for k in range(K)]
    rows += [(f"rec.ste[{k}]", f"ste{k}", BIT) for k in range(K)]
    rows += [(f"rec.gr[{k}]", f"gr{k}", TERNARY) for k in range(K)]
    rows += [(f"rec.j[{k}]", f"j{k}", JDOMAIN) for k in range(K)]
    return rows


def _table_source(faults: Optional[Mapping[str, Mapping[Tuple, Fraction]]]) -> Callable[[str, FunctionTable], FunctionTable]:
    faults = dict(faults or {})
    unknown = sorted(set(faults) - set(FAULTABLE_TABLES))
    if unknown:
        raise ValueError(f"unknown fault tables {unknown}; choose from {FAULTABLE_TABLES}")

    def table(name: str, default: FunctionTable) -> FunctionTable:
        return default.with_rows(faults[name]) if name in faults else default

    return table


def sum_chain(asm: Assembler, name: str, terms: Sequence[Port], group: str,
               copies: int = 1, tap: Optional[Port] = None) -> Dict[str, Port]:
    """Left-to-right chain of two-operand sums; a single term goes through an identity."""
    final = [OutputSpec(copies=copies, tap=tap is not None)]
    tap_connect = {"out_tap": tap} if tap is not None else {}
    if len(terms) == 1:
        domain = ValueDomain(terms[0].domain)
        identity = tabulate([("x0", domain)], lambda v: v, output=domain)
        return asm.add(f"{name}0", gen_function_mapper("sum", identity, final), {"x0": terms[0], **tap_connect}, group)
    acc = terms[0]
    ports: Dict[str, Port] = {}
    for index in range(1, len(terms)):
        last = index == len(terms) - 1
        table = table_sum(ValueDomain(acc.domain), ValueDomain(terms[index].domain))
        segment = gen_function_mapper("sum", table, final if last else [OutputSpec()])
        connect = {"x0": acc, "x1": terms[index], **(tap_connect if last else {})}
        ports = asm.add(f"{name}{index}", segment, connect, group)
        acc = ports["out"]
    return ports


def compose_bnn_with_ledger(spec: NetworkSpec, instrument: bool = True, budget: Optional[bool] = None,
                            faults: Optional[Mapping[str, Mapping[Tuple, Fraction]]] = None
                            ) -> Tuple[Net, List[LedgerEntry]]:
    F, H, K = spec.features, spec.hidden, spec.num_weights
    table = _table_source(faults)
    asm = Assembler()
    exported: List[Port] = []
    # budget=None follows the spec; True without an epoch budget is an error
    if budget and spec.epoch_budget is None:
        raise ValueError("an epoch budget segment needs spec.epoch_budget to be set")
    use_budget = spec.epoch_budget is not None if budget is None else budget
    epoch_bound = spec.epoch_budget if use_budget else UNBOUNDED_EPOCHS

    rec: Dict[str, Port] = {}
    inst: Dict[str, Port] = {}
    if instrument:
        recorders = instrument_recorders(spec)
        inst = asm.add("instrument", gen_metric_instrument([(g, d) for _, g, d in recorders], epoch_bound),
                       group="instrument")
        rec = {name: inst[g] for name, g, _ in recorders}
        exported.append(export_port(inst["epoch"], "rec.epoch"))
        exported += [export_port(port, name) for name, port in rec.items()]

    def tap(name: str) -> Dict[str, Port]:
        return {"out_tap": rec[name]} if instrument else {}

    connect: Dict[str, Port] = {}
    if use_budget:
        connect["budget"] = asm.add("budget", gen_epoch_budget(spec.epoch_budget), group="infrastructure")["budget"]
    if instrument:
        connect.update(y_tap=rec["rec.y"], vec_tap=rec["rec.vec"], epoch=inst["epoch"])
    loader = asm.add("loader", gen_input_loader(spec.dataset, taps=instrument,
                                                epoch_bound=epoch_bound if instrument else None,
                                                budget_bound=spec.epoch_budget if use_budget else None),
                     connect, group="infrastructure")
    lr = asm.add("lr", gen_learning_rate(spec.learning_rates), group="training")
    exported.append(export_port(lr["lr"], "lr"))
    exported.append(export_port(loader["data_vec"], "data_vec"))
    exported += [export_port(loader[f"a{j}"], f"a[{j}]") for j in range(F)]

    # weight registers: input-hidden k = i*F + j, hidden-output k = F*H + i
    regs = []
    for k, initial in enumerate(initial_weights(spec)):
        hidden_output = k >= spec.input_hidden_weights
        segment = gen_weight_register(initial, copies=1 + F if hidden_output else 1, tap=instrument, name=f"w{k}")
        group = "output" if hidden_output else f"hidden[{k // F}]"
        regs.append(asm.add(f"w{k}", segment, {"wb_tap": rec[f"rec.wb[{k}]"]} if instrument else {}, group))
        exported += [export_port(regs[k][f"b{pos}"], f"w{k}.b{pos}") for pos in range(32)]

    # forward pass
    taps = [OutputSpec(tap=instrument)]
    input_product = gen_function_mapper("product", table("input_product", table_product(
        BIT, SIGN, names=("a", "w"), read_only=("a",))))
    output_product = gen_function_mapper("product", table("output_product", table_product(
        SIGN, SIGN, names=("x", "w"), read_only=("x",))), taps)
    x_ports, o_ports = [], []
    for i in range(H):
        group = f"hidden[{i}]"
        terms = [asm.add(f"h{i}.p{j}", input_product, {"a": loader[f"a{j}"], "w": regs[i * F + j]["wb"]}, group)["out"]
                 for j in range(F)]
        s = sum_chain(asm, f"h{i}.sum", terms, group, tap=rec.get(f"rec.s[{i}]"))["out"]
        ht = asm.add(f"h{i}.tanh", gen_function_mapper("hardtanh", table("hardtanh", table_hardtanh(
            ValueDomain(s.domain)))), {"x": s}, group)["out"]
        x = asm.add(f"h{i}.sign", gen_function_mapper("sign", table("sign", table_sign(
            ValueDomain(ht.domain)))), {"x": ht}, group)["out"]
        x_ports.append(x)
        o_ports.append(asm.add(f"h{i}.out", output_product,
                               {"x": x, "w": regs[spec.input_hidden_weights + i]["wb"], **tap(f"rec.o[{i}]")},
                               group)["out"])
    exported += [export_port(x, f"x[{i}]") for i, x in enumerate(x_ports)]

    # the prediction forwards z to the hinge stage, so prediction precedes loss
    z = sum_chain(asm, "osum", o_ports, "output", tap=rec.get("rec.z"))
    z_domain = ValueDomain(z["out"].domain)
    forward_z = tabulate([("x", z_domain)], lambda v: v, output=z_domain)
    pred = asm.add("pred", gen_function_mapper("prediction", table("prediction", table_sign(z_domain)),
                                               [OutputSpec(), OutputSpec("z", forward_z)], done=True),
                   {"x": z["out"]}, "output")
    exported.append(export_port(pred["out"], "yhat"))

    # hinge loss, dL/dz computed alongside y*z
    mul, sub, clip = table_hinge(z_domain)
    dloss = table("dloss", table_dloss(z_domain))
    hmul = asm.add("hmul", gen_function_mapper("hinge_mul", table("hinge_mul", mul), [
        OutputSpec(), OutputSpec("dldz", dloss, tap=instrument)]),
        {"y": loader["y"], "z": pred["z"], **({"dldz_tap": rec["rec.dldz"]} if instrument else {})}, "loss")
    hsub = asm.add("hsub", gen_function_mapper("hinge_sub", table("hinge_sub", sub)), {"u": hmul["out"]}, "loss")
    hclip = asm.add("hclip", gen_function_mapper("hinge_clip", table("hinge_clip", clip), done=True),
                    {"v": hsub["out"]}, "loss")
    exported.append(export_port(hclip["out"], "loss"))
    fork = asm.add("fork", gen_loss_fork(K, TERNARY), {"in": hmul["dldz"]}, "loss")

    # per-weight training chain
    grad_ih = gen_function_mapper("grad", table("grad_input_hidden", table_grad("input-hidden")), taps,
                                  category=Category.TRAINING)
    grad_ho = gen_function_mapper("grad", table("grad_hidden_output", table_grad("hidden-output")), taps,
                                  category=Category.TRAINING)
    grad_real = gen_function_mapper("grad_real", table("grad_real", table_grad("real")), taps,
                                    category=Category.TRAINING)
    lr_product = gen_function_mapper("lr_product", table("lr_product", table_lr_product()), taps,
                                     category=Category.TRAINING)
    ste = gen_ste(tap=instrument)
    update = gen_weight_update()
    dones = []
    for k in range(K):
        group = f"weight[{k}]"
        dldz = fork["out" if k == 0 else f"out_{k}"]
        if k < spec.input_hidden_weights:
            i, j = divmod(k, F)
            gb = asm.add(f"g{k}", grad_ih, {"dldz": dldz, "wbx": regs[spec.input_hidden_weights + i][f"wb_{1 + j}"],
                                           "a": loader[f"a{j}"], **tap(f"rec.gb[{k}]")}, group)["out"]
        else:
            gb = asm.add(f"g{k}", grad_ho, {"dldz": dldz, "x": x_ports[k - spec.input_hidden_weights],
                                           **tap(f"rec.gb[{k}]")}, group)["out"]
        bits = {f"b{pos}": regs[k][f"b{pos}"] for pos in range(32)}
        st = asm.add(f"ste{k}", ste, {**{f"b{pos}": bits[f"b{pos}"] for pos in range(30)},
                                      "ste_go": regs[k]["ste_go"], **tap(f"rec.ste[{k}]")}, group)["out"]
        gr = asm.add(f"gr{k}", grad_real, {"gb": gb, "ste": st, **tap(f"rec.gr[{k}]")}, group)["out"]
        j_port = asm.add(f"lrp{k}", lr_product, {"eta": lr["lr"], "g": gr, **tap(f"rec.j[{k}]")}, group)["out"]
        dones.append(asm.add(f"upd{k}", update, {"J": j_port, **bits}, group)["done"])

    # cycle boundary
    flush = [(f"a{j}", BIT) for j in range(F)] + [(f"x{i}", SIGN) for i in range(H)]
    flush += [("yhat", SIGN), ("loss", ValueDomain(hclip["out"].domain))]
    connect = {f"done{k}": dones[k] for k in range(K)}
    connect.update(pred_done=pred["done"], loss_done=hclip["done"], yhat=pred["out"], loss=hclip["out"],
                   data_vec=loader["data_vec"])
    connect.update({f"a{j}": loader[f"a{j}"] for j in range(F)})
    connect.update({f"x{i}": x_ports[i] for i in range(H)})
    connect.update({f"arb{k}": regs[k]["arb"] for k in range(K)})
    if instrument:
        connect.update(flush_out=inst["flush_start"], emit_in=inst["flush_end"])
    asm.add("nv", gen_next_vector(K, flush, waits=("pred_done", "loss_done"), splice=instrument),
            connect, "infrastructure")

    net = validate(asm.builder.build().with_ports(exported))
    places, transitions, arcs = net.size()
    logger.info(f"composed BNN F={F} H={H}: {places} places, {transitions} transitions, {arcs} arcs "
                f"(instrument={instrument}, budget={use_budget})")
    return net, asm.ledger


def compose_bnn(spec: NetworkSpec, instrument: bool = True, budget: Optional[bool] = None,
                faults: Optional[Mapping[str, Mapping[Tuple, Fraction]]] = None) -> Net:
    return compose_bnn_with_ledger(spec, instrument, budget, faults)[0]
