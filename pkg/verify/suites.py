# verify/suites.py
"""
Verification tiers.

segment:    every blueprint under a closed environment, explored exhaustively
component:  small assemblies (hidden neuron, loss, binarization + STE,
            learning-rate product) explored exhaustively
system:     the composed net checked on seeded traces, plus a budgeted run
            whose dead final marking witnesses irreversibility
"""
import logging
from dataclasses import replace
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from blueprints.compose import (
    CYCLE_TRANSITION,
    Assembler,
    NetworkSpec,
    compose_bnn,
    export_port,
    sum_chain,
)
from blueprints.segments import (
    Category,
    OutputSpec,
    Segment,
    fmt_value,
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
    SIGN,
    TERNARY,
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
)
from blueprints.weight_update import gen_weight_update
from bnn.bitfloat import Fp32Bits
from bnn.refbnn import initial_weights
from engine.simulator import PolicyKind, RunReport, SchedulePolicy, Simulator, StopCondition, Terminal
from net.model import ArcKind, ContractError, Marking, Net, NetBuilder, PortDirection, PortRole
from verify.checks import (
    PropertyReport,
    Verdict,
    check_1safe,
    check_bounded,
    check_deadlock_free,
    check_mutex,
    check_one_hot,
    check_precedence,
    check_reachable,
    check_reversibility,
)
from verify.explore import explore

logger = logging.getLogger(__name__)

STE_SAMPLES = (Fp32Bits.from_float(0.5), Fp32Bits.from_float(-1.5), Fp32Bits.from_float(1.0))
UPDATE_SAMPLES = (Fp32Bits.from_float(0.75), Fp32Bits.from_float(-0.1), Fp32Bits.from_int(0))
ENV_DONE = "env.done"


def close_segment(segment: Segment, cyclic: bool = True, initial: Iterable[str] = (),
                  pick: Optional[Mapping[str, Sequence]] = None) -> Net:
    """
    Closed environment: a sequential generator puts one value (or control
    token) on every `in` port, then sinks collect every `out` port in order,
    then drains empty inputs that the segment only reads. Cyclic mode starts
    over; one-shot mode ends in env.done. `state` ports are left alone and
    `initial` marks extra places (e.g. weight bits). `pick` narrows a value
    port to the listed values.
    """
    pick = {name: {Fraction(v) for v in values} for name, values in (pick or {}).items()}
    net = segment.net
    builder = NetBuilder.from_net(net)
    ins = [p for p in net.ports if p.direction is PortDirection.IN]
    outs = [p for p in net.ports if p.direction is PortDirection.OUT]
    for port in ins:
        for place in port.places:
            builder.mark(place, 0)
    for place in initial:
        builder.mark(place)
    consumed = {arc.source for arc in net.arcs if arc.kind is ArcKind.NORMAL and arc.source in net.place_map}
    read_only = [p for p in ins if p.role is PortRole.VALUE_IN and not consumed & set(p.places)]

    stage = builder.add_place("env.s0", "environment start", marked=True)
    start = stage
    for i, port in enumerate(ins):
        nxt = builder.add_place(f"env.s{i + 1}", f"generated {port.name}")
        if port.role is PortRole.VALUE_IN:
            for value, place in zip(port.domain, port.places):
                if port.name in pick and value not in pick[port.name]:
                    continue
                builder.add_transition(f"env.gen.{port.name}.{fmt_value(value)}", f"{port.name}={fmt_value(value)}",
                                       consume=[stage], produce=[place, nxt])
        else:
            builder.add_transition(f"env.gen.{port.name}", port.name, consume=[stage],
                                   produce=list(port.places) + [nxt])
        stage = nxt
    for i, port in enumerate(outs + read_only):
        nxt = builder.add_place(f"env.c{i + 1}", f"collected {port.name}")
        if port.role in (PortRole.VALUE_IN, PortRole.VALUE_OUT):
            for value, place in zip(port.domain, port.places):
                builder.add_transition(f"env.sink.{port.name}.{fmt_value(value)}", f"collect {port.name}",
                                       consume=[stage, place], produce=[nxt])
        else:
            builder.add_transition(f"env.sink.{port.name}", f"collect {port.name}",
                                   consume=[stage] + list(port.places), produce=[nxt])
        stage = nxt
    if cyclic:
        builder.add_transition("env.restart", "restart", consume=[stage], produce=[start])
    else:
        done = builder.add_place(ENV_DONE, "environment finished")
        builder.add_transition("env.finish", "finish", consume=[stage], produce=[done])
    return builder.build().with_ports(net.ports)


def _one_shot_terminal(marking: Marking) -> bool:
    return marking.tokens(ENV_DONE) > 0


def weight_bits_places(segment: Segment, w: Fp32Bits, prefix: str = "b") -> List[str]:
    """Places encoding `w` on a segment's borrowed weight bit ports."""
    places = []
    for pos in range(32):
        port = segment.ports.get(f"{prefix}{pos}")
        if port is not None:
            places.append(port.places[w.bit(pos)])
    return places


def _segment_reports(subject: str, segment: Segment, net: Net, max_states: int,
                     terminal: Optional[Callable[[Marking], bool]] = None,
                     mutex: Sequence[Tuple[str, ...]] = ()) -> List[PropertyReport]:
    graph = explore(net, max_states)
    reports = [check_1safe(graph), check_deadlock_free(graph, terminal)]
    for port in segment.net.ports:
        if port.role in (PortRole.VALUE_IN, PortRole.VALUE_OUT) and len(port.places) > 1:
            reports.append(check_one_hot(graph, port))
    reports += [check_mutex(graph, places) for places in mutex]
    return [replace(r, subject=subject) for r in reports]


def _mapper_segments(spec: NetworkSpec) -> List[Segment]:
    F, H = spec.features, spec.hidden
    z_domain = sum_domain(H)
    mul, sub, clip = table_hinge(z_domain)
    return [
        gen_function_mapper("sign", table_sign(TERNARY)),
        gen_function_mapper("hardtanh", table_hardtanh(ValueDomain.span(-F, F))),
        gen_function_mapper("product", table_product(BIT, SIGN, names=("a", "w"), read_only=("a",))),
        gen_function_mapper("product", table_product(SIGN, SIGN, names=("x", "w"), read_only=("x",))),
        gen_function_mapper("sum", table_sum(TERNARY, TERNARY)),
        gen_function_mapper("hinge_mul", mul, [OutputSpec(), OutputSpec("dldz", table_dloss(z_domain))]),
        gen_function_mapper("hinge_sub", sub),
        gen_function_mapper("hinge_clip", clip, done=True),
        gen_function_mapper("grad", table_grad("input-hidden")),
        gen_function_mapper("grad", table_grad("hidden-output")),
        gen_function_mapper("grad_real", table_grad("real")),
        gen_function_mapper("lr_product", table_lr_product()),
        gen_loss_fork(spec.num_weights, TERNARY),
    ]


def segment_suite(spec: NetworkSpec, max_states: int = 10_000_000) -> List[PropertyReport]:
    reports: List[PropertyReport] = []
    for segment in _mapper_segments(spec):
        subject = f"{segment.name}({','.join(p.name for p in segment.net.ports if p.role is PortRole.VALUE_IN)})"
        reports += _segment_reports(subject, segment, close_segment(segment), max_states)

    loader = gen_input_loader(spec.dataset)
    closed = close_segment(loader)
    reports += _segment_reports("loader", loader, closed, max_states)
    reports.append(replace(check_reversibility(explore(closed, max_states)), subject="loader"))

    weights = initial_weights(spec)
    for k in sorted({0, spec.num_weights - 1}):
        copies = 1 + spec.features if k >= spec.input_hidden_weights else 1
        register = gen_weight_register(weights[k], copies=copies)
        wb = tuple(register.port("wb").places)
        reports += _segment_reports(f"weight_register[{k}]", register, close_segment(register), max_states,
                                    mutex=[wb])

    ste = gen_ste()
    for w in STE_SAMPLES:
        closed = close_segment(ste, initial=weight_bits_places(ste, w))
        reports += _segment_reports(f"ste[{w.to_float():g}]", ste, closed, max_states)

    rates = gen_learning_rate(spec.learning_rates)
    lr_places = rates.port("lr").places
    reports += _segment_reports("learning_rate", rates, close_segment(rates, cyclic=False), max_states,
                                terminal=lambda m: any(m.tokens(p) for p in lr_places))

    update = gen_weight_update()
    for w in UPDATE_SAMPLES:
        closed = close_segment(update, cyclic=False, initial=weight_bits_places(update, w))
        reports += _segment_reports(f"weight_update[{w.hex()}]", update, closed, max_states, _one_shot_terminal)

    flush = [(f"a{j}", BIT) for j in range(spec.features)] + [("yhat", SIGN)]
    nv = gen_next_vector(spec.num_weights, flush)
    reports += _segment_reports("next_vector", nv, close_segment(nv), max_states)

    recorders = [("vec", ValueDomain.span(0, len(spec.dataset) - 1)), ("y", SIGN), ("dldz", TERNARY)]
    instrument = gen_metric_instrument(recorders, spec.epoch_budget or 100)
    first = {name: [domain.values[0]] for name, domain in recorders}
    reports += _segment_reports("instrument", instrument, close_segment(instrument, pick=first), max_states)

    budget = gen_epoch_budget(spec.epoch_budget or 1)
    reports += _segment_reports("epoch_budget", budget, close_segment(budget, cyclic=False), max_states,
                                _one_shot_terminal)
    logger.info(f"segment tier: {len(reports)} checks")
    return reports


def hidden_neuron_component(features: int) -> Segment:
    asm = Assembler()
    product = gen_function_mapper("product", table_product(BIT, SIGN, names=("a", "w"), read_only=("a",)))
    ports, terms = [], []
    for j in range(features):
        p = asm.add(f"p{j}", product, group="hidden[0]", open_ports=("a", "w"))
        ports += [export_port(p["a"], f"a{j}"), export_port(p["w"], f"w{j}")]
        terms.append(p["out"])
    s = sum_chain(asm, "sum", terms, "hidden[0]")["out"]
    ht = asm.add("tanh", gen_function_mapper("hardtanh", table_hardtanh(ValueDomain(s.domain))), {"x": s})["out"]
    x = asm.add("sign", gen_function_mapper("sign", table_sign(ValueDomain(ht.domain))), {"x": ht})["out"]
    ports.append(export_port(x, "x"))
    return Segment("hidden_neuron", asm.builder.build().with_ports(ports), Category.INFERENCE)


def loss_component(hidden: int) -> Segment:
    z_domain = sum_domain(hidden)
    mul, sub, clip = table_hinge(z_domain)
    asm = Assembler()
    hmul = asm.add("hmul", gen_function_mapper("hinge_mul", mul, [OutputSpec(), OutputSpec("dldz", table_dloss(z_domain))]),
                   open_ports=("y", "z"))
    hsub = asm.add("hsub", gen_function_mapper("hinge_sub", sub), {"u": hmul["out"]})
    hclip = asm.add("hclip", gen_function_mapper("hinge_clip", clip, done=True), {"v": hsub["out"]})
    ports = [export_port(hmul["y"], "y"), export_port(hmul["z"], "z"), export_port(hmul["dldz"], "dldz"),
             export_port(hclip["out"], "loss"), export_port(hclip["done"], "done")]
    return Segment("loss", asm.builder.build().with_ports(ports), Category.TRAINING)


def binarization_component(initial: Fp32Bits) -> Segment:
    asm = Assembler()
    reg = asm.add("w", gen_weight_register(initial))
    ste = asm.add("ste", gen_ste(), {**{f"b{pos}": reg[f"b{pos}"] for pos in range(30)}, "ste_go": reg["ste_go"]})
    ports = [export_port(reg["arb"], "arb"), export_port(reg["wb"], "wb"), export_port(ste["out"], "ste")]
    return Segment("binarize_ste", asm.builder.build().with_ports(ports), Category.TRAINING)


def lr_gradient_component(rates: Sequence[Fraction]) -> Segment:
    asm = Assembler()
    lr = asm.add("lr", gen_learning_rate(rates))
    gr = asm.add("gr", gen_function_mapper("grad_real", table_grad("real")), open_ports=("gb", "ste"))
    j = asm.add("lrp", gen_function_mapper("lr_product", table_lr_product()), {"eta": lr["lr"], "g": gr["out"]})
    ports = [export_port(gr["gb"], "gb"), export_port(gr["ste"], "ste"), export_port(j["out"], "J")]
    return Segment("lr_gradient", asm.builder.build().with_ports(ports), Category.TRAINING)


def component_suite(spec: NetworkSpec, max_states: int = 10_000_000) -> List[PropertyReport]:
    reports: List[PropertyReport] = []
    neuron = hidden_neuron_component(spec.features)
    reports += _segment_reports("hidden_neuron", neuron, close_segment(neuron), max_states)

    loss = loss_component(spec.hidden)
    closed = close_segment(loss)
    reports += _segment_reports("loss", loss, closed, max_states)
    worst = loss.port("loss").place_for(3) if Fraction(3) in loss.port("loss").domain else None
    if worst is not None:
        reports.append(replace(check_reachable(explore(closed, max_states), {worst: 1}, "coverable"),
                               subject="loss"))

    for w in (initial_weights(spec)[0], STE_SAMPLES[1]):
        component = binarization_component(w)
        reports += _segment_reports(f"binarize_ste[{w.to_float():g}]", component, close_segment(component),
                                    max_states, mutex=[tuple(component.port("wb").places)])

    chain = lr_gradient_component(spec.learning_rates)
    reports += _segment_reports("lr_gradient", chain, close_segment(chain), max_states)
    logger.info(f"component tier: {len(reports)} checks")
    return reports


def precedence_chain(spec: NetworkSpec, net: Net) -> List[Tuple[str, Tuple[str, ...], Tuple[str, ...]]]:
    """(label, before, after) pairs of the causal order inside one cycle."""
    names = [t.name for t in net.transitions]

    def starting(prefix: str) -> Tuple[str, ...]:
        return tuple(n for n in names if n.startswith(prefix))

    output_sum = starting(f"osum{spec.hidden - 1}.t.")
    prediction, loss = starting("pred.t."), starting("hmul.t.")
    pairs = [("output sum < prediction", output_sum, prediction), ("prediction < loss", prediction, loss)]
    for k in range(spec.num_weights):
        gradient = starting(f"g{k}.t.")
        done = starting(f"upd{k}.bypass") + starting(f"upd{k}.jclr.")
        pairs += [(f"loss < gradient[{k}]", loss, gradient),
                  (f"gradient[{k}] < update[{k}]", gradient, done),
                  (f"update[{k}] < next_vector", done, (CYCLE_TRANSITION,))]
    return pairs


def check_reversibility_run(run: RunReport, net: Net) -> PropertyReport:
    """A quiescent run whose final marking is not the initial one shows the initial marking is lost."""
    if run.terminal is Terminal.QUIESCENT and run.final_marking != net.initial_marking:
        return PropertyReport("reversible", Verdict.VIOLATED, list(run.trace.transitions) if run.trace else None,
                              0, "dead final marking differs from the initial marking")
    return PropertyReport("reversible", Verdict.INCONCLUSIVE, None, 0, f"run ended {run.terminal.value}")


def system_suite(spec: NetworkSpec, seeds: Sequence[int] = tuple(range(10)), epochs: int = 1,
                 max_steps: Optional[int] = None) -> List[PropertyReport]:
    reports: List[PropertyReport] = []
    net = compose_bnn(spec, instrument=True, budget=False)
    sim = Simulator(net)
    cycles = epochs * len(spec.dataset)
    pairs = precedence_chain(spec, net)
    series: Dict[int, list] = {}
    for seed in seeds:
        subject = f"system[seed={seed}]"
        run = sim.run(SchedulePolicy(PolicyKind.UNIFORM, seed), StopCondition(max_steps, cycles))
        reports.append(replace(check_1safe(run), subject=subject))
        for label, before, after in pairs:
            report = check_precedence(run.trace, before, after, reset=CYCLE_TRANSITION)
            reports.append(replace(report, subject=subject, detail=f"{label}: {report.detail}"))
        reports.append(replace(check_bounded(run.trace, "instrument.epoch", epochs, net), subject=subject))
        order = [m.vector_index for m in run.metrics]
        expected = [i % len(spec.dataset) for i in range(len(order))]
        verdict = Verdict.HOLDS if order == expected and run.cycles == cycles else Verdict.VIOLATED
        reports.append(PropertyReport("cyclic-loading", verdict, None, 0, f"{run.cycles} cycles", subject=subject))
        series[seed] = run.metrics
    reference = next(iter(series.values()), [])
    same = all(m == reference for m in series.values())
    reports.append(PropertyReport("confluent", Verdict.HOLDS if same else Verdict.VIOLATED, None, 0,
                                  f"{len(series)} schedules compared", subject="system"))

    budgeted = replace(spec, epoch_budget=1)
    closed = compose_bnn(budgeted, instrument=False, budget=True)
    run = Simulator(closed).run(SchedulePolicy(seed=seeds[0] if seeds else 0), StopCondition(max_steps))
    terminal_ok = run.terminal is Terminal.QUIESCENT and run.cycles == len(spec.dataset)
    reports.append(PropertyReport("deadlock-free", Verdict.HOLDS if terminal_ok else Verdict.VIOLATED, None, 0,
                                  f"budget of one epoch ends after {run.cycles} cycles ({run.terminal.value})",
                                  subject="system[budget=1]"))
    reports.append(replace(check_reversibility_run(run, closed), expected_verdict=Verdict.VIOLATED,
                           subject="system[budget=1]"))
    logger.info(f"system tier: {len(reports)} checks over {len(seeds)} seeds")
    return reports


def apply_update(segment: Segment, w: Fp32Bits, j: Fraction, sim: Optional[Simulator] = None) -> Fp32Bits:
    """Run the weight-update segment once from W and J and read the new bits back."""
    sim = sim or Simulator(segment.net)
    marked = set(segment.net.initial_marking.marked) | set(weight_bits_places(segment, w))
    marked.add(segment.port("J").place_for(j))
    run = sim.run(SchedulePolicy(PolicyKind.PRIORITY), StopCondition(), record_trace=False,
                  initial=Marking.of(marked), decode=False)
    if run.terminal is not Terminal.QUIESCENT or not run.final_marking.tokens(segment.port("done").places[0]):
        raise ContractError(f"weight update of {w} by {j} ended {run.terminal.value} without done")
    bits = 0
    for pos in range(32):
        if run.final_marking.tokens(segment.port(f"b{pos}").places[1]):
            bits |= 1 << pos
    return Fp32Bits.from_int(bits)
