# tests/test_blueprints.py
from fractions import Fraction

import pytest

from blueprints.compose import (
    Assembler,
    NetworkSpec,
    compose_bnn,
    compose_bnn_with_ledger,
    instrument_recorders,
)
from blueprints.segments import (
    OutputSpec,
    PortMismatchError,
    gen_function_mapper,
    gen_input_loader,
    gen_learning_rate,
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
    table_hardtanh,
    table_hinge,
    table_product,
    table_sign,
)
from bnn.bitfloat import Fp32Bits
from engine.simulator import PolicyKind, SchedulePolicy, Simulator
from net.model import Marking
from verify.suites import weight_bits_places


def run_to_quiescence(net, initial=None):
    return Simulator(net).run(SchedulePolicy(PolicyKind.PRIORITY), initial=initial).final_marking


def test_sign_and_tanh_segment_sizes():
    assert gen_function_mapper("sign", table_sign(TERNARY)).size() == (2, 3, 6)
    assert gen_function_mapper("hardtanh", table_hardtanh(ValueDomain.span(-2, 2))).size() == (3, 5, 10)


@pytest.mark.parametrize("y", [-1, 1])
@pytest.mark.parametrize("z", [-2, 0, 2])
def test_hinge_tables_are_exhaustive(y, z):
    mul, sub, clip = table_hinge(sum_domain(2))
    loss = clip(sub(mul(y, z)))
    assert loss == max(0, 1 - y * z)
    assert loss in (0, 1, 3)
    assert table_dloss(sum_domain(2))(y, z) == (-y if y * z < 1 else 0)


def test_mapper_fires_the_row_of_its_input():
    segment = gen_function_mapper("product", table_product(BIT, SIGN, names=("a", "w"), read_only=("a",)))
    a, w, out = segment.port("a"), segment.port("w"), segment.port("out")
    final = run_to_quiescence(segment.net, Marking.of([a.place_for(1), w.place_for(-1)]))
    assert final.tokens(out.place_for(-1)) == 1
    # read-only input stays marked
    assert final.tokens(a.place_for(1)) == 1


def test_mapper_companion_outputs_and_copies():
    mul, _, _ = table_hinge(sum_domain(2))
    segment = gen_function_mapper("hinge_mul", mul, [OutputSpec(copies=2), OutputSpec("dldz", table_dloss())],
                                  done=True)
    assert {"out", "out_1", "dldz", "done"} <= set(segment.ports)
    initial = Marking.of([segment.port("y").place_for(1), segment.port("z").place_for(-2)])
    final = run_to_quiescence(segment.net, initial)
    assert final.tokens(segment.port("dldz").place_for(-1)) == 1
    assert final.tokens(segment.port("out_1").place_for(-2)) == 1
    assert final.tokens(segment.port("done").places[0]) == 1


@pytest.mark.parametrize("value,expected", [(0.25, 1), (-0.5, -1), (-0.0, 1), (0.0, 1), (-1.9, -1)])
def test_weight_register_binarizes(value, expected):
    segment = gen_weight_register(Fp32Bits.from_float(value), copies=2)
    final = run_to_quiescence(segment.net)
    assert final.tokens(segment.port("wb").place_for(expected)) == 1
    assert final.tokens(segment.port("wb_1").place_for(expected)) == 1
    assert final.tokens(segment.port("ste_go").places[0]) == 1


def test_editable_register_toggles_before_arming():
    segment = gen_weight_register(Fp32Bits.from_int(0), editable=True)
    assert "r" in segment.net.initial_marking.marked
    assert "arb" not in segment.net.initial_marking.marked


@pytest.mark.parametrize("value,expected", [(0.5, 1), (1.0, 1), (-1.0, 1), (-1.5, 0), (1.0000001, 0), (0.0, 1)])
def test_ste_window(value, expected):
    segment = gen_ste()
    w = Fp32Bits.from_float(value)
    initial = Marking.of(weight_bits_places(segment, w) + [segment.port("ste_go").places[0]])
    final = run_to_quiescence(segment.net, initial)
    assert final.tokens(segment.port("out").place_for(expected)) == 1


def test_loader_cycles_through_rows(xor_spec):
    segment = gen_input_loader(xor_spec.dataset)
    sim = Simulator(segment.net)
    report = sim.run(SchedulePolicy(PolicyKind.PRIORITY))
    assert report.trace.transitions == ["row0"]
    final = report.final_marking
    assert final.tokens(segment.port("a0").place_for(0)) == 1
    assert final.tokens(segment.port("y").place_for(-1)) == 1


def test_learning_rate_is_a_free_choice():
    segment = gen_learning_rate([Fraction(1, 10), Fraction(6, 10)])
    assert len(segment.net.transitions) == 2
    with pytest.raises(ValueError):
        gen_learning_rate([Fraction(1, 2) + Fraction(1, 100)])


def test_assembler_rejects_unconnected_borrowed_port():
    asm = Assembler()
    with pytest.raises(PortMismatchError, match="not connected"):
        asm.add("ste", gen_ste())


def test_assembler_rejects_shape_mismatch():
    asm = Assembler()
    sign = asm.add("s", gen_function_mapper("sign", table_sign(TERNARY)), open_ports=("x",))
    product = gen_function_mapper("product", table_product(SIGN, SIGN, names=("x", "w")))
    with pytest.raises(PortMismatchError, match="does not match"):
        asm.add("p", product, {"x": sign["x"]}, open_ports=("w",))


def test_composed_net_exports_its_interface(xor_spec, xor_net):
    ports = xor_net.port_map
    for name in ["rec.epoch", "lr", "data_vec", "a[0]", "x[1]", "yhat", "loss", "w5.b31"]:
        assert name in ports
    assert len(instrument_recorders(xor_spec)) == 2 + 6 + 2 + 2 + 2 + 6 * 4


def test_ledger_adds_up_to_the_net(xor_spec):
    net, ledger = compose_bnn_with_ledger(xor_spec, instrument=True, budget=False)
    assert sum(e.places for e in ledger) == len(net.places)
    assert sum(e.transitions for e in ledger) == len(net.transitions)
    assert sum(e.arcs for e in ledger) == len(net.arcs)
    assert {e.group for e in ledger} >= {"instrument", "hidden[0]", "hidden[1]", "output", "loss", "weight[5]"}


def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec(dataset=(((0, 1, 1), 1),))
    with pytest.raises(ValueError):
        NetworkSpec(learning_rates=(Fraction(1, 3),))
    with pytest.raises(ValueError):
        NetworkSpec(initial_weights=(Fp32Bits.from_float(0.5),))


def test_unknown_fault_table(xor_spec):
    with pytest.raises(ValueError, match="unknown fault tables"):
        compose_bnn(xor_spec, faults={"nope": {}})


def test_single_hidden_neuron_composes():
    spec = NetworkSpec(features=1, hidden=1, dataset=(((0,), -1), ((1,), 1)))
    net = compose_bnn(spec)
    assert "osum0.t.-1" in net.transition_map


def test_budget_request_needs_an_epoch_budget(xor_spec):
    assert xor_spec.epoch_budget is None
    with pytest.raises(ValueError, match="epoch_budget"):
        compose_bnn(xor_spec, budget=True)
    _, ledger = compose_bnn_with_ledger(xor_spec)
    assert "budget" not in {e.instance for e in ledger}
