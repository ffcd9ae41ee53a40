# tests/test_engine.py
from dataclasses import replace
from fractions import Fraction

import pytest

from blueprints.compose import CYCLE_TRANSITION, compose_bnn
from bnn.refbnn import Mode
from engine.instrument import InstrumentError, decode_instrument, has_instrument, initial_bits, read_value
from engine.lockstep import lockstep
from engine.simulator import (
    PolicyKind,
    SchedulePolicy,
    Simulator,
    StopCondition,
    Terminal,
    fired_counts,
    replay,
    run,
)
from net.model import Marking, SafetyViolation


def test_quiescent_run_and_replay(pipeline_net):
    report = run(pipeline_net)
    assert report.terminal is Terminal.QUIESCENT
    assert report.trace.transitions == ["t0", "t1"]
    assert replay(pipeline_net, report.trace.transitions) == report.final_marking
    assert report.trace.digests[-1] == report.final_marking.digest()


def test_safety_violation_stops_the_run(unsafe_net):
    report = run(unsafe_net)
    assert report.terminal is Terminal.SAFETY_VIOLATION
    assert report.violation.place == "c"
    witness = report.trace.transitions + [report.violation.transition]
    assert isinstance(replay(unsafe_net, witness), SafetyViolation)


def test_step_limit(pipeline_net):
    report = run(pipeline_net, stop=StopCondition(max_steps=1))
    assert report.terminal is Terminal.STEP_LIMIT
    assert report.firings == 1


def test_one_epoch_produces_one_record_per_vector(xor_spec, xor_net):
    report = Simulator(xor_net).run(SchedulePolicy(seed=3), StopCondition(max_cycles=len(xor_spec.dataset)))
    assert report.terminal is Terminal.CYCLE_LIMIT
    assert [m.vector_index for m in report.metrics] == [0, 1, 2, 3]
    assert all(m.epoch == 1 for m in report.metrics)
    assert all(m.learning_rate == Fraction(3, 5) for m in report.metrics)
    assert fired_counts(report.trace)[CYCLE_TRANSITION] == 4


def test_priority_and_uniform_policies_agree_on_metrics(xor_spec, xor_net):
    sim = Simulator(xor_net)
    stop = StopCondition(max_cycles=len(xor_spec.dataset))
    uniform = sim.run(SchedulePolicy(PolicyKind.UNIFORM, 11), stop, record_trace=False)
    priority = sim.run(SchedulePolicy(PolicyKind.PRIORITY), stop, record_trace=False)
    assert uniform.metrics == priority.metrics


def test_budget_of_one_epoch_ends_quiescent(xor_spec):
    net = compose_bnn(replace(xor_spec, epoch_budget=1), instrument=True, budget=True)
    report = Simulator(net).run(SchedulePolicy(seed=1), record_trace=False)
    assert report.terminal is Terminal.QUIESCENT
    assert report.cycles == len(xor_spec.dataset)


def test_instrument_reads_initial_weights(xor_net):
    assert has_instrument(xor_net)
    bits = initial_bits(xor_net)
    assert len(bits) == 6


def test_instrument_rejects_an_empty_recorder(xor_net):
    with pytest.raises(InstrumentError):
        read_value(xor_net, Marking.of([]), "rec.z")
    with pytest.raises(InstrumentError):
        decode_instrument(xor_net, Marking.of([]))


def test_lockstep_one_epoch_matches_reference(xor_spec):
    report = lockstep(xor_spec, epochs=1, seeds=[0, 5])
    assert report.ok, report.first_mismatch
    assert all(r.cycles == 4 for r in report.results)


def test_lockstep_detects_an_injected_fault(xor_spec):
    # every hidden sign flipped
    faults = {"sign": {(-1,): 1, (0,): -1, (1,): -1}}
    net = compose_bnn(xor_spec, instrument=True, budget=False, faults=faults)
    report = lockstep(xor_spec, epochs=1, seeds=[0], net=net)
    assert not report.ok
    assert report.first_mismatch.cycle == 0
    assert report.first_mismatch.field == "activations"


@pytest.mark.slow
def test_lockstep_hundred_epochs(xor_spec):
    report = lockstep(xor_spec, epochs=100, seeds=[0, 1, 2])
    assert report.ok, report.first_mismatch
    assert all(r.cycles == 400 for r in report.results)


@pytest.mark.slow
def test_native_float_mode_is_informational(xor_spec):
    report = lockstep(xor_spec, epochs=3, seeds=[0], mode=Mode.NATIVE_FLOAT)
    assert report.summary()["mode"] == "native-float"


@pytest.mark.slow
def test_budget_of_hundred_epochs(xor_spec):
    net = compose_bnn(replace(xor_spec, epoch_budget=100), instrument=True, budget=True)
    report = Simulator(net).run(SchedulePolicy(seed=4), StopCondition(max_cycles=401), record_trace=False)
    assert report.terminal is Terminal.QUIESCENT
    assert report.cycles == 400


@pytest.mark.slow
def test_two_thousand_cycles_stay_cyclic(xor_spec, xor_net):
    report = Simulator(xor_net).run(SchedulePolicy(seed=9), StopCondition(max_cycles=2000), record_trace=False)
    assert report.cycles == 2000
    assert [m.vector_index for m in report.metrics] == [i % 4 for i in range(2000)]
