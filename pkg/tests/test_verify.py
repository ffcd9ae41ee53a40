# tests/test_verify.py
from fractions import Fraction

import pytest

from blueprints.segments import gen_input_loader
from engine.simulator import replay
from net.model import Marking, NetBuilder, SafetyViolation, enabled_transitions, fire
from verify.checks import (
    Verdict,
    check_1safe,
    check_bounded,
    check_deadlock_free,
    check_mutex,
    check_one_hot,
    check_precedence,
    check_reachable,
    check_reversibility,
    summarize,
)
from verify.explore import explore
from verify.suites import (
    ENV_DONE,
    close_segment,
    component_suite,
    loss_component,
    segment_suite,
    system_suite,
)


def test_closed_sign_segment_is_small_and_clean(sign_segment):
    graph = explore(close_segment(sign_segment))
    assert graph.exhausted
    assert len(graph) <= 12
    assert check_1safe(graph).verdict is Verdict.HOLDS
    assert check_deadlock_free(graph).verdict is Verdict.HOLDS
    for port in (sign_segment.port("x"), sign_segment.port("out")):
        assert check_one_hot(graph, port).verdict is Verdict.HOLDS


def test_one_shot_closure_ends_in_done(sign_segment):
    graph = explore(close_segment(sign_segment, cyclic=False))
    assert check_deadlock_free(graph).verdict is Verdict.VIOLATED
    assert check_deadlock_free(graph, lambda m: m.tokens(ENV_DONE) > 0).verdict is Verdict.HOLDS


def test_self_loop_has_one_state():
    builder = NetBuilder()
    builder.add_place("p", marked=True)
    builder.add_transition("t", consume=["p"], produce=["p"])
    graph = explore(builder.build())
    assert len(graph) == 1
    assert graph.edges == [(0, "t", 0)]
    assert check_deadlock_free(graph).verdict is Verdict.HOLDS
    assert check_reversibility(graph).verdict is Verdict.HOLDS


def test_unsafe_net_has_a_replayable_witness(unsafe_net):
    graph = explore(unsafe_net)
    report = check_1safe(graph)
    assert report.verdict is Verdict.VIOLATED
    assert isinstance(replay(unsafe_net, report.witness), SafetyViolation)


def test_deadlock_and_reachability(pipeline_net):
    graph = explore(pipeline_net)
    dead = check_deadlock_free(graph)
    assert dead.verdict is Verdict.VIOLATED
    assert dead.witness == ["t0", "t1"]

    hit = check_reachable(graph, {"p2": 1, "p0": 0})
    assert hit.verdict is Verdict.HOLDS
    assert hit.witness == ["t0", "t1"]
    assert check_reachable(graph, {"p0": 1, "p2": 1}).verdict is Verdict.VIOLATED
    assert check_reachable(graph, {"r": 1}, "coverable").witness == []
    with pytest.raises(ValueError):
        check_reachable(graph, {"r": 1}, "sometimes")


def test_mutex(pipeline_net):
    graph = explore(pipeline_net)
    assert check_mutex(graph, ["p0", "p1", "p2"]).verdict is Verdict.HOLDS
    assert check_mutex(graph, ["p0", "r"]).verdict is Verdict.VIOLATED


def test_precedence_resets_per_window():
    assert check_precedence(["a", "b", "next", "a", "b"], {"a"}, {"b"}, reset="next").verdict is Verdict.HOLDS
    report = check_precedence(["a", "b", "next", "b"], {"a"}, {"b"}, reset="next")
    assert report.verdict is Verdict.VIOLATED
    assert report.witness == ["a", "b", "next", "b"]


def test_bounded_on_graph_and_trace(pipeline_net):
    graph = explore(pipeline_net)
    assert check_bounded(graph, "p2", 1).verdict is Verdict.HOLDS
    assert check_bounded(graph, "p2", 0).verdict is Verdict.VIOLATED
    assert check_bounded(replay_trace(), "c", 2, counter_net()).verdict is Verdict.HOLDS
    assert check_bounded(replay_trace(), "c", 1, counter_net()).verdict is Verdict.VIOLATED


def counter_net():
    builder = NetBuilder()
    builder.add_place("go", marked=True)
    builder.add_counter("c", 3)
    builder.add_transition("tick", consume=["go"], produce=["go", "c"])
    return builder.build()


def replay_trace():
    return ["tick", "tick"]


def test_reversibility(pipeline_net, xor_spec):
    assert check_reversibility(explore(pipeline_net)).verdict is Verdict.VIOLATED
    loader = close_segment(gen_input_loader(xor_spec.dataset))
    assert check_reversibility(explore(loader)).verdict is Verdict.HOLDS


def test_inconclusive_when_budget_runs_out(xor_spec):
    graph = explore(close_segment(gen_input_loader(xor_spec.dataset)), max_states=2)
    assert not graph.exhausted
    assert check_deadlock_free(graph).verdict is Verdict.INCONCLUSIVE
    assert check_reversibility(graph).verdict is Verdict.INCONCLUSIVE


def test_worst_loss_is_reachable():
    loss = loss_component(2)
    graph = explore(close_segment(loss))
    report = check_reachable(graph, {loss.port("loss").place_for(Fraction(3)): 1}, "coverable")
    assert report.verdict is Verdict.HOLDS
    assert report.witness


def test_summary_counts():
    from verify.checks import PropertyReport
    reports = [PropertyReport("a", Verdict.HOLDS), PropertyReport("b", Verdict.INCONCLUSIVE),
               PropertyReport("c", Verdict.VIOLATED, expected_verdict=Verdict.VIOLATED),
               PropertyReport("d", Verdict.VIOLATED)]
    assert summarize(reports) == {"as_expected": 2, "failed": 1, "inconclusive": 1}


def test_system_tier_on_two_seeds(xor_spec):
    reports = system_suite(xor_spec, seeds=[0, 1])
    failed = [r.to_dict() for r in reports if not r.as_expected]
    assert not failed
    assert any(r.name == "reversible" and r.verdict is Verdict.VIOLATED for r in reports)


@pytest.mark.slow
def test_component_tier(xor_spec):
    reports = component_suite(xor_spec)
    assert summarize(reports)["failed"] == 0
    assert summarize(reports)["inconclusive"] == 0


@pytest.mark.slow
def test_segment_tier(xor_spec):
    reports = segment_suite(xor_spec)
    assert summarize(reports) == {"as_expected": len(reports), "failed": 0, "inconclusive": 0}


def test_system_tier_on_ten_seeds(xor_spec):
    reports = system_suite(xor_spec)
    assert summarize(reports)["failed"] == 0
    seeded = {r.subject for r in reports if r.subject.startswith("system[")}
    assert len(seeded) == 10
    precedence = [r for r in reports if r.name == "precedence"]
    assert precedence and all(r.verdict is Verdict.HOLDS for r in precedence)
    confluent, = [r for r in reports if r.name == "confluent"]
    assert confluent.verdict is Verdict.HOLDS


def reachable_by_recursion(net):
    def normal(m):
        return Marking.of(m.marked, m.count_map)

    seen = set()

    def visit(m):
        if m in seen:
            return
        seen.add(m)
        for t in enabled_transitions(net, m):
            nxt = fire(net, m, t)
            if not isinstance(nxt, SafetyViolation):
                visit(normal(nxt))

    visit(normal(net.initial_marking))
    return seen


@pytest.mark.parametrize("closed", [False, True])
def test_explore_matches_recursive_enumeration(pipeline_net, sign_segment, closed):
    net = close_segment(sign_segment) if closed else pipeline_net
    graph = explore(net)
    assert graph.exhausted
    found = {Marking.of(m.marked, m.count_map) for _, m in graph.markings()}
    assert found == reachable_by_recursion(net)
    assert len(found) == len(graph)
