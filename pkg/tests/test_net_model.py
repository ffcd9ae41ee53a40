# tests/test_net_model.py
import pytest

from net.model import (
    ArcKind,
    ContractError,
    Marking,
    MergeError,
    NetBuilder,
    NetError,
    SafetyViolation,
    UnknownNodeError,
    enabled,
    enabled_transitions,
    fire,
    incidence,
    merge,
    postset,
    preset,
    readset,
    validate,
)


def test_fire_moves_token_and_keeps_read_place(pipeline_net):
    m = fire(pipeline_net, pipeline_net.initial_marking, "t0")
    assert m.marked == {"p1", "r"}
    m = fire(pipeline_net, m, "t1")
    assert m.marked == {"p2", "r"}


def test_read_arc_needs_a_token(pipeline_net):
    m = Marking.of(["p1"])
    assert not enabled(pipeline_net, m, "t1")
    with pytest.raises(ContractError):
        fire(pipeline_net, m, "t1")


def test_unknown_transition(pipeline_net):
    with pytest.raises(UnknownNodeError):
        enabled(pipeline_net, pipeline_net.initial_marking, "nope")


def test_second_token_is_a_safety_violation(unsafe_net):
    m = fire(unsafe_net, unsafe_net.initial_marking, "ta")
    result = fire(unsafe_net, m, "tb")
    assert isinstance(result, SafetyViolation)
    assert result.place == "c"
    assert result.tokens == 2


def test_counter_place_holds_up_to_its_bound():
    builder = NetBuilder()
    builder.add_place("go", marked=True)
    builder.add_counter("epoch", 2)
    builder.add_transition("tick", consume=["go"], produce=["go", "epoch"])
    net = builder.build()
    m = fire(net, net.initial_marking, "tick")
    m = fire(net, m, "tick")
    assert m.tokens("epoch") == 2
    assert isinstance(fire(net, m, "tick"), SafetyViolation)


def test_structure_accessors(pipeline_net):
    assert preset(pipeline_net, "t1") == {"p1"}
    assert postset(pipeline_net, "t1") == {"p2"}
    assert readset(pipeline_net, "t1") == {"r"}
    assert readset(pipeline_net, "r") == {"t1"}
    assert enabled_transitions(pipeline_net, pipeline_net.initial_marking) == ["t0"]


def test_incidence_ignores_read_arcs(pipeline_net):
    inc = incidence(pipeline_net)
    assert inc.entry("p1", "t1") == -1
    assert inc.entry("p2", "t1") == 1
    assert inc.entry("r", "t1") == 0
    assert inc.matrix.shape == (4, 2)


def test_merge_fuses_places_and_prefixes_the_rest(pipeline_net):
    builder = NetBuilder()
    builder.add_place("in")
    builder.add_place("out")
    builder.add_transition("t", consume=["in"], produce=["out"])
    merged = merge(pipeline_net, builder.build(), fuse={"in": "p2"}, prefix="b")
    names = {p.name for p in merged.places}
    assert len(merged.places) == len(pipeline_net.places) + 2 - 1
    assert "b.out" in names and "b.in" not in names
    assert any(a.source == "p2" and a.target == "b.t" for a in merged.arcs)


def test_merge_collision_without_prefix(pipeline_net):
    with pytest.raises(MergeError):
        merge(pipeline_net, pipeline_net)


def test_validate_reports_non_bipartite_arcs():
    builder = NetBuilder()
    builder.add_place("a")
    builder.add_place("b")
    builder.add_arc("a", "b", ArcKind.NORMAL)
    with pytest.raises(NetError, match="bipartite"):
        validate(builder.build())


def test_digest_is_order_independent():
    assert Marking.of(["a", "b"]).digest() == Marking.of(["b", "a"]).digest()
    assert Marking.of(["a"]).digest() != Marking.of(["b"]).digest()
