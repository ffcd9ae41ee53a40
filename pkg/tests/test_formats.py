# tests/test_formats.py
import pytest

from net.formats import FormatError, dumps_dot, dumps_native, dumps_pnml, load, loads_native, loads_pnml, save
from net.model import ArcKind, NetBuilder


def test_native_round_trip_of_composed_net(xor_net):
    again = loads_native(dumps_native(xor_net))
    assert again == xor_net


def test_pnml_lowers_read_arcs_and_restores_them(pipeline_net):
    text = dumps_pnml(pipeline_net)
    # the lowered pair shows up as two plain PT arcs
    assert text.count("<arc ") == len(pipeline_net.arcs) + 1
    again = loads_pnml(text)
    assert [a for a in again.arcs if a.kind is ArcKind.READ] == [a for a in pipeline_net.arcs if a.kind is ArcKind.READ]
    assert again.initial_marking == pipeline_net.initial_marking


def test_dot_uses_circles_and_boxes(pipeline_net):
    text = dumps_dot(pipeline_net)
    assert text.count("shape=circle") == 4
    assert text.count("shape=box") == 2
    assert "style=dashed" in text


def test_corrupted_native_file():
    with pytest.raises(FormatError):
        loads_native("PLACES\np0 standard \"\"\nARCS\np0 => t0\n")


def test_save_and_load_detects_format(tmp_path, pipeline_net):
    native = save(pipeline_net, tmp_path / "net.net", "native")
    pnml = save(pipeline_net, tmp_path / "net.pnml", "pnml")
    assert load(native) == pipeline_net
    assert load(pnml).initial_marking == pipeline_net.initial_marking
    with pytest.raises(FormatError):
        load(tmp_path / "missing.net")


def test_pnml_keeps_labels():
    builder = NetBuilder()
    builder.add_place("p", label="p", marked=True)
    builder.add_place("q", label="ready")
    builder.add_place("r")
    builder.add_transition("t", label="t", consume=["p"], produce=["q"])
    net = builder.build()
    again = loads_pnml(dumps_pnml(net))
    assert [(p.name, p.label) for p in again.places] == [("p", "p"), ("q", "ready"), ("r", "")]
    assert again.transitions[0].label == "t"
