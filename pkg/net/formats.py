# net/formats.py
"""
File formats for nets: the native line-oriented text format, PNML (PT-net
grammar) and Graphviz DOT.
"""
from __future__ import annotations

import json
import logging
import re
import xml.etree.ElementTree as ET
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Union

from net.model import (
    ArcKind,
    ArcRecord,
    Marking,
    Net,
    NetError,
    PlaceKind,
    PlaceRecord,
    Port,
    PortDirection,
    PortRole,
    TransitionRecord,
    validate,
)

logger = logging.getLogger(__name__)

PNML_NS = "http://www.pnml.org/version-2009/grammar/pnml"
PTNET_TYPE = "http://www.pnml.org/version-2009/grammar/ptnet"
TOOL = "petribnn"
TOOL_VERSION = "1"

SECTIONS = ("PLACES", "TRANSITIONS", "ARCS", "MARKING", "PORTS")
_NAME = re.compile(r"^[^\s,\"]+$")


class FormatError(NetError):
    """A net file could not be parsed or a net cannot be written in a format."""


def _check_name(name: str) -> str:
    if not _NAME.match(name):
        raise FormatError(f"name {name!r} cannot be written (whitespace, comma or quote)")
    return name


# ----------------------------------------------------------------------
# Native text format
# ----------------------------------------------------------------------

def dumps_native(net: Net) -> str:
    lines = ["# petribnn net v1", "PLACES"]
    for p in net.places:
        kind = "standard" if p.kind is PlaceKind.STANDARD else f"counter {p.bound}"
        lines.append(f"{_check_name(p.name)} {kind} {json.dumps(p.label)}")
    lines.append("TRANSITIONS")
    for t in net.transitions:
        lines.append(f"{_check_name(t.name)} {json.dumps(t.label)}")
    lines.append("ARCS")
    for a in net.arcs:
        arrow = "-o" if a.kind is ArcKind.READ else "->"
        lines.append(f"{a.source} {arrow} {a.target}")
    lines.append("MARKING")
    for p in sorted(net.initial_marking.marked):
        lines.append(p)
    for p, c in net.initial_marking.counts:
        lines.append(f"{p} {c}")
    lines.append("PORTS")
    for port in net.ports:
        domain = ",".join(str(v) for v in port.domain) or "-"
        lines.append(
            f"{_check_name(port.name)} {port.role.value} {port.direction.value} "
            f"{int(port.borrowed)} {','.join(port.places)} {domain}"
        )
    return "\n".join(lines) + "\n"


def loads_native(text: str) -> Net:
    section = None
    places: List[PlaceRecord] = []
    transitions: List[TransitionRecord] = []
    arcs: List[ArcRecord] = []
    marked: List[str] = []
    counts: Dict[str, int] = {}
    ports: List[Port] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in SECTIONS:
            section = line
            continue
        try:
            if section == "PLACES":
                name, rest = line.split(" ", 1)
                if rest.startswith("standard "):
                    places.append(PlaceRecord(name, json.loads(rest[len("standard "):])))
                else:
                    _, bound, label = rest.split(" ", 2)
                    places.append(PlaceRecord(name, json.loads(label), PlaceKind.COUNTER, int(bound)))
            elif section == "TRANSITIONS":
                name, label = line.split(" ", 1)
                transitions.append(TransitionRecord(name, json.loads(label)))
            elif section == "ARCS":
                source, arrow, target = line.split()
                if arrow not in ("->", "-o"):
                    raise FormatError(f"unknown arc arrow {arrow!r}")
                arcs.append(ArcRecord(source, target, ArcKind.READ if arrow == "-o" else ArcKind.NORMAL))
            elif section == "MARKING":
                parts = line.split()
                if len(parts) == 1:
                    marked.append(parts[0])
                else:
                    counts[parts[0]] = int(parts[1])
            elif section == "PORTS":
                name, role, direction, borrowed, plist, domain = line.split()
                values = () if domain == "-" else tuple(Fraction(v) for v in domain.split(","))
                ports.append(Port(name, PortRole(role), tuple(plist.split(",")), values,
                                  PortDirection(direction), bool(int(borrowed))))
            else:
                raise FormatError("content before the first section header")
        except FormatError as e:
            raise FormatError(f"line {number}: {e}") from e
        except (ValueError, KeyError) as e:
            raise FormatError(f"line {number}: cannot parse {line!r} ({e})") from e
    net = Net(tuple(places), tuple(transitions), tuple(arcs), Marking.of(marked, counts), tuple(ports))
    try:
        return validate(net)
    except NetError as e:
        raise FormatError(str(e)) from e


def save_native(net: Net, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_native(net))
    logger.info(f"wrote native net {path} ({len(net.places)} places, {len(net.transitions)} transitions)")
    return path


def load_native(path: Union[str, Path]) -> Net:
    return loads_native(Path(path).read_text())


# ----------------------------------------------------------------------
# PNML
# ----------------------------------------------------------------------

def _q(tag: str) -> str:
    return f"{{{PNML_NS}}}{tag}"


def _text_child(parent: ET.Element, tag: str, text: str) -> ET.Element:
    node = ET.SubElement(parent, _q(tag))
    ET.SubElement(node, _q("text")).text = text
    return node


def _toolspecific(parent: ET.Element) -> ET.Element:
    return ET.SubElement(parent, _q("toolspecific"), tool=TOOL, version=TOOL_VERSION)


def dumps_pnml(net: Net, net_id: str = "net0") -> str:
    """
    Standard PT-net PNML. Each read arc is lowered to a consume/produce pair
    tagged with a tool-specific annotation so it can be restored on import.
    """
    ET.register_namespace("", PNML_NS)
    root = ET.Element(_q("pnml"))
    net_el = ET.SubElement(root, _q("net"), id=net_id, type=PTNET_TYPE)
    if net.ports:
        spec = [
            {"name": p.name, "role": p.role.value, "direction": p.direction.value,
             "borrowed": p.borrowed, "places": list(p.places), "domain": [str(v) for v in p.domain]}
            for p in net.ports
        ]
        ET.SubElement(_toolspecific(net_el), _q("ports")).text = json.dumps(spec)
    page = ET.SubElement(net_el, _q("page"), id="page0")
    counts = net.initial_marking.count_map
    for p in net.places:
        el = ET.SubElement(page, _q("place"), id=p.name)
        if p.label:
            _text_child(el, "name", p.label)
        tokens = counts.get(p.name, 1 if p.name in net.initial_marking.marked else 0)
        if tokens:
            _text_child(el, "initialMarking", str(tokens))
        if p.is_counter:
            ET.SubElement(_toolspecific(el), _q("counter"), bound=str(p.bound))
    for t in net.transitions:
        el = ET.SubElement(page, _q("transition"), id=t.name)
        if t.label:
            _text_child(el, "name", t.label)
    for i, a in enumerate(net.arcs):
        el = ET.SubElement(page, _q("arc"), id=f"_arc{i}", source=a.source, target=a.target)
        if a.kind is ArcKind.READ:
            ET.SubElement(_toolspecific(el), _q("read"), role="consume")
            back = ET.SubElement(page, _q("arc"), id=f"_arc{i}r", source=a.target, target=a.source)
            ET.SubElement(_toolspecific(back), _q("read"), role="restore")
    return ET.tostring(root, encoding="unicode")


def loads_pnml(text: str) -> Net:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise FormatError(f"malformed PNML: {e}") from e
    ns = {"pnml": PNML_NS}
    net_el = root.find("pnml:net", ns)
    if net_el is None:
        raise FormatError("PNML document has no net element")
    places, transitions, arcs = [], [], []
    marked, counts = [], {}
    for place in net_el.iter(_q("place")):
        name = place.attrib["id"]
        label_el = place.find("pnml:name/pnml:text", ns)
        label = label_el.text if label_el is not None and label_el.text else ""
        counter = place.find("pnml:toolspecific/pnml:counter", ns)
        tokens_el = place.find("pnml:initialMarking/pnml:text", ns)
        tokens = int(tokens_el.text) if tokens_el is not None else 0
        if counter is not None:
            places.append(PlaceRecord(name, label or "", PlaceKind.COUNTER, int(counter.attrib["bound"])))
            if tokens:
                counts[name] = tokens
        else:
            places.append(PlaceRecord(name, label or ""))
            if tokens:
                marked.append(name)
    for trans in net_el.iter(_q("transition")):
        name = trans.attrib["id"]
        label_el = trans.find("pnml:name/pnml:text", ns)
        label = label_el.text if label_el is not None and label_el.text else ""
        transitions.append(TransitionRecord(name, label or ""))
    for arc in net_el.iter(_q("arc")):
        read = arc.find("pnml:toolspecific/pnml:read", ns)
        if read is not None and read.attrib.get("role") == "restore":
            continue
        kind = ArcKind.READ if read is not None else ArcKind.NORMAL
        arcs.append(ArcRecord(arc.attrib["source"], arc.attrib["target"], kind))
    ports = []
    ports_el = net_el.find("pnml:toolspecific/pnml:ports", ns)
    if ports_el is not None and ports_el.text:
        for spec in json.loads(ports_el.text):
            ports.append(Port(spec["name"], PortRole(spec["role"]), tuple(spec["places"]),
                              tuple(Fraction(v) for v in spec["domain"]),
                              PortDirection(spec["direction"]), spec["borrowed"]))
    net = Net(tuple(places), tuple(transitions), tuple(arcs), Marking.of(marked, counts), tuple(ports))
    try:
        return validate(net)
    except NetError as e:
        raise FormatError(str(e)) from e


# ----------------------------------------------------------------------
# DOT
# ----------------------------------------------------------------------

def _dot_id(name: str) -> str:
    return json.dumps(name)


def _dot_label(text: str) -> str:
    return '"' + text.replace('"', '\\"') + '"'


def dumps_dot(net: Net, name: str = "net") -> str:
    """Bipartite rendering: places as circles, transitions as boxes, read arcs dashed."""
    counts = net.initial_marking.count_map
    lines = [f"digraph {_dot_id(name)} {{", "  rankdir=LR;"]
    for p in net.places:
        tokens = counts.get(p.name, 1 if p.name in net.initial_marking.marked else 0)
        label = p.name + (f"\\n{tokens}" if p.is_counter and tokens else ("\\n●" if tokens else ""))
        lines.append(f"  {_dot_id(p.name)} [shape=circle, label={_dot_label(label)}];")
    for t in net.transitions:
        lines.append(f"  {_dot_id(t.name)} [shape=box, label={_dot_label(t.label or t.name)}];")
    for a in net.arcs:
        style = " [style=dashed, arrowhead=none]" if a.kind is ArcKind.READ else ""
        lines.append(f"  {_dot_id(a.source)} -> {_dot_id(a.target)}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"


FORMATS = {
    "native": (dumps_native, loads_native, ".net"),
    "pnml": (dumps_pnml, loads_pnml, ".pnml"),
    "dot": (dumps_dot, None, ".dot"),
}


def save(net: Net, path: Union[str, Path], fmt: str = "native") -> Path:
    if fmt not in FORMATS:
        raise FormatError(f"unknown net format {fmt!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(FORMATS[fmt][0](net))
    logger.info(f"wrote {fmt} net to {path}")
    return path


def load(path: Union[str, Path]) -> Net:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"net file {path} does not exist")
    text = path.read_text()
    if text.lstrip().startswith("<"):
        return loads_pnml(text)
    return loads_native(text)
