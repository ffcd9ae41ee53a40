# net/model.py
"""
1-safe Petri nets with read arcs and bounded counter places.

A net is immutable once built. Markings are values: firing returns a new
marking (or a SafetyViolation describing the overflow) and never mutates
the one it was given.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


class NetError(ValueError):
    """Structural problem with a net or an operation on it."""


class UnknownNodeError(NetError, KeyError):
    """A place or transition reference that does not belong to the net."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown node"


class ContractError(NetError):
    """An operation was called outside its precondition (e.g. firing a disabled transition)."""


class MergeError(NetError):
    """Two nets could not be merged with the requested fusion."""


class PlaceKind(str, Enum):
    STANDARD = "standard"
    COUNTER = "counter"


class ArcKind(str, Enum):
    NORMAL = "normal"
    READ = "read"


class PortRole(str, Enum):
    VALUE_IN = "value-in"
    VALUE_OUT = "value-out"
    CONTROL = "control"
    DONE = "done"


class PortDirection(str, Enum):
    IN = "in"
    OUT = "out"
    STATE = "state"


@dataclass(frozen=True)
class PlaceRecord:
    name: str
    label: str = ""
    kind: PlaceKind = PlaceKind.STANDARD
    bound: int = 1

    def __post_init__(self):
        if self.kind is PlaceKind.STANDARD and self.bound != 1:
            raise NetError(f"standard place {self.name} must have bound 1")
        if self.kind is PlaceKind.COUNTER and self.bound < 1:
            raise NetError(f"counter place {self.name} needs a positive bound")

    @property
    def is_counter(self) -> bool:
        return self.kind is PlaceKind.COUNTER


@dataclass(frozen=True)
class TransitionRecord:
    name: str
    label: str = ""


@dataclass(frozen=True)
class ArcRecord:
    source: str
    target: str
    kind: ArcKind = ArcKind.NORMAL


@dataclass(frozen=True)
class Port:
    """
    Named group of places forming an interface of a segment.

    Value ports hold one place per domain value (one-hot); control and done
    ports usually hold a single place.
    """
    name: str
    role: PortRole
    places: Tuple[str, ...]
    domain: Tuple[Fraction, ...] = ()
    direction: Optional[PortDirection] = None
    borrowed: Optional[bool] = None

    def __post_init__(self):
        if self.role in (PortRole.VALUE_IN, PortRole.VALUE_OUT) and len(self.domain) != len(self.places):
            raise NetError(f"value port {self.name} needs one place per domain value")
        if self.direction is None:
            default = {
                PortRole.VALUE_IN: PortDirection.IN,
                PortRole.VALUE_OUT: PortDirection.OUT,
                PortRole.DONE: PortDirection.OUT,
            }.get(self.role)
            if default is None:
                raise NetError(f"control port {self.name} must declare a direction")
            object.__setattr__(self, "direction", default)
        if self.borrowed is None:
            object.__setattr__(self, "borrowed", self.role is PortRole.VALUE_IN)

    def place_for(self, value) -> str:
        return self.places[self.domain.index(Fraction(value))]

    def renamed(self, mapping: Mapping[str, str], name: Optional[str] = None) -> "Port":
        return replace(self, name=name or self.name, places=tuple(mapping.get(p, p) for p in self.places))


@lru_cache(maxsize=None)
def _zobrist(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")


def place_key(name: str, count: int = 1) -> int:
    """Stable 64-bit key for a place holding `count` tokens (XOR-combined into digests)."""
    return _zobrist(name) if count == 1 else _zobrist(f"{name}#{count}")


@dataclass(frozen=True)
class Marking:
    """Marked standard places plus token counts of counter places (zero counts omitted)."""
    marked: FrozenSet[str] = frozenset()
    counts: Tuple[Tuple[str, int], ...] = ()

    @classmethod
    def of(cls, marked: Iterable[str] = (), counts: Optional[Mapping[str, int]] = None) -> "Marking":
        items = tuple(sorted((p, int(c)) for p, c in (counts or {}).items() if c))
        return cls(frozenset(marked), items)

    @cached_property
    def count_map(self) -> Dict[str, int]:
        return dict(self.counts)

    def tokens(self, place: str) -> int:
        if place in self.marked:
            return 1
        return self.count_map.get(place, 0)

    def digest(self) -> int:
        value = 0
        for p in self.marked:
            value ^= place_key(p)
        for p, c in self.counts:
            value ^= place_key(p, c)
        return value

    def __str__(self) -> str:
        parts = sorted(self.marked) + [f"{p}={c}" for p, c in self.counts]
        return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True)
class SafetyViolation:
    """Firing `transition` from `marking` would overflow `place`."""
    place: str
    transition: str
    marking: Marking
    tokens: int

    def __str__(self) -> str:
        return f"firing {self.transition} puts {self.tokens} tokens on {self.place}"


@dataclass
class Trace:
    """Fired transitions with the digest of the marking reached after each step."""
    transitions: List[str] = field(default_factory=list)
    digests: List[int] = field(default_factory=list)

    def append(self, transition: str, digest: int):
        self.transitions.append(transition)
        self.digests.append(digest)

    @property
    def steps(self) -> List[Tuple[int, str, int]]:
        return [(i, t, d) for i, (t, d) in enumerate(zip(self.transitions, self.digests))]

    def __len__(self) -> int:
        return len(self.transitions)


@dataclass(frozen=True)
class Net:
    places: Tuple[PlaceRecord, ...] = ()
    transitions: Tuple[TransitionRecord, ...] = ()
    arcs: Tuple[ArcRecord, ...] = ()
    initial_marking: Marking = Marking()
    ports: Tuple[Port, ...] = ()

    @cached_property
    def place_map(self) -> Dict[str, PlaceRecord]:
        return {p.name: p for p in self.places}

    @cached_property
    def transition_map(self) -> Dict[str, TransitionRecord]:
        return {t.name: t for t in self.transitions}

    @cached_property
    def port_map(self) -> Dict[str, Port]:
        return {p.name: p for p in self.ports}

    @cached_property
    def _adjacency(self) -> Dict[str, Dict[str, List[str]]]:
        adj: Dict[str, Dict[str, List[str]]] = {}
        for name in list(self.place_map) + list(self.transition_map):
            adj[name] = {"pre": [], "post": [], "read": [], "readers": []}
        for arc in self.arcs:
            if arc.kind is ArcKind.READ:
                adj[arc.target]["read"].append(arc.source)
                adj[arc.source]["readers"].append(arc.target)
            else:
                adj[arc.target]["pre"].append(arc.source)
                adj[arc.source]["post"].append(arc.target)
        return adj

    def node(self, name: str):
        if name in self.place_map:
            return self.place_map[name]
        if name in self.transition_map:
            return self.transition_map[name]
        raise UnknownNodeError(f"unknown node {name!r}")

    def size(self) -> Tuple[int, int, int]:
        return len(self.places), len(self.transitions), len(self.arcs)

    def with_ports(self, ports: Iterable[Port]) -> "Net":
        return replace(self, ports=tuple(ports))

    def with_marking(self, marking: Marking) -> "Net":
        return replace(self, initial_marking=marking)


def _require_transition(net: Net, t: str):
    if t not in net.transition_map:
        raise UnknownNodeError(f"unknown transition {t!r}")


def preset(net: Net, node: str) -> FrozenSet[str]:
    """Normal-arc predecessors of a node (read arcs excluded, see readset)."""
    net.node(node)
    return frozenset(net._adjacency[node]["pre"])


def postset(net: Net, node: str) -> FrozenSet[str]:
    net.node(node)
    return frozenset(net._adjacency[node]["post"])


def readset(net: Net, node: str) -> FrozenSet[str]:
    """Places read by a transition, or transitions reading a place."""
    rec = net.node(node)
    key = "read" if isinstance(rec, TransitionRecord) else "readers"
    return frozenset(net._adjacency[node][key])


def enabled(net: Net, m: Marking, t: str) -> bool:
    _require_transition(net, t)
    adj = net._adjacency[t]
    return all(m.tokens(p) >= 1 for p in adj["pre"]) and all(m.tokens(p) >= 1 for p in adj["read"])


def fire(net: Net, m: Marking, t: str) -> Union[Marking, SafetyViolation]:
    if not enabled(net, m, t):
        raise ContractError(f"transition {t} is not enabled in {m}")
    adj = net._adjacency[t]
    marked = set(m.marked)
    counts = dict(m.count_map)
    for p in adj["pre"]:
        if net.place_map[p].is_counter:
            counts[p] -= 1
        else:
            marked.discard(p)
    for p in adj["post"]:
        rec = net.place_map[p]
        if rec.is_counter:
            counts[p] = counts.get(p, 0) + 1
            if counts[p] > rec.bound:
                return SafetyViolation(p, t, m, counts[p])
        elif p in marked:
            return SafetyViolation(p, t, m, 2)
        else:
            marked.add(p)
    return Marking.of(marked, counts)


def enabled_transitions(net: Net, m: Marking) -> List[str]:
    return [t.name for t in net.transitions if enabled(net, m, t.name)]


@dataclass(frozen=True)
class Incidence:
    matrix: np.ndarray
    places: Tuple[str, ...]
    transitions: Tuple[str, ...]

    def column(self, t: str) -> np.ndarray:
        return self.matrix[:, self.transitions.index(t)]

    def entry(self, p: str, t: str) -> int:
        return int(self.matrix[self.places.index(p), self.transitions.index(t)])


def incidence(net: Net) -> Incidence:
    """C(p, t) = W(t, p) - W(p, t); read arcs contribute nothing."""
    p_idx = {p.name: i for i, p in enumerate(net.places)}
    t_idx = {t.name: i for i, t in enumerate(net.transitions)}
    matrix = np.zeros((len(p_idx), len(t_idx)), dtype=np.int64)
    for arc in net.arcs:
        if arc.kind is ArcKind.READ:
            continue
        if arc.source in p_idx:
            matrix[p_idx[arc.source], t_idx[arc.target]] -= 1
        else:
            matrix[p_idx[arc.target], t_idx[arc.source]] += 1
    return Incidence(matrix, tuple(p_idx), tuple(t_idx))


def marking_vector(net: Net, m: Marking) -> np.ndarray:
    return np.array([m.tokens(p.name) for p in net.places], dtype=np.int64)


def marking_from_vector(net: Net, vector: Sequence[int]) -> Marking:
    marked, counts = [], {}
    for rec, value in zip(net.places, vector):
        if rec.is_counter:
            counts[rec.name] = int(value)
        elif value:
            marked.append(rec.name)
    return Marking.of(marked, counts)


class NetBuilder:
    """
    Mutable accumulator used by generators and by merge.

    Places, transitions and arcs keep insertion order so the same inputs
    always produce the same net.
    """

    def __init__(self):
        self._places: Dict[str, PlaceRecord] = {}
        self._transitions: Dict[str, TransitionRecord] = {}
        self._arcs: List[ArcRecord] = []
        self._marked: set = set()
        self._counts: Dict[str, int] = {}
        self._ports: Dict[str, Port] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._places or name in self._transitions

    def has_place(self, name: str) -> bool:
        return name in self._places

    def add_place(self, name: str, label: str = "", marked: bool = False) -> str:
        if name in self:
            raise NetError(f"duplicate node name {name!r}")
        self._places[name] = PlaceRecord(name, label)
        if marked:
            self._marked.add(name)
        return name

    def add_counter(self, name: str, bound: int, tokens: int = 0, label: str = "") -> str:
        if name in self:
            raise NetError(f"duplicate node name {name!r}")
        self._places[name] = PlaceRecord(name, label, PlaceKind.COUNTER, bound)
        if tokens:
            self._counts[name] = tokens
        return name

    def add_transition(self, name: str, label: str = "", consume: Iterable[str] = (),
                       produce: Iterable[str] = (), read: Iterable[str] = ()) -> str:
        if name in self:
            raise NetError(f"duplicate node name {name!r}")
        self._transitions[name] = TransitionRecord(name, label)
        for p in consume:
            self._arcs.append(ArcRecord(p, name))
        for p in produce:
            self._arcs.append(ArcRecord(name, p))
        for p in read:
            self._arcs.append(ArcRecord(p, name, ArcKind.READ))
        return name

    def add_arc(self, source: str, target: str, kind: ArcKind = ArcKind.NORMAL):
        self._arcs.append(ArcRecord(source, target, kind))

    def mark(self, place: str, tokens: int = 1):
        rec = self._places[place]
        if rec.is_counter:
            self._counts[place] = tokens
        elif tokens:
            self._marked.add(place)
        else:
            self._marked.discard(place)

    def add_port(self, port: Port) -> Port:
        if port.name in self._ports:
            raise NetError(f"duplicate port {port.name!r}")
        self._ports[port.name] = port
        return port

    def absorb(self, net: Net, fuse: Optional[Mapping[str, str]] = None,
               prefix: Optional[str] = None) -> Dict[str, str]:
        """
        Copy `net` into the builder, fusing its places listed in `fuse` onto
        existing places. Returns the renaming applied to the absorbed nodes.
        """
        fuse = dict(fuse or {})
        rename: Dict[str, str] = {}
        for b_place, a_place in fuse.items():
            if b_place not in net.place_map:
                raise MergeError(f"fused place {b_place!r} is not in the merged net")
            if a_place not in self._places:
                raise MergeError(f"fusion target {a_place!r} does not exist")
            a_rec, b_rec = self._places[a_place], net.place_map[b_place]
            if (a_rec.kind, a_rec.bound) != (b_rec.kind, b_rec.bound):
                raise MergeError(f"cannot fuse {b_place} ({b_rec.kind.value}) onto {a_place} ({a_rec.kind.value})")
            rename[b_place] = a_place
        for rec in list(net.places) + list(net.transitions):
            if rec.name in rename:
                continue
            new = f"{prefix}.{rec.name}" if prefix else rec.name
            if new in self:
                raise MergeError(f"name collision on {new!r}")
            rename[rec.name] = new
        for rec in net.places:
            if rec.name in fuse:
                continue
            self._places[rename[rec.name]] = replace(rec, name=rename[rec.name])
        for rec in net.transitions:
            self._transitions[rename[rec.name]] = replace(rec, name=rename[rec.name])
        for arc in net.arcs:
            self._arcs.append(ArcRecord(rename[arc.source], rename[arc.target], arc.kind))
        for p in net.initial_marking.marked:
            target = rename[p]
            if target in self._marked:
                raise MergeError(f"fusing two marked places onto {target!r} would start unsafe")
            self._marked.add(target)
        for p, c in net.initial_marking.counts:
            target = rename[p]
            total = self._counts.get(target, 0) + c
            if total > self._places[target].bound:
                raise MergeError(f"fused counter {target!r} exceeds its bound")
            self._counts[target] = total
        for port in net.ports:
            self.add_port(port.renamed(rename, f"{prefix}.{port.name}" if prefix else None))
        return rename

    def build(self) -> Net:
        return Net(
            places=tuple(self._places.values()),
            transitions=tuple(self._transitions.values()),
            arcs=tuple(self._arcs),
            initial_marking=Marking.of(self._marked, self._counts),
            ports=tuple(self._ports.values()),
        )

    @classmethod
    def from_net(cls, net: Net) -> "NetBuilder":
        builder = cls()
        builder.absorb(net)
        return builder


def merge(a: Net, b: Net, fuse: Optional[Mapping[str, str]] = None, prefix: Optional[str] = None) -> Net:
    """
    Disjoint union of two nets with place fusion.

    `fuse` maps places of `b` onto places of `a`; the result has
    |P_a| + |P_b| - |fuse| places. Non-fused names of `b` are namespaced with
    `prefix` when one is given, otherwise any collision is an error.
    """
    builder = NetBuilder.from_net(a)
    builder.absorb(b, fuse, prefix)
    merged = builder.build()
    logger.debug(f"merged nets into {len(merged.places)} places / {len(merged.transitions)} transitions")
    return merged


def validate(net: Net) -> Net:
    """Raise NetError listing every structural problem; return the net unchanged when valid."""
    problems: List[str] = []
    names = [p.name for p in net.places] + [t.name for t in net.transitions]
    if len(set(names)) != len(names):
        seen, dupes = set(), set()
        for n in names:
            (dupes if n in seen else seen).add(n)
        problems.append(f"duplicate names: {sorted(dupes)[:5]}")
    places, transitions = net.place_map, net.transition_map
    for arc in net.arcs:
        forward = arc.source in places and arc.target in transitions
        backward = arc.source in transitions and arc.target in places
        if not (forward or backward):
            problems.append(f"arc {arc.source}->{arc.target} is not place/transition bipartite")
        elif arc.kind is ArcKind.READ and not forward:
            problems.append(f"read arc {arc.source}->{arc.target} must go from a place to a transition")
    for p in net.initial_marking.marked:
        if p not in places:
            problems.append(f"marking names unknown place {p}")
        elif places[p].is_counter:
            problems.append(f"counter place {p} listed as a standard mark")
    for p, c in net.initial_marking.counts:
        if p not in places or not places[p].is_counter:
            problems.append(f"count given for non-counter place {p}")
        elif c > places[p].bound:
            problems.append(f"counter {p} starts above its bound")
    for port in net.ports:
        missing = [p for p in port.places if p not in places]
        if missing:
            problems.append(f"port {port.name} references unknown places {missing[:3]}")
    if problems:
        raise NetError("; ".join(problems[:20]))
    return net
