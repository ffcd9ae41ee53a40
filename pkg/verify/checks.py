# verify/checks.py
"""
Property checks over a state graph or a recorded trace.

Graph checks are exhaustive only when the exploration was; a check that
would need the unexplored part of the graph answers inconclusive.
"""
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Collection, Dict, Iterable, List, Mapping, Optional, Sequence, Union

from engine.simulator import RunReport, Terminal
from net.model import ArcKind, Marking, Net, Port, Trace, UnknownNodeError
from verify.explore import StateGraph

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PropertyReport:
    name: str
    verdict: Verdict
    witness: Optional[List[str]] = None
    states_explored: int = 0
    detail: str = ""
    expected_verdict: Verdict = Verdict.HOLDS
    subject: str = ""

    @property
    def as_expected(self) -> bool:
        return self.verdict is self.expected_verdict

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "property": self.name,
            "verdict": self.verdict.value,
            "expected": self.expected_verdict.value,
            "states": self.states_explored,
            "detail": self.detail,
            "witness": self.witness,
        }


def _exhaustive(graph: StateGraph, name: str, detail: str = "") -> PropertyReport:
    if graph.exhausted:
        return PropertyReport(name, Verdict.HOLDS, None, len(graph), detail)
    return PropertyReport(name, Verdict.INCONCLUSIVE, None, len(graph), detail or "state budget exhausted")


def check_1safe(source: Union[StateGraph, RunReport]) -> PropertyReport:
    """No reachable (graph) or observed (run) firing overflows a place; counters may reach their bound."""
    if isinstance(source, RunReport):
        if source.terminal is Terminal.SAFETY_VIOLATION:
            witness = list(source.trace.transitions) + [source.violation.transition] if source.trace else None
            return PropertyReport("1-safe", Verdict.VIOLATED, witness, 0, str(source.violation))
        return PropertyReport("1-safe", Verdict.HOLDS, None, 0, f"{source.firings} firings observed")
    if source.violations:
        state, violation = source.violations[0]
        return PropertyReport("1-safe", Verdict.VIOLATED, source.path_to(state) + [violation.transition],
                              len(source), str(violation))
    return _exhaustive(source, "1-safe")


def check_deadlock_free(graph: StateGraph,
                        terminal: Optional[Callable[[Marking], bool]] = None) -> PropertyReport:
    """Every reachable marking enables something, apart from declared terminal markings."""
    for state in graph.dead_states():
        marking = graph.marking(state)
        if terminal is not None and terminal(marking):
            continue
        return PropertyReport("deadlock-free", Verdict.VIOLATED, graph.path_to(state), len(graph),
                              f"dead marking {marking}")
    return _exhaustive(graph, "deadlock-free")


def check_reachable(graph: StateGraph, target: Mapping[str, int], mode: str = "exact") -> PropertyReport:
    """
    exact: some state holds exactly the given token counts on the listed
    places; coverable: at least them. The witness accompanies `holds`.
    """
    if mode not in ("exact", "coverable"):
        raise ValueError(f"unknown reachability mode {mode!r}")
    unknown = [p for p in target if p not in graph.net.place_map]
    if unknown:
        raise UnknownNodeError(f"target names unknown places {unknown}")
    indexes = {graph.places.index(p): c for p, c in target.items()}
    for i, state in enumerate(graph.states):
        tokens = dict(state)
        if mode == "exact":
            hit = all(tokens.get(p, 0) == c for p, c in indexes.items())
        else:
            hit = all(tokens.get(p, 0) >= c for p, c in indexes.items())
        if hit:
            return PropertyReport("reachable", Verdict.HOLDS, graph.path_to(i), len(graph), f"{mode} {dict(target)}")
    if graph.exhausted:
        return PropertyReport("reachable", Verdict.VIOLATED, None, len(graph), f"{mode} {dict(target)} unreachable")
    return PropertyReport("reachable", Verdict.INCONCLUSIVE, None, len(graph), "state budget exhausted")


def check_mutex(graph: StateGraph, places: Collection[str]) -> PropertyReport:
    indexes = {graph.places.index(p) for p in places}
    for i, state in enumerate(graph.states):
        marked = [graph.places[p] for p, c in state if p in indexes and c]
        if len(marked) > 1:
            return PropertyReport("mutex", Verdict.VIOLATED, graph.path_to(i), len(graph),
                                  f"{marked} marked together")
    return _exhaustive(graph, "mutex", f"{len(indexes)} places")


def check_one_hot(graph: StateGraph, port: Port) -> PropertyReport:
    report = check_mutex(graph, port.places)
    return PropertyReport("one-hot", report.verdict, report.witness, report.states_explored,
                          f"port {port.name}: {report.detail}")


def check_precedence(trace: Union[Trace, Sequence[str]], before: Collection[str], after: Collection[str],
                     reset: Optional[str] = None) -> PropertyReport:
    """Inside every window delimited by `reset`, each `after` firing follows some `before` firing."""
    transitions = trace.transitions if isinstance(trace, Trace) else list(trace)
    before, after = set(before), set(after)
    seen = False
    for i, t in enumerate(transitions):
        if t in before:
            seen = True
        if t in after and not seen:
            return PropertyReport("precedence", Verdict.VIOLATED, list(transitions[:i + 1]), 0,
                                  f"{t} fired at step {i} before any of {sorted(before)[:3]}")
        if reset is not None and t == reset:
            seen = False
    return PropertyReport("precedence", Verdict.HOLDS, None, 0, f"{len(transitions)} firings checked")


def check_bounded(source: Union[StateGraph, Trace, Sequence[str]], place: str, k: int,
                  net: Optional[Net] = None) -> PropertyReport:
    """Token count of `place` never exceeds k (a trace needs its net to be replayed)."""
    name = f"bounded({place}<={k})"
    if isinstance(source, StateGraph):
        if place not in source.net.place_map:
            raise UnknownNodeError(f"unknown place {place!r}")
        index = source.places.index(place)
        for i, state in enumerate(source.states):
            count = dict(state).get(index, 0)
            if count > k:
                return PropertyReport(name, Verdict.VIOLATED, source.path_to(i), len(source), f"{count} tokens")
        return _exhaustive(source, name)
    if net is None:
        raise ValueError("checking a trace needs the net")
    if place not in net.place_map:
        raise UnknownNodeError(f"unknown place {place!r}")
    change: Dict[str, int] = {}
    for arc in net.arcs:
        if arc.kind is ArcKind.READ:
            continue
        if arc.source == place:
            change[arc.target] = change.get(arc.target, 0) - 1
        elif arc.target == place:
            change[arc.source] = change.get(arc.source, 0) + 1
    transitions = source.transitions if isinstance(source, Trace) else list(source)
    count = net.initial_marking.tokens(place)
    peak = count
    for i, t in enumerate(transitions):
        count += change.get(t, 0)
        peak = max(peak, count)
        if count > k:
            return PropertyReport(name, Verdict.VIOLATED, transitions[:i + 1], 0, f"{count} tokens")
    return PropertyReport(name, Verdict.HOLDS, None, 0, f"peak {peak} over {len(transitions)} firings")


def check_reversibility(graph: StateGraph) -> PropertyReport:
    """The initial marking is reachable back from every reachable marking."""
    if not graph.exhausted:
        return PropertyReport("reversible", Verdict.INCONCLUSIVE, None, len(graph), "state budget exhausted")
    incoming: Dict[int, List[int]] = {}
    for src, _, dst in graph.edges:
        incoming.setdefault(dst, []).append(src)
    back = {graph.initial}
    queue = deque([graph.initial])
    while queue:
        state = queue.popleft()
        for src in incoming.get(state, []):
            if src not in back:
                back.add(src)
                queue.append(src)
    stuck = [i for i in range(len(graph)) if i not in back]
    if stuck:
        return PropertyReport("reversible", Verdict.VIOLATED, graph.path_to(stuck[0]), len(graph),
                              f"{len(stuck)} states cannot return to the initial marking")
    return PropertyReport("reversible", Verdict.HOLDS, None, len(graph))


def summarize(reports: Iterable[PropertyReport]) -> Dict[str, int]:
    counts = {"as_expected": 0, "failed": 0, "inconclusive": 0}
    for report in reports:
        if report.verdict is Verdict.INCONCLUSIVE:
            counts["inconclusive"] += 1
        elif report.as_expected:
            counts["as_expected"] += 1
        else:
            counts["failed"] += 1
    return counts
