# verify/explore.py
"""
Breadth-first construction of the reachable marking graph.

States are stored sparsely as sorted (place index, tokens) tuples. A firing
that would overflow a place is recorded as a violation edge out of its
source state and not explored further.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

from engine.simulator import Simulator
from net.model import Marking, Net, SafetyViolation

logger = logging.getLogger(__name__)

State = Tuple[Tuple[int, int], ...]


@dataclass
class StateGraph:
    net: Net
    places: List[str]
    states: List[State] = field(default_factory=list)
    edges: List[Tuple[int, str, int]] = field(default_factory=list)
    violations: List[Tuple[int, SafetyViolation]] = field(default_factory=list)
    parent: Dict[int, Tuple[int, str]] = field(default_factory=dict)
    out_degree: List[int] = field(default_factory=list)
    exhausted: bool = False
    initial: int = 0

    def __len__(self) -> int:
        return len(self.states)

    def tokens(self, state: int, place: str) -> int:
        index = self.places.index(place) if isinstance(place, str) else place
        return dict(self.states[state]).get(index, 0)

    def marking(self, state: int) -> Marking:
        marked, counts = [], {}
        for p, c in self.states[state]:
            if self.net.places[p].is_counter:
                counts[self.places[p]] = c
            else:
                marked.append(self.places[p])
        return Marking.of(marked, counts)

    def markings(self) -> Iterator[Tuple[int, Marking]]:
        for i in range(len(self.states)):
            yield i, self.marking(i)

    def path_to(self, state: int) -> List[str]:
        """Transitions of the breadth-first tree path from the initial marking."""
        path = []
        while state != self.initial:
            state, t = self.parent[state]
            path.append(t)
        return path[::-1]

    def dead_states(self) -> List[int]:
        blocked = {s for s, _ in self.violations}
        return [i for i, d in enumerate(self.out_degree) if d == 0 and i not in blocked]


def explore(net: Net, max_states: int = 1_000_000, initial: Optional[Marking] = None) -> StateGraph:
    sim = Simulator(net)
    graph = StateGraph(net, sim.places)
    start = initial if initial is not None else net.initial_marking
    first: State = tuple(sorted((sim.p_index[p], start.tokens(p)) for p in
                                list(start.marked) + [name for name, _ in start.counts]))
    index: Dict[State, int] = {first: 0}
    graph.states.append(first)
    graph.out_degree.append(0)
    frontier = deque([0])
    exhausted = True
    while frontier:
        current = frontier.popleft()
        tokens = dict(graph.states[current])
        candidates = sorted({t for p in tokens for t in sim.watchers[p]} | sim.sources)
        for t in candidates:
            if any(tokens.get(p, 0) == 0 for p in sim.inputs[t]):
                continue
            graph.out_degree[current] += 1
            successor = dict(tokens)
            overflow = None
            for p, d in sim.delta[t]:
                value = successor.get(p, 0) + d
                if value > sim.bound[p]:
                    overflow = (p, value)
                    break
                if value:
                    successor[p] = value
                else:
                    successor.pop(p, None)
            name = sim.transitions[t]
            if overflow is not None:
                p, value = overflow
                graph.violations.append((current, SafetyViolation(sim.places[p], name, graph.marking(current), value)))
                continue
            state: State = tuple(sorted(successor.items()))
            target = index.get(state)
            if target is None:
                if len(graph.states) >= max_states:
                    exhausted = False
                    continue
                target = len(graph.states)
                index[state] = target
                graph.states.append(state)
                graph.out_degree.append(0)
                graph.parent[target] = (current, name)
                frontier.append(target)
            graph.edges.append((current, name, target))
    graph.exhausted = exhausted
    logger.info(f"explored {len(graph.states)} states, {len(graph.edges)} edges "
                f"({'exhausted' if exhausted else 'budget hit'})")
    return graph
