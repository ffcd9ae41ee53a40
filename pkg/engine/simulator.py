# engine/simulator.py
"""
Token-game simulation with interleaving semantics.

The net is compiled once into index form: per transition the token delta
and the input places (consumed or read), per place the transitions that
watch it. Firing updates only the transitions watching the places that
crossed zero, and the marking digest is maintained incrementally.
"""
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Union

from blueprints.compose import CYCLE_TRANSITION
from bnn.metrics import StepMetrics
from engine.instrument import decode_instrument, has_instrument
from net.model import ArcKind, ContractError, Marking, Net, SafetyViolation, Trace, fire, place_key

logger = logging.getLogger(__name__)


class PolicyKind(str, Enum):
    UNIFORM = "uniform"
    PRIORITY = "priority"


class Terminal(str, Enum):
    QUIESCENT = "quiescent"
    STEP_LIMIT = "step-limit"
    CYCLE_LIMIT = "cycle-limit"
    SAFETY_VIOLATION = "safety-violation"


@dataclass(frozen=True)
class SchedulePolicy:
    """uniform: seeded uniform choice among enabled transitions; priority: lowest net index first."""
    kind: PolicyKind = PolicyKind.UNIFORM
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))


@dataclass(frozen=True)
class StopCondition:
    max_steps: Optional[int] = None
    max_cycles: Optional[int] = None


@dataclass
class RunReport:
    terminal: Terminal
    firings: int
    cycles: int
    final_marking: Marking
    trace: Optional[Trace] = None
    metrics: List[StepMetrics] = field(default_factory=list)
    violation: Optional[SafetyViolation] = None


class _EnabledSet:
    """Insertion-ordered set with O(1) removal and indexed choice."""

    def __init__(self):
        self.items: List[int] = []
        self.pos: Dict[int, int] = {}

    def add(self, t: int):
        if t not in self.pos:
            self.pos[t] = len(self.items)
            self.items.append(t)

    def discard(self, t: int):
        i = self.pos.pop(t, None)
        if i is None:
            return
        last = self.items.pop()
        if last != t:
            self.items[i] = last
            self.pos[last] = i

    def __len__(self) -> int:
        return len(self.items)


class Simulator:
    def __init__(self, net: Net):
        self.net = net
        self.logger = logging.getLogger(__name__)
        self.places = [p.name for p in net.places]
        self.transitions = [t.name for t in net.transitions]
        self.counter = [p.is_counter for p in net.places]
        self.bound = [p.bound for p in net.places]
        p_index = {name: i for i, name in enumerate(self.places)}
        t_index = {name: i for i, name in enumerate(self.transitions)}
        inputs: List[set] = [set() for _ in self.transitions]
        delta: List[Dict[int, int]] = [{} for _ in self.transitions]
        for arc in net.arcs:
            if arc.kind is ArcKind.READ:
                inputs[t_index[arc.target]].add(p_index[arc.source])
            elif arc.source in p_index:
                t, p = t_index[arc.target], p_index[arc.source]
                inputs[t].add(p)
                delta[t][p] = delta[t].get(p, 0) - 1
            else:
                t, p = t_index[arc.source], p_index[arc.target]
                delta[t][p] = delta[t].get(p, 0) + 1
        self.inputs = [tuple(sorted(s)) for s in inputs]
        self.delta = [tuple((p, d) for p, d in sorted(ds.items()) if d) for ds in delta]
        watchers: List[List[int]] = [[] for _ in self.places]
        for t, places in enumerate(self.inputs):
            for p in places:
                watchers[p].append(t)
        self.watchers = [tuple(w) for w in watchers]
        self.sources = frozenset(t for t, places in enumerate(self.inputs) if not places)
        self.t_index = t_index
        self.p_index = p_index
        self.logger.debug(f"compiled net with {len(self.places)} places and {len(self.transitions)} transitions")

    def _key(self, p: int, count: int) -> int:
        return place_key(self.places[p], count) if count else 0

    def _marking(self, tokens: Sequence[int]) -> Marking:
        marked = [self.places[p] for p, c in enumerate(tokens) if c and not self.counter[p]]
        counts = {self.places[p]: c for p, c in enumerate(tokens) if c and self.counter[p]}
        return Marking.of(marked, counts)

    def run(self, policy: SchedulePolicy = SchedulePolicy(), stop: StopCondition = StopCondition(),
            record_trace: bool = True, initial: Optional[Marking] = None, decode: bool = True,
            cycle_transition: str = CYCLE_TRANSITION) -> RunReport:
        marking = initial if initial is not None else self.net.initial_marking
        tokens = [marking.tokens(p) for p in self.places]
        missing = [sum(1 for p in places if tokens[p] == 0) for places in self.inputs]
        enabled = _EnabledSet()
        for t, m in enumerate(missing):
            if m == 0:
                enabled.add(t)
        digest = marking.digest()
        rng = random.Random(policy.seed)
        cycle_t = self.t_index.get(cycle_transition)
        decode = decode and cycle_t is not None and has_instrument(self.net)
        trace = Trace() if record_trace else None
        metrics: List[StepMetrics] = []
        firings = cycles = 0
        violation = None

        while True:
            if stop.max_steps is not None and firings >= stop.max_steps:
                terminal = Terminal.STEP_LIMIT
                break
            if not enabled:
                terminal = Terminal.QUIESCENT
                break
            if policy.kind is PolicyKind.UNIFORM:
                t = enabled.items[rng.randrange(len(enabled))]
            else:
                t = min(enabled.items)
            over = next((p for p, d in self.delta[t] if tokens[p] + d > self.bound[p]), None)
            if over is not None:
                violation = SafetyViolation(self.places[over], self.transitions[t], self._marking(tokens),
                                            tokens[over] + dict(self.delta[t])[over])
                terminal = Terminal.SAFETY_VIOLATION
                self.logger.warning(f"safety violation after {firings} firings: {violation}")
                break
            for p, d in self.delta[t]:
                old = tokens[p]
                new = old + d
                tokens[p] = new
                digest ^= self._key(p, old) ^ self._key(p, new)
                if old == 0 and new > 0:
                    for u in self.watchers[p]:
                        missing[u] -= 1
                        if missing[u] == 0:
                            enabled.add(u)
                elif old > 0 and new == 0:
                    for u in self.watchers[p]:
                        missing[u] += 1
                        enabled.discard(u)
            firings += 1
            if trace is not None:
                trace.append(self.transitions[t], digest)
            if t == cycle_t:
                cycles += 1
                if decode:
                    metrics.append(decode_instrument(self.net, self._marking(tokens)))
                    self.logger.debug(f"cycle {cycles}: {metrics[-1].vector_index} loss {metrics[-1].loss}")
                if stop.max_cycles is not None and cycles >= stop.max_cycles:
                    terminal = Terminal.CYCLE_LIMIT
                    break

        self.logger.info(f"run finished: {terminal.value} after {firings} firings, {cycles} cycles")
        return RunReport(terminal, firings, cycles, self._marking(tokens), trace, metrics, violation)


def run(net: Net, policy: SchedulePolicy = SchedulePolicy(), stop: StopCondition = StopCondition(),
        record_trace: bool = True, initial: Optional[Marking] = None) -> RunReport:
    return Simulator(net).run(policy, stop, record_trace, initial)


def replay(net: Net, transitions: Iterable[str],
           initial: Optional[Marking] = None) -> Union[Marking, SafetyViolation]:
    """Fire a witness sequence; stops at the first safety violation."""
    marking = initial if initial is not None else net.initial_marking
    for step, t in enumerate(transitions):
        try:
            result = fire(net, marking, t)
        except ContractError as e:
            raise ContractError(f"step {step}: {e}") from None
        if isinstance(result, SafetyViolation):
            return result
        marking = result
    return marking


def fired_counts(trace: Trace) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for name in trace.transitions:
        counts[name] = counts.get(name, 0) + 1
    return counts

