# engine/lockstep.py
"""
Lockstep comparison of the net against the reference BNN.

The net chooses its learning rate freely and starts from the weights in its
initial marking; both are read back from the run and handed to the
reference so the two sides train from identical starting points.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, List, Optional, Sequence

from blueprints.compose import NetworkSpec, compose_bnn
from bnn.bitfloat import Fp32Bits
from bnn.refbnn import Mode, train
from engine.instrument import initial_bits
from engine.simulator import SchedulePolicy, Simulator, StopCondition, Terminal
from net.model import Net

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CycleDiff:
    cycle: int
    field: str
    pn_value: Any
    ref_value: Any

    def __str__(self) -> str:
        return f"cycle {self.cycle}: {self.field} pn={self.pn_value} ref={self.ref_value}"


@dataclass
class SeedComparison:
    seed: int
    cycles: int
    terminal: Terminal
    learning_rate: Optional[Fraction]
    initial_weights: List[Fp32Bits]
    diffs: List[CycleDiff] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diffs


@dataclass
class LockstepReport:
    epochs: int
    mode: Mode
    results: List[SeedComparison] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def first_mismatch(self) -> Optional[CycleDiff]:
        for result in self.results:
            if result.diffs:
                return result.diffs[0]
        return None

    def summary(self) -> dict:
        return {
            "epochs": self.epochs,
            "mode": self.mode.value,
            "seeds": [r.seed for r in self.results],
            "mismatching_cycles": sum(len(r.diffs) for r in self.results),
            "first_mismatch": str(self.first_mismatch) if self.first_mismatch else None,
            "ok": self.ok,
        }


def lockstep(spec: NetworkSpec, epochs: int, seeds: Sequence[int], mode: Mode = Mode.PN_EXACT,
             net: Optional[Net] = None, max_steps: Optional[int] = None) -> LockstepReport:
    """Run the net once per seed for `epochs` epochs and compare every cycle with the reference."""
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    mode = Mode(mode)
    net = net or compose_bnn(spec, instrument=True, budget=False)
    sim = Simulator(net)
    weights = [Fp32Bits.from_int(bits) for bits in initial_bits(net)]
    cycles = epochs * len(spec.dataset)
    report = LockstepReport(epochs, mode)
    for seed in seeds:
        run = sim.run(SchedulePolicy(seed=seed), StopCondition(max_steps=max_steps, max_cycles=cycles),
                      record_trace=False)
        rate = run.metrics[0].learning_rate if run.metrics else None
        result = SeedComparison(seed, run.cycles, run.terminal, rate, weights)
        if run.terminal is not Terminal.CYCLE_LIMIT:
            result.diffs.append(CycleDiff(run.cycles, "terminal", run.terminal.value, Terminal.CYCLE_LIMIT.value))
        if rate is not None:
            reference = train(spec, epochs, mode, learning_rate=rate, weights=weights)
            for index, (pn, ref) in enumerate(zip(run.metrics, reference.metrics)):
                name = pn.first_difference(ref)
                if name is not None:
                    result.diffs.append(CycleDiff(index, name, getattr(pn, name), getattr(ref, name)))
        level = logging.INFO if result.ok else logging.WARNING
        logger.log(level, f"lockstep seed {seed}: {run.cycles} cycles, {len(result.diffs)} mismatches")
        report.results.append(result)
    return report
