# blueprints/registers.py
"""
Register-transfer building blocks on top of NetBuilder.

A register bit is a pair of places (value 0, value 1) with exactly one
marked. Micro-operations are sequential chains of stage places: a stage
transition consumes its stage token, inspects or rewrites bits and hands
the token to the next stage. Rewriting a bit to the value it already holds
is a read arc, so every transition touches each bit at most once.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from net.model import NetBuilder


@dataclass
class BitRegister:
    name: str
    places: Dict[int, Tuple[str, str]] = field(default_factory=dict)

    def place(self, position: int, value: int) -> str:
        return self.places[position][value]

    @property
    def positions(self) -> List[int]:
        return sorted(self.places)

    def all_places(self) -> List[str]:
        return [p for pos in self.positions for p in self.places[pos]]


def add_register(builder: NetBuilder, name: str, positions: Iterable[int],
                 value: Optional[int] = 0, label: str = "") -> BitRegister:
    """Bit pairs `{name}{pos}.0/.1`, marked with the bits of `value` (unmarked when None)."""
    reg = BitRegister(name)
    for pos in positions:
        bit = None if value is None else (value >> pos) & 1
        zero = builder.add_place(f"{name}{pos}.0", f"{label or name}[{pos}]=0", marked=bit == 0)
        one = builder.add_place(f"{name}{pos}.1", f"{label or name}[{pos}]=1", marked=bit == 1)
        reg.places[pos] = (zero, one)
    return reg


def write(reg: BitRegister, position: int, old: int, new: int) -> Tuple[List[str], List[str], List[str]]:
    """(consume, produce, read) lists rewriting one bit from a known old value."""
    if old == new:
        return [], [], [reg.place(position, old)]
    return [reg.place(position, old)], [reg.place(position, new)], []


def set_from_zero(regs_bits: Iterable[Tuple[BitRegister, int]]) -> Tuple[List[str], List[str]]:
    """(consume, produce) raising the listed bits from their rest value 0."""
    consume, produce = [], []
    for reg, pos in regs_bits:
        consume.append(reg.place(pos, 0))
        produce.append(reg.place(pos, 1))
    return consume, produce


def stage_places(builder: NetBuilder, name: str, count: int, label: str = "") -> List[str]:
    return [builder.add_place(f"{name}{i}", f"{label or name} step {i}") for i in range(count)]


def copy_chain(builder: NetBuilder, name: str, steps: Sequence[Tuple[BitRegister, int, BitRegister, int]],
               start: str, done: str, dest_known_zero: bool = False) -> int:
    """
    dst <- src for each (dst, dst_pos, src, src_pos), one step at a time.

    With `dest_known_zero` the destination is assumed to hold 0 (two
    transitions per step), otherwise both destination values are handled
    (four transitions per step). Returns the number of transitions added.
    """
    stages = [start] + stage_places(builder, f"{name}.s", len(steps) - 1) + [done] if steps else [start, done]
    added = 0
    if not steps:
        builder.add_transition(f"{name}.skip", name, consume=[start], produce=[done])
        return 1
    for i, (dst, dpos, src, spos) in enumerate(steps):
        olds = (0,) if dest_known_zero else (0, 1)
        for old in olds:
            for value in (0, 1):
                consume, produce, read = write(dst, dpos, old, value)
                builder.add_transition(
                    f"{name}.{i}.{old}{value}", f"{name} {dst.name}[{dpos}]<-{src.name}[{spos}]",
                    consume=[stages[i]] + consume, produce=[stages[i + 1]] + produce,
                    read=read + [src.place(spos, value)],
                )
                added += 1
    return added


def clear_chain(builder: NetBuilder, name: str, reg: BitRegister, positions: Sequence[int],
                start: str, done: str) -> int:
    """Reset the listed bits to 0, one step per bit."""
    stages = [start] + stage_places(builder, f"{name}.s", len(positions) - 1) + [done]
    for i, pos in enumerate(positions):
        builder.add_transition(f"{name}.{i}.0", f"{name} {reg.name}[{pos}] is 0",
                               consume=[stages[i]], produce=[stages[i + 1]], read=[reg.place(pos, 0)])
        builder.add_transition(f"{name}.{i}.1", f"{name} {reg.name}[{pos}] 1->0",
                               consume=[stages[i], reg.place(pos, 1)],
                               produce=[stages[i + 1], reg.place(pos, 0)])
    return 2 * len(positions)


def shift_machine(builder: NetBuilder, name: str, reg: BitRegister, moves: Sequence[Tuple[int, int]],
                  fill: int, start: str, done: str) -> int:
    """
    One single-bit shift: reg[dst] <- reg[src] for each move in order, then
    reg[fill] <- 0. Moves must be ordered so a source is read before it is
    overwritten.
    """
    last = builder.add_place(f"{name}.fill", f"{name} fill")
    added = copy_chain(builder, name, [(reg, d, reg, s) for d, s in moves], start, last)
    added += clear_chain(builder, f"{name}.z", reg, [fill], last, done)
    return added


def shift_queue(builder: NetBuilder, name: str, max_shifts: int, idle: str,
                machine_start: str, out: str) -> List[str]:
    """
    Shift counter q0..q{max}. A step consumes q_s and the machine's idle
    token and starts one shift; the machine returns idle when finished, so
    a shift may only begin after the previous one completed.
    """
    queue = [builder.add_place(f"{name}.q{s}", f"{name}: {s} shifts left") for s in range(max_shifts + 1)]
    for s in range(1, max_shifts + 1):
        builder.add_transition(f"{name}.step{s}", f"{name} shift", consume=[queue[s], idle],
                               produce=[queue[s - 1], machine_start])
    builder.add_transition(f"{name}.exit", f"{name} aligned", consume=[queue[0], idle], produce=[out])
    return queue


def ripple_chain(builder: NetBuilder, name: str, acc: BitRegister, other: Optional[BitRegister],
                 positions: Sequence[int], mode: str, start: str) -> Dict[int, str]:
    """
    Bit-serial arithmetic from the lowest listed position upwards, result
    written into `acc`:

    - "add":   acc <- acc + other (carry)
    - "sub":   acc <- acc - other
    - "rsub":  acc <- other - acc

    Subtraction carries the borrow forward onto the next subtrahend digit.
    Positions missing from `other` read as 0. The chain starts from `start`
    with carry 0 and ends in one of two returned places keyed by the final
    carry/borrow.
    """
    if mode not in ("add", "sub", "rsub"):
        raise ValueError(f"unknown ripple mode {mode!r}")
    carry = {0: start}
    for index, pos in enumerate(positions):
        nxt = {c: builder.add_place(f"{name}.{index + 1}c{c}", f"{name} carry {c} into bit {index + 1}")
               for c in (0, 1)}
        b_values = (0, 1) if other is not None and pos in other.places else (0,)
        for c, stage in carry.items():
            for a in (0, 1):
                for b in b_values:
                    if mode == "add":
                        total = a + b + c
                        bit, out = total & 1, total >> 1
                    elif mode == "sub":
                        diff = a - b - c
                        bit, out = diff & 1, int(diff < 0)
                    else:
                        diff = b - a - c
                        bit, out = diff & 1, int(diff < 0)
                    consume, produce, read = write(acc, pos, a, bit)
                    if len(b_values) == 2:
                        read = read + [other.place(pos, b)]
                    builder.add_transition(
                        f"{name}.{pos}.{a}{b}{c}", f"{name} bit {pos}",
                        consume=[stage] + consume, produce=[nxt[out]] + produce, read=read,
                    )
        carry = nxt
    return carry
