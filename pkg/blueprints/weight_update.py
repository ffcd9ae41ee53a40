# blueprints/weight_update.py
"""
W_r <- W_r - J as a net, bit-exact with bnn.bitfloat.update_weight.

Internal registers (all zero at rest):
    JR  32 bits   the binary32 pattern of J
    A   49 bits   fixed-point accumulator, position 47 is the integer bit,
                  48 the guard bit, 0..46 the fraction (23 mantissa + 24 sticky)
    B   28 bits   positions 20..47, J aligned with 4 sticky bits

Pipeline: decode J into JR (J = 0 skips everything), compare |W| and |J|
from bit 30 down, resolve the new sign and the operation, align W into A
and J into B one single-bit shift at a time, add or subtract into A,
saturate on guard, scan for zero, normalize by left shifts, clear W, write
sign/exponent/mantissa back, then return A, B and JR to rest.
"""
import logging
from typing import Dict

from blueprints.registers import (
    add_register,
    clear_chain,
    copy_chain,
    ripple_chain,
    set_from_zero,
    shift_machine,
    shift_queue,
)
from blueprints.segments import Category, Segment, borrowed_bits, fmt_value, value_places, value_port
from blueprints.tables import JDOMAIN
from bnn.bitfloat import (
    BIAS,
    GUARD_POS,
    INT_POS,
    J_STICKY,
    MANT_BITS,
    W_STICKY,
    Comparison,
    Operation,
    align,
    encode,
    resolve_sign_op,
)
from net.model import NetBuilder, Port, PortRole

logger = logging.getLogger(__name__)

MANT_BASE = INT_POS - MANT_BITS
B_LOW = MANT_BASE - J_STICKY
EXPONENT_BITS = range(MANT_BITS, 30)
MAX_W_SHIFTS = BIAS - 1
MAX_J_SHIFTS = 4
J_EXPONENTS = range(BIAS - MAX_J_SHIFTS, BIAS + 1)


def _exponent_reads(reg, exponent: int):
    return [reg.place(pos, (exponent >> (pos - MANT_BITS)) & 1) for pos in EXPONENT_BITS]


def gen_weight_update(name: str = "upd") -> Segment:
    builder = NetBuilder()
    j_places = value_places(builder, "J", JDOMAIN)
    builder.add_port(value_port("J", j_places, JDOMAIN, incoming=True))
    w = borrowed_bits(builder, range(32))
    jr = add_register(builder, "jr", range(32), label="JR")
    acc = add_register(builder, "A", range(GUARD_POS + 1), label="A")
    b = add_register(builder, "B", range(B_LOW, INT_POS + 1), label="B")
    done = builder.add_place("done", "weight updated")
    builder.add_port(Port("done", PortRole.DONE, (done,)))

    # J decode: one transition per nonzero J sets the JR bits and remembers J
    compare = {n: builder.add_place(f"cmp{n}", f"compare bit {n}") for n in range(30, -1, -1)}
    remembered: Dict = {}
    for value, place in zip(JDOMAIN, j_places):
        if value == 0:
            builder.add_transition("bypass", "J=0", consume=[place], produce=[done])
            continue
        pattern = encode(value).to_int()
        consume, produce = set_from_zero((jr, n) for n in range(32) if (pattern >> n) & 1)
        remembered[value] = builder.add_place(f"jv.{fmt_value(value)}", f"J={fmt_value(value)}")
        builder.add_transition(f"jdec.{fmt_value(value)}", f"J={float(value):g}",
                               consume=[place] + consume, produce=produce + [remembered[value], compare[30]])

    # magnitude comparison, bit 30 down to bit 0
    outcome = {c: builder.add_place(f"res.{c.value}", c.value) for c in Comparison}
    for n in range(30, -1, -1):
        for wv in (0, 1):
            for jv in (0, 1):
                if wv == jv:
                    target = compare[n - 1] if n > 0 else outcome[Comparison.SAME]
                else:
                    target = outcome[Comparison.W_G if wv > jv else Comparison.W_L]
                builder.add_transition(f"cmp{n}.{wv}{jv}", f"compare bit {n}",
                                       consume=[compare[n]], produce=[target],
                                       read=[w.place(n, wv), jr.place(n, jv)])

    # sign pair and operation
    new_sign = {s: builder.add_place(f"ns.{s}", f"new sign {s}") for s in (0, 1)}
    ops = {op: builder.add_place(f"op.{op}", op) for op in ("add", "sub", "rsub")}
    wexp = builder.add_place("wexp", "decode W exponent")
    for cmp in Comparison:
        for ws in (0, 1):
            for js in (0, 1):
                sign, op = resolve_sign_op(cmp, ws, js)
                kind = "add" if op is Operation.ADD else ("rsub" if cmp is Comparison.W_L else "sub")
                builder.add_transition(f"resolve.{cmp.value}.{ws}{js}", f"{cmp.value} W{ws} J{js}",
                                       consume=[outcome[cmp]], produce=[new_sign[sign], ops[kind], wexp],
                                       read=[w.place(31, ws), jr.place(31, js)])

    # align W into A: implicit 1, mantissa, then 127 - e right shifts
    a_aligned = builder.add_place("a.aligned", "W aligned")
    sa_idle = builder.add_place("sa.idle", "A shifter idle")
    sa_start = builder.add_place("sa.start", "A shift")
    lm_start = builder.add_place("lm.start", "load W mantissa")
    queue_a = shift_queue(builder, "qa", MAX_W_SHIFTS, sa_idle, sa_start, a_aligned)
    for e in range(BIAS + 1):
        if e == 0:
            builder.add_transition("wexp.0", "W exponent 0", consume=[wexp], produce=[a_aligned],
                                   read=_exponent_reads(w, e))
            continue
        builder.add_transition(f"wexp.{e}", f"W exponent {e}",
                               consume=[wexp, acc.place(INT_POS, 0)],
                               produce=[acc.place(INT_POS, 1), queue_a[BIAS - e], lm_start],
                               read=_exponent_reads(w, e))
    copy_chain(builder, "lm", [(acc, MANT_BASE + m, w, m) for m in range(MANT_BITS - 1, -1, -1)],
               lm_start, sa_idle, dest_known_zero=True)
    shift_machine(builder, "sa", acc, [(p, p + 1) for p in range(INT_POS)], INT_POS, sa_start, sa_idle)

    # align J into B: implicit 1, mantissa from JR, then at most 4 right shifts
    b_aligned = builder.add_place("b.aligned", "J aligned")
    sb_idle = builder.add_place("sb.idle", "B shifter idle")
    sb_start = builder.add_place("sb.start", "B shift")
    lb_one = builder.add_place("lb.one", "set B implicit bit")
    jexp = builder.add_place("jexp", "decode J exponent")
    copy_chain(builder, "lb", [(b, MANT_BASE + m, jr, m) for m in range(MANT_BITS - 1, -1, -1)],
               a_aligned, lb_one, dest_known_zero=True)
    builder.add_transition("lb.implicit", "B implicit 1", consume=[lb_one, b.place(INT_POS, 0)],
                           produce=[b.place(INT_POS, 1), jexp])
    queue_b = shift_queue(builder, "qb", MAX_J_SHIFTS, sb_idle, sb_start, b_aligned)
    for e in J_EXPONENTS:
        builder.add_transition(f"jexp.{e}", f"J exponent {e}", consume=[jexp],
                               produce=[queue_b[BIAS - e], sb_idle], read=_exponent_reads(jr, e))
    shift_machine(builder, "sb", b, [(p, p + 1) for p in range(B_LOW, INT_POS)], INT_POS, sb_start, sb_idle)

    # add or subtract into A
    arith_done = builder.add_place("arith.done", "arithmetic done")
    starts = {op: builder.add_place(f"{op}.start", op) for op in ops}
    for op, place in ops.items():
        builder.add_transition(f"select.{op}", op, consume=[b_aligned, place], produce=[starts[op]])
    carry = ripple_chain(builder, "add", acc, b, range(B_LOW, INT_POS + 1), "add", starts["add"])
    builder.add_transition("add.end", "no carry out", consume=[carry[0]], produce=[arith_done])
    builder.add_transition("add.guard", "carry into guard",
                           consume=[carry[1], acc.place(GUARD_POS, 0)],
                           produce=[acc.place(GUARD_POS, 1), arith_done])
    borrow = ripple_chain(builder, "sub", acc, b, range(B_LOW, INT_POS + 1), "sub", starts["sub"])
    builder.add_transition("sub.end", "A - B done", consume=[borrow[0]], produce=[arith_done])
    borrow = ripple_chain(builder, "rsub", acc, b, range(INT_POS + 1), "rsub", starts["rsub"])
    builder.add_transition("rsub.end", "B - A done", consume=[borrow[0]], produce=[arith_done])

    # guard, zero scan and normalization
    out_sat = builder.add_place("out.sat", "saturated")
    out_zero = builder.add_place("out.zero", "zero result")
    out_norm = builder.add_place("out.norm", "normalized result")
    wc_start = builder.add_place("wc.start", "clear W")
    zscan = builder.add_place("zscan", "zero scan")
    sl_idle = builder.add_place("sl.idle", "left shifter idle")
    sl_start = builder.add_place("sl.start", "left shift")
    norm_queue = [builder.add_place(f"nq{n}", f"{n} normalization shifts") for n in range(INT_POS + 1)]
    norm_count = [builder.add_place(f"norm{n}", f"normalized after {n} shifts") for n in range(INT_POS + 1)]
    builder.add_transition("guard.set", "guard set", consume=[arith_done], produce=[out_sat, wc_start],
                           read=[acc.place(GUARD_POS, 1)])
    builder.add_transition("guard.clear", "guard clear", consume=[arith_done], produce=[zscan],
                           read=[acc.place(GUARD_POS, 0)])
    builder.add_transition("zero", "all bits 0", consume=[zscan], produce=[out_zero, wc_start],
                           read=[acc.place(p, 0) for p in range(INT_POS + 1)])
    for p in range(INT_POS + 1):
        builder.add_transition(f"nonzero{p}", f"bit {p} set", consume=[zscan], produce=[norm_queue[0], sl_idle],
                               read=[acc.place(p, 1)])
    for n in range(INT_POS + 1):
        builder.add_transition(f"nq{n}.hit", "integer bit 1", consume=[norm_queue[n], sl_idle],
                               produce=[out_norm, norm_count[n], wc_start], read=[acc.place(INT_POS, 1)])
        if n < INT_POS:
            builder.add_transition(f"nq{n}.miss", "integer bit 0", consume=[norm_queue[n], sl_idle],
                                   produce=[norm_queue[n + 1], sl_start], read=[acc.place(INT_POS, 0)])
    shift_machine(builder, "sl", acc, [(p, p - 1) for p in range(INT_POS, 0, -1)], 0, sl_start, sl_idle)

    # write back into W
    wc_done = builder.add_place("wc.done", "W cleared")
    clear_chain(builder, "wc", w, range(32), wc_start, wc_done)
    cleanup = builder.add_place("cl.start", "return to rest")
    exponent_ones = [(w, pos) for pos in EXPONENT_BITS]
    for s in (0, 1):
        builder.add_transition(f"put.zero.{s}", "+0", consume=[wc_done, out_zero, new_sign[s]], produce=[cleanup])
        consume, produce = set_from_zero(([(w, 31)] if s else []) + exponent_ones + [(w, m) for m in range(MANT_BITS)])
        builder.add_transition(f"put.sat.{s}", "saturate", consume=[wc_done, out_sat, new_sign[s]] + consume,
                               produce=[cleanup] + produce)
    nexp = builder.add_place("nexp", "write exponent")
    mc_start = builder.add_place("mc.start", "copy mantissa")
    for s in (0, 1):
        consume, produce = set_from_zero([(w, 31)] if s else [])
        builder.add_transition(f"put.sign.{s}", f"sign {s}", consume=[wc_done, out_norm, new_sign[s]] + consume,
                               produce=[nexp] + produce)
    for n in range(INT_POS + 1):
        exponent = BIAS - n
        consume, produce = set_from_zero((w, pos) for pos in EXPONENT_BITS
                                         if (exponent >> (pos - MANT_BITS)) & 1)
        builder.add_transition(f"put.exp{n}", f"exponent {exponent}", consume=[nexp, norm_count[n]] + consume,
                               produce=[mc_start] + produce)
    copy_chain(builder, "mc", [(w, m, acc, MANT_BASE + m) for m in range(MANT_BITS - 1, -1, -1)],
               mc_start, cleanup, dest_known_zero=True)

    # back to rest: A by a clear chain, JR and B by the remembered J
    jr_clear = builder.add_place("cj.start", "clear J registers")
    clear_chain(builder, "ca", acc, range(GUARD_POS + 1), cleanup, jr_clear)
    for value, place in remembered.items():
        pattern = encode(value).to_int()
        aligned = align(encode(value), J_STICKY)[0].significand
        ones = [(jr, n) for n in range(32) if (pattern >> n) & 1]
        ones += [(b, p) for p in b.positions if (aligned >> p) & 1]
        produce, consume = set_from_zero(ones)
        builder.add_transition(f"jclr.{fmt_value(value)}", "clear J", consume=[jr_clear, place] + consume,
                               produce=[done] + produce)

    segment = Segment(name, builder.build(), Category.TRAINING)
    logger.debug(f"generated weight update {name}: {segment.size()}")
    return segment
