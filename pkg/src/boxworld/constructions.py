"""Explicit processes and instruments: W◇, W△, the GYNI/LGYNI/OCB violations, causal realizations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable


from .boxes import is_box, signaling_residual
from .inequalities import A, B, X, Y, Correlation, causal_decomposition, correlation_axes
from .operations import Instrument, OpDims, Wires
from .processes import (
    ProcessDims,
    ProcessTensor,
    WA,
    WB,
    born_rule,
    mix,
)
from .tensor_core import RATIONAL, LabeledTensor, TensorError


class ConstructionError(TensorError):
    """Input does not meet a construction's precondition."""


@dataclass
class NamedConstruction:
    name: str
    process: ProcessTensor
    instruments: tuple[Instrument, Instrument]
    expected_correlation: Correlation
    notes: str = ""
    components: dict = field(default_factory=dict)

    def correlation(self) -> Correlation:
        return born_rule(self.process, *self.instruments)

    def check(self) -> bool:
        return self.correlation() == self.expected_correlation

    def to_json(self) -> dict:
        return {"name": self.name, "notes": self.notes, "process": self.process.to_json(),
                "instruments": {t.party: t.to_json() for t in self.instruments},
                "expected_correlation": self.expected_correlation.to_json()}


def process_from_function(dims: ProcessDims, fn: Callable[..., object], mode: str = RATIONAL) -> ProcessTensor:
    """Tabulate W from fn(ipA, oA, iA, opA, ipB, oB, iB, opB)."""
    names = [WA.ip, WA.o, WA.i, WA.op, WB.ip, WB.o, WB.i, WB.op]
    keys = ["ipA", "oA", "iA", "opA", "ipB", "oB", "iB", "opB"]
    axes = {a.name: a for a in dims.axes()}
    ordered = [axes[n] for n in names]
    t = LabeledTensor.from_function(ordered, lambda **k: fn(**{kk: k[n] for kk, n in zip(keys, names)}), mode=mode)
    return ProcessTensor(t)


def instrument_from_function(party: str, dims: OpDims, fn: Callable[..., object], mode: str = RATIONAL) -> Instrument:
    """Tabulate T^{A|X} from fn(a, x, i, op, ip, o)."""
    w = Wires(party)
    names = [w.outcome, w.setting, w.i, w.op, w.ip, w.o]
    t = LabeledTensor.from_function(dims.axes(party), lambda **k: fn(*(k[n] for n in names)), mode=mode)
    return Instrument(party, t)


def instrument_from_table(party: str, dims: OpDims, table: dict) -> Instrument:
    """Deterministic instrument from {(x, o): (a, o', i)} with trivial I'."""
    def fn(a, x, i, op, ip, o):
        ta, top, ti = table[(x, o)]
        return int(a == ta and op == top and i == ti)
    return instrument_from_function(party, dims, fn)


# W◇ and W△


def _box_over_wires(p: LabeledTensor) -> LabeledTensor:
    names = set(p.names)
    if names == {WA.o, WB.o, WA.i, WB.i}:
        return p
    if names == {A, B, X, Y}:
        return p.rename({A: WA.o, B: WB.o, X: WA.i, Y: WB.i})
    raise ConstructionError(f"expected a box over O_A,O_B|I_A,I_B or A,B|X,Y, got {p.names}")


def w_diamond(p) -> ProcessTensor:
    """δ_{I'_A,φ} δ_{I'_B,φ} P_{O_A O_B|I_A I_B}, with trivial O'_A, O'_B."""
    t = _box_over_wires(p.tensor if hasattr(p, "tensor") else p)
    if not is_box(t):
        raise ConstructionError("w_diamond needs a valid two-party box")
    dims = ProcessDims(OpDims(1, t.card(WA.i), t.card(WA.o), 1), OpDims(1, t.card(WB.i), t.card(WB.o), 1))
    return process_from_function(dims, lambda ipA, oA, iA, opA, ipB, oB, iB, opB: t[{WA.o: oA, WB.o: oB, WA.i: iA, WB.i: iB}],
                                 mode=t.mode)


def t_diamond(party: str = "A", d_in: int = 2, d_out: int = 2) -> Instrument:
    """δ_{I,X} δ_{O',φ} δ_{A,O}: read out the prepared box."""
    dims = OpDims(1, d_in, d_out, 1, d_out, d_in)
    return instrument_from_function(party, dims, lambda a, x, i, op, ip, o: int(i == x and a == o))


def two_way_signaling_box() -> LabeledTensor:
    """P^{2-sig}: O_A = I_B and O_B = I_A."""
    return LabeledTensor.from_function(
        correlation_axes(), lambda **k: int(k[A] == k[Y] and k[B] == k[X])).rename(
        {A: WA.o, B: WB.o, X: WA.i, Y: WB.i})


def w_triangle() -> ProcessTensor:
    """δ_{I'_A,I_B} δ_{O_A,φ} δ_{I'_B,φ} δ_{O_B,O'_A}: identity channels from Bob's I to Alice's I' and
    from Alice's O' to Bob's O."""
    dims = ProcessDims(OpDims(2, 1, 1, 2), OpDims(1, 2, 2, 1))
    return process_from_function(dims, lambda ipA, oA, iA, opA, ipB, oB, iB, opB: int(ipA == iB and oB == opA))


def t_triangle_A() -> Instrument:
    """δ_{I_A,φ} δ_{O'_A,X} δ_{A,I'_A}."""
    return instrument_from_function("A", OpDims(2, 1, 1, 2, 2, 2), lambda a, x, i, op, ip, o: int(op == x and a == ip))


def t_triangle_B() -> Instrument:
    """δ_{I_B,Y} δ_{O'_B,φ} δ_{B,O_B}."""
    return instrument_from_function("B", OpDims(1, 2, 2, 1, 2, 2), lambda a, x, i, op, ip, o: int(i == x and a == o))


def diamond_construction(p=None) -> NamedConstruction:
    p = two_way_signaling_box() if p is None else _box_over_wires(p.tensor if hasattr(p, "tensor") else p)
    w = w_diamond(p)
    ta = t_diamond("A", p.card(WA.i), p.card(WA.o))
    tb = t_diamond("B", p.card(WB.i), p.card(WB.o))
    expected = Correlation(p.rename({WA.o: A, WB.o: B, WA.i: X, WB.i: Y}))
    return NamedConstruction("diamond", w, (ta, tb), expected, "joint state preparation read out locally")


def triangle_construction() -> NamedConstruction:
    expected = Correlation.from_function(lambda a, b, x, y: int(a == y and b == x))
    return NamedConstruction("triangle", w_triangle(), (t_triangle_A(), t_triangle_B()), expected,
                             "one-way identity channel used in both directions of wires")


# GYNI, LGYNI, OCB

_THIRD = Fraction(1, 3)
_HALF = Fraction(1, 2)


def gyni_bit() -> NamedConstruction:
    d = OpDims(1, 2, 2, 2)
    dims = ProcessDims(d, d)

    def w(ipA, oA, iA, opA, ipB, oB, iB, opB):
        const = int(oA == opB and oB == opA)
        lhs = oA ^ oB ^ opA ^ opB ^ 1
        rhs = (iA ^ opA ^ 1) * (iB ^ opB ^ 1)
        return _THIRD * const + Fraction(2, 3) * _HALF * int(lhs == rhs)

    def t(a, x, i, op, ip, o):
        return int(i == x and op == x and a == o)

    ops = OpDims(1, 2, 2, 2, 2, 2)
    expected = Correlation.from_function(
        lambda a, b, x, y: _THIRD * int(a == y and b == x)
        + Fraction(2, 3) * (_HALF * int(a == y and b == x) + _HALF * int((a ^ 1) == y and (b ^ 1) == x)))
    return NamedConstruction("gyni_bit", process_from_function(dims, w),
                             (instrument_from_function("A", ops, t), instrument_from_function("B", ops, t)),
                             expected, "1/3 constant box + 2/3 PR box conditioned on O'_A, O'_B; GYNI = 2/3")


# Block (r, c) holds O'_A = r, O'_B = c. Rows are (O_A, O_B) in order 00, 01, 02, 10, 11, 12;
# columns are (I_A, I_B) in order 00, 01, 10, 11. Entries in quarters.
GYNI_TRIT_TABLE = {
    (0, 0): [[1, 2, 0, 2], [1, 0, 2, 0], [0, 0, 0, 0], [1, 2, 2, 2], [1, 0, 0, 0], [0, 0, 0, 0]],
    (0, 1): [[1, 2, 2, 4], [1, 0, 2, 0], [0, 0, 0, 0], [1, 2, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0]],
    (0, 2): [[1, 2, 2, 2], [1, 0, 0, 0], [0, 0, 0, 0], [1, 2, 0, 2], [1, 0, 2, 0], [0, 0, 0, 0]],
    (1, 0): [[1, 0, 0, 0], [1, 0, 2, 0], [0, 2, 0, 2], [1, 2, 2, 2], [1, 0, 0, 0], [0, 0, 0, 0]],
    (1, 1): [[1, 0, 2, 2], [1, 0, 2, 0], [0, 2, 0, 2], [1, 2, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0]],
    (1, 2): [[1, 0, 2, 0], [1, 0, 0, 0], [0, 2, 0, 2], [1, 2, 0, 2], [1, 0, 2, 0], [0, 0, 0, 0]],
    (2, 0): [[1, 2, 0, 0], [1, 0, 2, 0], [0, 0, 0, 2], [1, 0, 2, 2], [1, 0, 0, 0], [0, 2, 0, 0]],
    (2, 1): [[1, 2, 2, 2], [1, 0, 2, 0], [0, 0, 0, 2], [1, 0, 0, 0], [1, 0, 0, 0], [0, 2, 0, 0]],
    (2, 2): [[1, 2, 2, 0], [1, 0, 0, 0], [0, 0, 0, 2], [1, 0, 0, 2], [1, 0, 2, 0], [0, 2, 0, 0]],
}

# (X, O_A) -> (A, O'_A, I_A) and (Y, O_B) -> (B, O'_B, I_B)
GYNI_TRIT_ALICE = {(0, 0): (1, 1, 0), (0, 1): (1, 2, 0), (1, 0): (1, 0, 1), (1, 1): (0, 2, 1)}
GYNI_TRIT_BOB = {(0, 0): (1, 0, 0), (0, 1): (1, 2, 0), (0, 2): (0, 0, 0),
                 (1, 0): (1, 1, 1), (1, 1): (1, 1, 1), (1, 2): (0, 0, 1)}


def gyni_trit() -> NamedConstruction:
    da, db = OpDims(1, 2, 2, 3), OpDims(1, 2, 3, 3)
    dims = ProcessDims(da, db)

    def w(ipA, oA, iA, opA, ipB, oB, iB, opB):
        return Fraction(GYNI_TRIT_TABLE[(opA, opB)][3 * oA + oB][2 * iA + iB], 4)

    ta = instrument_from_table("A", OpDims(1, 2, 2, 3, 2, 2), GYNI_TRIT_ALICE)
    tb = instrument_from_table("B", OpDims(1, 2, 3, 3, 2, 2), GYNI_TRIT_BOB)
    expected = Correlation.from_function(lambda a, b, x, y: int(a == (x * (y ^ 1)) ^ 1 and b == ((x ^ 1) * y) ^ 1))
    return NamedConstruction("gyni_trit", process_from_function(dims, w), (ta, tb), expected,
                             "ternary O'_A, O_B, O'_B; GYNI = 3/4, fails only at X = Y = 0")


def lgyni() -> NamedConstruction:
    d = OpDims(1, 2, 2, 2)
    dims = ProcessDims(d, d)

    def pr_target(iA, iB, opA, opB):
        if (opA, opB) == (0, 0):
            return iA & iB
        if (opA, opB) == (0, 1):
            return iA & (iB ^ 1)
        if (opA, opB) == (1, 0):
            return iA ^ 1
        return (iA & iB) ^ 1

    def w(ipA, oA, iA, opA, ipB, oB, iB, opB):
        alpha = int(oA == iA * opB and oB == iB * opA)
        pr = _HALF * int((oA ^ oB) == pr_target(iA, iB, opA, opB))
        return _THIRD * alpha + Fraction(2, 3) * pr

    def t(a, x, i, op, ip, o):
        return int(i == x and op == o and a == x * o)

    ops = OpDims(1, 2, 2, 2, 2, 2)
    expected = Correlation.from_function(
        lambda a, b, x, y: _THIRD * int(a == 0 and b == 0) + Fraction(2, 3) * int(a == x * y and b == x * y))
    return NamedConstruction("lgyni", process_from_function(dims, w),
                             (instrument_from_function("A", ops, t), instrument_from_function("B", ops, t)),
                             expected, "1/3 LGYNI box + 2/3 PR-like box; LGYNI = 11/12")


# Columns (x, y, y') in order 000, 001, ..., 111; rows (a, b) in order 00, 01, 10, 11. Entries in halves.
OCB_TABLE = [
    [1, 1, 0, 1, 1, 0, 0, 0],
    [1, 0, 0, 0, 1, 1, 0, 1],
    [0, 1, 1, 1, 0, 0, 1, 0],
    [0, 0, 1, 0, 0, 1, 1, 1],
]


def ocb_table_correlation() -> Correlation:
    """The OCB-saturating correlation with Bob's setting index 2·y + y'."""
    return Correlation.from_function(lambda a, b, x, yy: Fraction(OCB_TABLE[2 * a + b][4 * x + yy], 2), y=4)


def ocb() -> NamedConstruction:
    d = OpDims(1, 2, 2, 2)
    dims = ProcessDims(d, d)

    def w(ipA, oA, iA, opA, ipB, oB, iB, opB):
        return _HALF * int((oA ^ oB ^ opB) == (iA ^ opA ^ opB) * iB)

    ta = instrument_from_function("A", OpDims(1, 2, 2, 2, 2, 2),
                                  lambda a, x, i, op, ip, o: int(i == 0 and op == (o ^ x) and a == o))

    def tb(b, s, i, op, ip, o):
        y, yp = divmod(s, 2)
        return int(i == yp and op == (o ^ y) and b == o)

    tb = instrument_from_function("B", OpDims(1, 2, 2, 2, 2, 4), tb)
    return NamedConstruction("ocb", process_from_function(dims, w), (ta, tb), ocb_table_correlation(),
                             "relabeled PR box for fixed O'_A, O'_B; Bob's setting index is 2*y + y'")


# causal realizations


def _conditional(p: Correlation, first: str):
    """Split P into P_{first|its input} and P_{second|first, inputs}, both as nested Python lists."""
    t = p.tensor.transpose([A, B, X, Y])
    na, nb, nx, ny = t.shape
    data = t.data
    if first == A:
        marg = [[sum(data[a, b, x, 0] for b in range(nb)) for a in range(na)] for x in range(nx)]
        cond = {}
        for a, x, y in itertools.product(range(na), range(nx), range(ny)):
            m = marg[x][a]
            cond[(a, x, y)] = [data[a, b, x, y] / m if m else int(b == 0) for b in range(nb)]
        return marg, cond
    marg = [[sum(data[a, b, 0, y] for a in range(na)) for b in range(nb)] for y in range(ny)]
    cond = {}
    for b, x, y in itertools.product(range(nb), range(nx), range(ny)):
        m = marg[y][b]
        cond[(b, x, y)] = [data[a, b, x, y] / m if m else int(a == 0) for a in range(na)]
    return marg, cond


def deterministic_weights(marg) -> list[tuple[tuple, object]]:
    """Product-form decomposition P(a|x) = Σ_f π_f δ_{a,f(x)} with π_f = Π_x P(f(x)|x)."""
    nx, na = len(marg), len(marg[0])
    out = []
    for f in itertools.product(range(na), repeat=nx):
        wt = Fraction(1)
        for x in range(nx):
            wt *= marg[x][f[x]]
        if wt:
            out.append((f, wt))
    return out


def _ordered_parts(p: Correlation, first: str):
    """Strategies for a correlation with no signaling from the second party to ``first``.

    Returns (first_fn, second_fn, payload_size). first_fn(out, setting, op) is the weight of the first mover
    answering ``out`` and sending O' = setting * |out| + out; second_fn(out, setting, payload) is the second
    mover's response probability after receiving the payload on I'.
    """
    marg, cond = _conditional(p, first)
    n_out = len(marg[0])
    payload = n_out * len(marg)
    decomp = deterministic_weights(marg)

    def first_fn(out, setting, op):
        if op != setting * n_out + out:
            return Fraction(0)
        return sum((wt for f, wt in decomp if f[setting] == out), Fraction(0))

    def second_fn(out, setting, pl):
        fs, fo = divmod(pl, n_out)
        key = (fo, fs, setting) if first == A else (fo, setting, fs)
        return cond[key][out]

    return first_fn, second_fn, payload


def realize_ordered(p: Correlation, order: str) -> NamedConstruction:
    """Realize a correlation without signaling against ``order`` ('A<B' or 'B<A') by a one-way channel."""
    first = A if order == "A<B" else B
    src, dst = ("B", "A") if first == A else ("A", "B")
    if signaling_residual(p.tensor, src, dst) != 0:
        raise ConstructionError(f"correlation signals from {src} to {dst}; it is not {order}")
    first_fn, second_fn, payload = _ordered_parts(p, first)
    p_first, p_second = ("A", "B") if first == A else ("B", "A")
    n_first = (p.card(A), p.card(X)) if first == A else (p.card(B), p.card(Y))
    n_second = (p.card(B), p.card(Y)) if first == A else (p.card(A), p.card(X))
    t_first = instrument_from_function(p_first, OpDims(1, 1, 1, payload, *n_first),
                                       lambda a, x, i, op, ip, o: first_fn(a, x, op))
    t_second = instrument_from_function(p_second, OpDims(payload, 1, 1, 1, *n_second),
                                        lambda a, x, i, op, ip, o: second_fn(a, x, ip))
    sender, receiver = OpDims(1, 1, 1, payload), OpDims(payload, 1, 1, 1)
    if first == A:
        dims = ProcessDims(sender, receiver)
        process = process_from_function(dims, lambda ipA, oA, iA, opA, ipB, oB, iB, opB: int(ipB == opA))
        inst = (t_first, t_second)
    else:
        dims = ProcessDims(receiver, sender)
        process = process_from_function(dims, lambda ipA, oA, iA, opA, ipB, oB, iB, opB: int(ipA == opB))
        inst = (t_second, t_first)
    return NamedConstruction(f"causal_{order}", process, inst, p, f"one-way channel realizing an {order} correlation")


def realize_nonsignaling(p: Correlation) -> NamedConstruction:
    if signaling_residual(p.tensor, "A", "B") != 0 or signaling_residual(p.tensor, "B", "A") != 0:
        raise ConstructionError("correlation is signaling")
    c = diamond_construction(p.tensor)
    return NamedConstruction("causal_ns", c.process, c.instruments, p, "nonsignaling box read out locally")


def _flagged(p_ab: Correlation, p_ba: Correlation, q) -> NamedConstruction:
    """Flag construction: W^sep = q W^{A<B} (flags 0) + (1-q) W^{B<A} (flags 1).

    Each flag is folded into an I' wire: I' index = flag * payload + payload value. Flag 0 tells Alice to act
    first and Bob to wait for her message; flag 1 swaps the roles.
    """
    na, nb, nx, ny = (p_ab.card(n) for n in (A, B, X, Y))
    pay_a, pay_b = na * nx, nb * ny
    a_first, b_second, _ = _ordered_parts(p_ab, A)
    b_first, a_second, _ = _ordered_parts(p_ba, B)

    def alice(a, x, i, op, ip, o):
        flag, pl = divmod(ip, pay_b)
        return a_first(a, x, op) if flag == 0 else a_second(a, x, pl) * int(op == 0)

    def bob(b, y, i, op, ip, o):
        flag, pl = divmod(ip, pay_a)
        return b_second(b, y, pl) * int(op == 0) if flag == 0 else b_first(b, y, op)

    ta = instrument_from_function("A", OpDims(2 * pay_b, 1, 1, pay_a, na, nx), alice)
    tb = instrument_from_function("B", OpDims(2 * pay_a, 1, 1, pay_b, nb, ny), bob)
    dims = ProcessDims(OpDims(2 * pay_b, 1, 1, pay_a), OpDims(2 * pay_a, 1, 1, pay_b))
    w_ab = process_from_function(dims, lambda ipA, oA, iA, opA, ipB, oB, iB, opB: int(ipA == 0 and ipB == opA))
    w_ba = process_from_function(dims, lambda ipA, oA, iA, opA, ipB, oB, iB, opB:
                                 int(ipB == pay_a and ipA == pay_b + opB))
    q = Fraction(q)
    w = mix([q, 1 - q], [w_ab, w_ba])
    expected = Correlation((p_ab.tensor.scale(q) + p_ba.tensor.scale(1 - q)).as_checked())
    return NamedConstruction("causal_mixture", w, (ta, tb), expected,
                             "flagged mixture of one-way channel realizations",
                             components={"q": q, "A<B": w_ab, "B<A": w_ba})


def realize_causal(p: Correlation, kind: str = "causal", q=None, parts=None) -> NamedConstruction:
    """Boxworld realization of a causal correlation.

    kind: 'ns', 'A<B', 'B<A' or 'causal'. For 'causal', ``parts`` = (P^{A<B}, P^{B<A}) with weight ``q``;
    when omitted the decomposition is found by the causal membership LP.
    """
    if p.mode != RATIONAL:
        raise ConstructionError("causal realization works in rational mode")
    if kind == "ns":
        return realize_nonsignaling(p)
    if kind in ("A<B", "B<A"):
        return realize_ordered(p, kind)
    if kind != "causal":
        raise ConstructionError(f"unknown kind {kind!r}")
    if parts is None:
        dec = causal_decomposition(p)
        if dec is None:
            raise ConstructionError("correlation is not causal")
        q = sum((wt for order, _, wt in dec if order == "A<B"), Fraction(0))
        parts = []
        for order, weight in (("A<B", q), ("B<A", 1 - q)):
            if weight == 0:
                parts.append(Correlation.uniform())
                continue
            acc = None
            for o, v, wt in dec:
                if o == order:
                    term = v.tensor.scale(wt / weight)
                    acc = term if acc is None else acc + term
            parts.append(Correlation(acc.as_checked()))
    p_ab, p_ba = parts
    if signaling_residual(p_ab.tensor, "B", "A") != 0 or signaling_residual(p_ba.tensor, "A", "B") != 0:
        raise ConstructionError("mixture components are not one-way")
    c = _flagged(p_ab, p_ba, q)
    if not c.expected_correlation == p:
        raise ConstructionError("mixture components do not reproduce the correlation")
    return c


CATALOG = {
    "diamond": diamond_construction,
    "triangle": triangle_construction,
    "gyni_bit": gyni_bit,
    "gyni_trit": gyni_trit,
    "lgyni": lgyni,
    "ocb": ocb,
}


def get(name: str) -> NamedConstruction:
    try:
        return CATALOG[name]()
    except KeyError:
        raise ConstructionError(f"unknown construction {name!r}; known: {sorted(CATALOG)}") from None
