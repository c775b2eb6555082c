"""Correlations, signaling profiles, causal inequalities and their reference bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .boxes import is_box, signaling_residual
from .tensor_core import INPUT, OUTPUT, RATIONAL, AxisSpec, LabeledTensor, TensorError, to_number


class ShapeError(TensorError):
    """Correlation does not have the scenario shape an inequality expects."""


A, B, X, Y, YP = "A", "B", "X", "Y", "Y'"


def correlation_axes(a=2, b=2, x=2, y=2, yp: int | None = None) -> tuple[AxisSpec, ...]:
    axes = (AxisSpec(A, a, OUTPUT), AxisSpec(B, b, OUTPUT), AxisSpec(X, x, INPUT), AxisSpec(Y, y, INPUT))
    if yp is not None:
        axes += (AxisSpec(YP, yp, INPUT),)
    return axes


class Correlation:
    """P_{AB|XY} (or P_{AB|XYY'}) as a labeled tensor."""

    __slots__ = ("tensor",)

    def __init__(self, tensor: LabeledTensor):
        names = set(tensor.names)
        if not {A, B, X, Y} <= names or not names <= {A, B, X, Y, YP}:
            raise ShapeError(f"correlation axes must be A,B|X,Y[,Y'], got {tensor.names}")
        self.tensor = tensor

    @classmethod
    def from_function(cls, fn, a=2, b=2, x=2, y=2, yp: int | None = None, mode: str = RATIONAL) -> Correlation:
        axes = correlation_axes(a, b, x, y, yp)
        if yp is None:
            return cls(LabeledTensor.from_function(axes, lambda **k: fn(k[A], k[B], k[X], k[Y]), mode=mode))
        return cls(LabeledTensor.from_function(axes, lambda **k: fn(k[A], k[B], k[X], k[Y], k[YP]), mode=mode))

    @classmethod
    def uniform(cls, a=2, b=2, x=2, y=2, yp: int | None = None, mode: str = RATIONAL) -> Correlation:
        return cls(LabeledTensor.constant(correlation_axes(a, b, x, y, yp), Fraction(1, a * b), mode=mode))

    @property
    def mode(self) -> str:
        return self.tensor.mode

    def card(self, name: str) -> int:
        return self.tensor.card(name)

    def prob(self, a, b, x, y, yp=None):
        idx = {A: a, B: b, X: x, Y: y}
        if yp is not None:
            idx[YP] = yp
        return self.tensor[idx]

    def is_valid(self) -> bool:
        return is_box(self.tensor)

    def split_setting(self, card_y: int = 2, card_yp: int = 2) -> Correlation:
        """Turn a combined Bob setting index 2·y + y' into separate Y, Y' axes."""
        if self.tensor.has(YP):
            return self
        if self.card(Y) != card_y * card_yp:
            raise ShapeError(f"cannot split a setting of cardinality {self.card(Y)} into {card_y}x{card_yp}")
        t = self.tensor.transpose([A, B, X, Y])
        data = t.data.reshape(t.shape[:3] + (card_y, card_yp))
        axes = correlation_axes(t.card(A), t.card(B), t.card(X), card_y, card_yp)
        return Correlation(LabeledTensor(axes, data, signed=t.signed))

    def average_over(self, name: str) -> Correlation:
        """Uniformly average over an input (e.g. Y' to get P_{AB|XY})."""
        from .tensor_core import reduction
        d = self.card(name)
        t = reduction(self.tensor, [name]) / d
        return Correlation(t)

    def __eq__(self, other):
        return isinstance(other, Correlation) and self.tensor == other.tensor

    __hash__ = None

    def __add__(self, other):
        return Correlation((self.tensor + other.tensor).as_checked())

    def scale(self, c) -> Correlation:
        return Correlation(self.tensor.scale(c))

    def to_json(self) -> dict:
        return {"kind": "correlation", "tensor": self.tensor.to_json()}

    @classmethod
    def from_json(cls, obj) -> Correlation:
        if isinstance(obj, dict) and "tensor" in obj:
            obj = obj["tensor"]
        return cls(LabeledTensor.from_json(obj))

    def table(self) -> list[list]:
        """Rows (a, b); columns are the input tuples in lexicographic order."""
        t = self.tensor
        ins = [n for n in (X, Y, YP) if t.has(n)]
        cols = list(itertools.product(*[range(t.card(n)) for n in ins]))
        rows = []
        for a, b in itertools.product(range(t.card(A)), range(t.card(B))):
            rows.append([t[{A: a, B: b, **dict(zip(ins, c))}] for c in cols])
        return rows


def _require_bits(p: Correlation, names):
    for n in names:
        if not p.tensor.has(n) or p.card(n) != 2:
            raise ShapeError(f"axis {n} must be binary for this inequality")


def _weighted_sum(p: Correlation, pred, names, prefactor):
    t = p.tensor
    total = to_number(0, p.mode)
    for idx in itertools.product(*[range(t.card(n)) for n in names]):
        k = dict(zip(names, idx))
        if pred(**{n.replace("'", "p"): v for n, v in k.items()}):
            total += t[k]
    return total * to_number(prefactor, p.mode)


def gyni(p: Correlation):
    """¼ Σ δ_{A,Y} δ_{B,X} P. A three-input correlation is first averaged over Y'."""
    if p.tensor.has(YP):
        p = p.average_over(YP)
    _require_bits(p, [A, B, X, Y])
    return _weighted_sum(p, lambda A, B, X, Y: A == Y and B == X, [A, B, X, Y], Fraction(1, 4))


def lgyni(p: Correlation):
    """¼ Σ δ_{X(A⊕Y),0} δ_{Y(B⊕X),0} P."""
    _require_bits(p, [A, B, X, Y])
    if p.tensor.has(YP):
        raise ShapeError("LGYNI is defined on a two-input scenario")
    return _weighted_sum(p, lambda A, B, X, Y: X * (A ^ Y) == 0 and Y * (B ^ X) == 0, [A, B, X, Y], Fraction(1, 4))


def ocb(p: Correlation):
    """⅛ Σ δ_{(Y'⊕1)(A⊕Y),0} δ_{Y'(B⊕X),0} P over the scenario with Bob inputs Y, Y'."""
    if not p.tensor.has(YP):
        p = p.split_setting()
    _require_bits(p, [A, B, X, Y, YP])
    return _weighted_sum(p, lambda A, B, X, Y, Yp: (Yp ^ 1) * (A ^ Y) == 0 and Yp * (B ^ X) == 0,
                         [A, B, X, Y, YP], Fraction(1, 8))


INEQUALITIES = {"gyni": gyni, "lgyni": lgyni, "ocb": ocb}


def coefficient_tensor(which: str, setting_card_y: int | None = None) -> LabeledTensor:
    """V with ineq(P) = Σ V·P, as a tensor over A, B (inputs) and X, Y (outputs) ready to contract with P."""
    which = which.lower()
    if which == "ocb":
        def fn(a, b, x, yy):
            y, yp = divmod(yy, 2)
            return Fraction(1, 8) if (yp ^ 1) * (a ^ y) == 0 and yp * (b ^ x) == 0 else 0
        cy = 4
    elif which == "gyni":
        def fn(a, b, x, y):
            return Fraction(1, 4) if a == y and b == x else 0
        cy = 2
    elif which == "lgyni":
        def fn(a, b, x, y):
            return Fraction(1, 4) if x * (a ^ y) == 0 and y * (b ^ x) == 0 else 0
        cy = 2
    else:
        raise ShapeError(f"unknown inequality {which!r}")
    if setting_card_y is not None and setting_card_y != cy:
        raise ShapeError(f"{which} needs a Bob setting of cardinality {cy}, got {setting_card_y}")
    axes = (AxisSpec(A, 2, INPUT), AxisSpec(B, 2, INPUT), AxisSpec(X, 2, OUTPUT), AxisSpec(Y, cy, OUTPUT))
    return LabeledTensor.from_function(axes, lambda **k: fn(k[A], k[B], k[X], k[Y]))


def evaluate(which: str, p: Correlation):
    try:
        return INEQUALITIES[which.lower()](p)
    except KeyError:
        raise ShapeError(f"unknown inequality {which!r}") from None


def two_way_signaling_bound(d: int) -> Fraction:
    """GYNI ceiling 1 - 1/(2d) for boxworld processes with d = min(|O'_A|, |O'_B|)."""
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError("d must be a positive integer")
    return 1 - Fraction(1, 2 * int(d))


# signaling


NS = "NS"
A_TO_B_ONLY = "A->B only"
B_TO_A_ONLY = "B->A only"
TWO_WAY = "two-way"


@dataclass(frozen=True)
class SignalingProfile:
    kind: str
    a_to_b: object
    b_to_a: object

    def to_json(self) -> dict:
        conv = (lambda v: str(v) if isinstance(v, Fraction) else float(v))
        return {"kind": self.kind, "a_to_b": conv(self.a_to_b), "b_to_a": conv(self.b_to_a)}


def signaling_profile(p: Correlation) -> SignalingProfile:
    """Direction-wise marginal dependence. A->B means Bob's marginal depends on Alice's input."""
    t = p.tensor
    ab = signaling_residual(t, "A", "B")
    ba = signaling_residual(t, "B", "A")
    tol = (lambda r: r != 0) if p.mode == RATIONAL else (lambda r: float(r) > 1e-9)
    kind = {(False, False): NS, (True, False): A_TO_B_ONLY, (False, True): B_TO_A_ONLY, (True, True): TWO_WAY}[
        (tol(ab), tol(ba))]
    return SignalingProfile(kind, ab, ba)


# causal correlations


def one_way_vertices(order: str, a=2, b=2, x=2, y=2) -> list[Correlation]:
    """Deterministic correlations with no signaling against ``order``.

    ``"A<B"``: A = f(X), B = g(X, Y). ``"B<A"``: B = g(Y), A = f(X, Y).
    """
    out = []
    if order == "A<B":
        for f in itertools.product(range(a), repeat=x):
            for g in itertools.product(range(b), repeat=x * y):
                out.append(Correlation.from_function(
                    lambda aa, bb, xx, yy, f=f, g=g: int(aa == f[xx] and bb == g[xx * y + yy]), a, b, x, y))
    elif order == "B<A":
        for g in itertools.product(range(b), repeat=y):
            for f in itertools.product(range(a), repeat=x * y):
                out.append(Correlation.from_function(
                    lambda aa, bb, xx, yy, f=f, g=g: int(bb == g[yy] and aa == f[xx * y + yy]), a, b, x, y))
    else:
        raise ValueError(f"order must be 'A<B' or 'B<A', got {order!r}")
    return out


def causal_vertices(a=2, b=2, x=2, y=2) -> list[tuple[str, Correlation]]:
    """Deterministic one-way vertices, deduplicated; NS ones are listed once, under A<B."""
    seen = set()
    out = []
    for order in ("A<B", "B<A"):
        for v in one_way_vertices(order, a, b, x, y):
            key = tuple(v.tensor.transpose([A, B, X, Y]).data.reshape(-1))
            if key not in seen:
                seen.add(key)
                out.append((order, v))
    return out


def causal_decomposition(p: Correlation):
    """Weights over deterministic one-way vertices reproducing p, or None when p is not causal."""
    from .optimizer.lp import LinearProgram, solve

    if p.tensor.has(YP):
        raise ShapeError("causal membership is implemented for the A,B|X,Y scenario")
    dims = tuple(p.card(n) for n in (A, B, X, Y))
    if dims != (2, 2, 2, 2):
        raise ShapeError("causal membership is implemented for the all-bit scenario only")
    verts = causal_vertices(*dims)
    cols = [v.tensor.transpose([A, B, X, Y]).data.reshape(-1) for _, v in verts]
    target = p.tensor.transpose([A, B, X, Y]).data.reshape(-1)
    eq = [[c[i] for c in cols] for i in range(len(target))]
    lp = LinearProgram(objective=[0] * len(cols), eq_matrix=eq, eq_rhs=list(target))
    res = solve(lp, backend=p.mode)
    if res.status != "optimal":
        return None
    return [(verts[k][0], verts[k][1], wt) for k, wt in enumerate(res.x) if wt != 0]


def is_causal(p: Correlation) -> bool:
    return causal_decomposition(p) is not None


# reference bounds


@dataclass(frozen=True)
class Bound:
    causal: Fraction
    process_matrix: float
    process_matrix_note: str
    boxworld: Fraction
    boxworld_note: str


SQRT2 = math.sqrt(2)

BOUND_TABLE = {
    "gyni": Bound(Fraction(1, 2), 0.7592, "<= 0.7592 (may not be tight)", Fraction(3, 4), ">= 3/4"),
    "lgyni": Bound(Fraction(3, 4), 0.8194, "~ 0.8194", Fraction(11, 12), ">= 11/12"),
    "ocb": Bound(Fraction(3, 4), (2 + SQRT2) / 4, "= (2+sqrt2)/4", Fraction(1), "= 1"),
}
