"""Boxes (conditional distributions), nonsignaling tests and the all-bit NS vertex catalog."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .tensor_core import (
    INPUT,
    OUTPUT,
    RATIONAL,
    AxisSpec,
    LabeledTensor,
    TensorError,
    party_of,
    reduce_and_replace,
    reduction,
)


class UnsupportedError(TensorError):
    """Requested scenario is outside what the routine supports."""


def _io(t: LabeledTensor) -> tuple[list[str], list[str]]:
    outs = [a.name for a in t.axes if a.role == OUTPUT]
    ins = [a.name for a in t.axes if a.role == INPUT]
    return outs, ins


def _parties(t: LabeledTensor) -> dict[str, dict[str, list[str]]]:
    groups: dict[str, dict[str, list[str]]] = {}
    for a in t.axes:
        g = groups.setdefault(party_of(a.name), {OUTPUT: [], INPUT: []})
        g[a.role].append(a.name)
    return groups


def _zero(t: LabeledTensor, tol: float | None) -> bool:
    return t.is_zero(tol)


def is_box(t: LabeledTensor, tol: float | None = None) -> bool:
    """Nonnegative and normalized over outputs for every fixing of the inputs."""
    outs, ins = _io(t)
    if not outs:
        raise TensorError("a box needs at least one output axis")
    if not t.is_nonnegative():
        return False
    marg = reduction(t, outs)
    one = LabeledTensor.constant(marg.axes, 1, mode=t.mode)
    return _zero(marg - one, tol)


def signaling_residual(t: LabeledTensor, src: str, dst: str):
    """Max dependence of party ``dst``'s marginal on party ``src``'s inputs."""
    groups = _parties(t)
    if src not in groups or dst not in groups:
        raise TensorError(f"unknown party in {src!r}->{dst!r}; parties: {sorted(groups)}")
    others = [n for p, g in groups.items() if p != dst for n in g[OUTPUT]]
    marg = reduction(t, others)
    src_in = [n for n in groups[src][INPUT] if marg.has(n)]
    if not src_in:
        return 0
    return (marg - reduce_and_replace(marg, src_in)).max_abs()


def signals(t: LabeledTensor, src: str, dst: str, tol: float | None = None) -> bool:
    r = signaling_residual(t, src, dst)
    if t.mode == RATIONAL and tol is None:
        return r != 0
    return float(r) > (1e-9 if tol is None else tol)


def _two_parties(t: LabeledTensor) -> tuple[str, str]:
    parties = sorted(p for p, g in _parties(t).items() if g[OUTPUT] or g[INPUT])
    if len(parties) != 2:
        raise TensorError(f"expected a two-party layout, found parties {parties}")
    return parties[0], parties[1]


def is_nonsignaling_box(t: LabeledTensor, tol: float | None = None) -> bool:
    a, b = _two_parties(t)
    return is_box(t, tol) and not signals(t, a, b, tol) and not signals(t, b, a, tol)


def is_no_signaling_from(t: LabeledTensor, src: str, dst: str, tol: float | None = None) -> bool:
    return is_box(t, tol) and not signals(t, src, dst, tol)


@dataclass(frozen=True)
class Box:
    tensor: LabeledTensor

    def __post_init__(self):
        if not is_box(self.tensor):
            raise TensorError("not a box: negative entry or unnormalized output distribution")


@dataclass(frozen=True)
class NsBox:
    box: Box

    def __post_init__(self):
        if not is_nonsignaling_box(self.box.tensor):
            raise TensorError("box is signaling")

    @property
    def tensor(self) -> LabeledTensor:
        return self.box.tensor


def bit_axes(outs: Sequence[str] = ("O_A", "O_B"), ins: Sequence[str] = ("I_A", "I_B"),
             out_card: int = 2, in_card: int = 2) -> tuple[AxisSpec, ...]:
    return (AxisSpec(outs[0], out_card, OUTPUT), AxisSpec(outs[1], out_card, OUTPUT),
            AxisSpec(ins[0], in_card, INPUT), AxisSpec(ins[1], in_card, INPUT))


def _box_from(fn, outs, ins, mode=RATIONAL) -> LabeledTensor:
    axes = bit_axes(outs, ins)
    oa, ob, ia, ib = (a.name for a in axes)
    return LabeledTensor.from_function(axes, lambda **k: fn(k[oa], k[ob], k[ia], k[ib]), mode=mode)


def pr_box(outs: Sequence[str] = ("O_A", "O_B"), ins: Sequence[str] = ("I_A", "I_B"),
           alpha: int = 0, beta: int = 0, gamma: int = 0) -> NsBox:
    """½·δ_{o_A⊕o_B, i_A i_B ⊕ α i_A ⊕ β i_B ⊕ γ}; the defaults give the standard PR box."""
    half = Fraction(1, 2)

    def fn(oa, ob, ia, ib):
        return half if (oa ^ ob) == ((ia & ib) ^ (alpha & ia) ^ (beta & ib) ^ gamma) else 0

    return NsBox(Box(_box_from(fn, outs, ins)))


def deterministic_box(fa, fb, outs=("O_A", "O_B"), ins=("I_A", "I_B")) -> LabeledTensor:
    """δ_{o_A, fa(i_A)} δ_{o_B, fb(i_B)} for bit functions given as 2-tuples."""
    return _box_from(lambda oa, ob, ia, ib: int(oa == fa[ia] and ob == fb[ib]), outs, ins)


def ns_bit_vertices(outs: Sequence[str] = ("O_A", "O_B"), ins: Sequence[str] = ("I_A", "I_B"),
                    out_card: int = 2, in_card: int = 2) -> list[NsBox]:
    """The 24 vertices of the two-input two-output bipartite NS polytope."""
    if out_card != 2 or in_card != 2:
        raise UnsupportedError("the hardcoded NS vertex list covers the all-bit scenario only")
    funcs = list(itertools.product(range(2), repeat=2))
    verts = [NsBox(Box(deterministic_box(fa, fb, outs, ins))) for fa in funcs for fb in funcs]
    for alpha, beta, gamma in itertools.product(range(2), repeat=3):
        verts.append(pr_box(outs, ins, alpha, beta, gamma))
    return verts


def uniform_box(axes: Sequence[AxisSpec], mode: str = RATIONAL) -> LabeledTensor:
    n = 1
    for a in axes:
        if a.role == OUTPUT:
            n *= a.cardinality
    return LabeledTensor.constant(axes, Fraction(1, n), mode=mode)
