"""Process tensors: validity, nonsignaling preservation, boxworld (NSWSE), causal order, Born rule."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm

import numpy as np

from .boxes import is_nonsignaling_box, ns_bit_vertices, signaling_residual
from .inequalities import Correlation, one_way_vertices
from .operations import (
    ALL_BIT,
    Instrument,
    OpDims,
    Report,
    Wires,
    component_output_signatures,
    deterministic_components,
)
from .tensor_core import (
    FLOAT,
    INPUT,
    OUTPUT,
    RATIONAL,
    AxisSpec,
    LabeledTensor,
    RrExpr,
    TensorError,
    apply_rr_expr,
    contract_all,
    kernel_projector,
    reduce_and_replace,
    reduction,
    rr,
    to_number,
    total_reduction,
)

A_BEFORE_B = "A<B"
B_BEFORE_A = "B<A"
NONSIGNALING = "nonsignaling"
NONE_OF_ORDERED = "none-of-ordered"

WA, WB = Wires("A"), Wires("B")


class ProcessError(TensorError):
    """Wrong axis layout, or an operation that needs a valid/boxworld process got something else."""


@dataclass(frozen=True)
class ProcessDims:
    """Wire cardinalities of both parties (outcome/setting sizes are ignored)."""

    a: OpDims = ALL_BIT
    b: OpDims = ALL_BIT

    def axes(self) -> tuple[AxisSpec, ...]:
        out = ()
        for w, d in ((WA, self.a), (WB, self.b)):
            out += (AxisSpec(w.ip, d.ip, OUTPUT), AxisSpec(w.o, d.o, OUTPUT),
                    AxisSpec(w.i, d.i, INPUT), AxisSpec(w.op, d.op, INPUT))
        return out

    def normalization(self) -> int:
        return self.a.i * self.a.op * self.b.i * self.b.op

    def output_size(self) -> int:
        return self.a.ip * self.a.o * self.b.ip * self.b.o

    def is_all_bit(self) -> bool:
        return all(c == 2 for d in (self.a, self.b) for c in (d.ip, d.i, d.o, d.op))

    @classmethod
    def uniform(cls, card: int) -> ProcessDims:
        d = OpDims(card, card, card, card)
        return cls(d, d)

    @classmethod
    def from_tensor(cls, t: LabeledTensor) -> ProcessDims:
        return cls(*(OpDims(t.card(w.ip), t.card(w.i), t.card(w.o), t.card(w.op)) for w in (WA, WB)))


ALL_BIT_PROCESS = ProcessDims()

WIRE_ROLES = {WA.ip: OUTPUT, WA.o: OUTPUT, WB.ip: OUTPUT, WB.o: OUTPUT,
              WA.i: INPUT, WA.op: INPUT, WB.i: INPUT, WB.op: INPUT}


class ProcessTensor:
    """W over the eight party wires, with memoized validator verdicts in ``class_tags``."""

    __slots__ = ("tensor", "class_tags")

    def __init__(self, tensor: LabeledTensor):
        got = {a.name: a.role for a in tensor.axes}
        if got != WIRE_ROLES:
            raise ProcessError(f"process axes must be {WIRE_ROLES}, got {got}")
        self.tensor = tensor
        self.class_tags: dict[str, object] = {}

    @property
    def dims(self) -> ProcessDims:
        return ProcessDims.from_tensor(self.tensor)

    @property
    def mode(self) -> str:
        return self.tensor.mode

    def __eq__(self, other):
        return isinstance(other, ProcessTensor) and self.tensor == other.tensor

    __hash__ = None

    def __repr__(self):
        return f"ProcessTensor(dims={self.dims})"

    def _memo(self, key, fn):
        if key not in self.class_tags:
            self.class_tags[key] = fn()
        return self.class_tags[key]

    def to_float(self) -> ProcessTensor:
        return ProcessTensor(self.tensor.to_float())

    def to_rational(self, max_denominator: int | None = None) -> ProcessTensor:
        return ProcessTensor(self.tensor.to_rational(max_denominator))

    def to_json(self) -> dict:
        return {"kind": "process", "wires": {"A": list(WA.all()), "B": list(WB.all())},
                "tensor": self.tensor.to_json(),
                "class_tags": {k: v for k, v in self.class_tags.items() if isinstance(v, (bool, str))}}

    @classmethod
    def from_json(cls, obj) -> ProcessTensor:
        if not isinstance(obj, dict) or "tensor" not in obj:
            raise ProcessError("process JSON needs a 'tensor' block")
        t = LabeledTensor.from_json(obj["tensor"], signed=True)
        if t.is_nonnegative():
            t = t.as_checked()
        return cls(t)


def _tensor(w) -> LabeledTensor:
    return w.tensor if isinstance(w, ProcessTensor) else w


def _as_process(w) -> ProcessTensor:
    return w if isinstance(w, ProcessTensor) else ProcessTensor(w)


def _zero(r, mode) -> bool:
    return r == 0 if mode == RATIONAL else float(r) <= 1e-9


ALICE = (WA.ip, WA.i, WA.o, WA.op)
BOB = (WB.ip, WB.i, WB.o, WB.op)


def bracket(w: Wires) -> RrExpr:
    """1 - O' + O O' - I O O' for one party."""
    return 1 - rr(w.op) + rr(w.o, w.op) - rr(w.i, w.o, w.op)


def process_constraints() -> dict[str, RrExpr]:
    """Linear nullity conditions of a valid process, each written as E(W) = 0."""
    return {
        "alice_block": rr(*ALICE) * bracket(WB),
        "bob_block": bracket(WA) * rr(*BOB),
        "joint": bracket(WA) * bracket(WB),
    }


def nsp_constraints() -> dict[str, RrExpr]:
    primes = (WA.op, WB.op, WA.ip, WB.ip)
    out = {}
    for me, other in ((WA, WB), (WB, WA)):
        p = me.party
        out[f"nsp_{p}_all_primes"] = rr(me.o, *primes) * (1 - rr(me.i))
        br = 1 - rr(me.op) + rr(me.op, me.ip) - rr(other.op, me.op, me.ip)
        out[f"nsp_{p}_bracket"] = rr(me.o) * br * (1 - rr(me.i))
    return out


def nswse_constraints() -> dict[str, RrExpr]:
    return {"nswse_A": rr(WA.o) * (1 - rr(WA.i)), "nswse_B": rr(WB.o) * (1 - rr(WB.i))}


def boxworld_constraints() -> dict[str, RrExpr]:
    """The simplified boxworld description used to build LPs."""
    return {
        "alice_signals_only_forward": rr(*ALICE) * (1 - rr(WB.op)),
        "bob_signals_only_forward": rr(*BOB) * (1 - rr(WA.op)),
        "no_joint_dependence": (1 - rr(WA.op)) * (1 - rr(WB.op)),
        "nswse_A": rr(WA.o) * (1 - rr(WA.i)),
        "nswse_B": rr(WB.o) * (1 - rr(WB.i)),
    }


def validate_process_tensor(w) -> Report:
    t = _tensor(w)
    p = _as_process(w)
    mode = t.mode
    rep = Report()
    data = t.data.reshape(-1)
    neg = -min(min(data), 0)
    rep.add("nonnegative", neg, _zero(neg, mode))
    target = to_number(p.dims.normalization(), mode)
    r = abs(total_reduction(t) - target)
    rep.add("normalization", r, _zero(r, mode))
    for name, e in process_constraints().items():
        r = apply_rr_expr(t, e).max_abs()
        rep.add(name, r, _zero(r, mode))
    marg = reduction(t, [WA.ip, WA.o, WB.ip, WB.o])
    r = max(abs(v - 1) for v in marg.data.reshape(-1))
    rep.add("conditional_distribution", r, _zero(r, mode))
    return rep


def is_valid_process(w) -> bool:
    p = _as_process(w)
    return p._memo("valid", lambda: validate_process_tensor(p).ok)


def _require_valid(w) -> ProcessTensor:
    p = _as_process(w)
    if not is_valid_process(p):
        raise ProcessError(f"invalid process tensor: {validate_process_tensor(p).failed}")
    return p


def _all_zero(t: LabeledTensor, exprs) -> bool:
    return all(apply_rr_expr(t, e).is_zero() for e in exprs)


def satisfies_nsp(w) -> bool:
    p = _require_valid(w)
    return p._memo("nsp", lambda: _all_zero(p.tensor, nsp_constraints().values()))


def is_boxworld_process(w) -> bool:
    p = _require_valid(w)
    return p._memo("boxworld", lambda: _all_zero(p.tensor, nswse_constraints().values()))


def class_report(w, kind: str = "process") -> Report:
    """Validity residuals plus, for ``nsp`` or ``boxworld``, the class constraints' residuals."""
    extra = {"process": {}, "nsp": nsp_constraints(), "boxworld": nswse_constraints()}[kind]
    rep = validate_process_tensor(w)
    t = _tensor(w)
    for name, e in extra.items():
        r = apply_rr_expr(t, e).max_abs()
        rep.add(name, r, _zero(r, t.mode))
    return rep


def satisfies_boxworld_description(w) -> bool:
    """Membership in the simplified boxworld description (includes normalization and positivity)."""
    t = _tensor(w)
    p = _as_process(w)
    ok_norm = total_reduction(t) == to_number(p.dims.normalization(), t.mode) if t.mode == RATIONAL else \
        abs(total_reduction(t) - p.dims.normalization()) <= 1e-9
    return t.is_nonnegative() and ok_norm and _all_zero(t, boxworld_constraints().values())


def _require_boxworld(w) -> ProcessTensor:
    p = _require_valid(w)
    if not is_boxworld_process(p):
        raise ProcessError("process is not a boxworld process")
    return p


def causal_class(w) -> str:
    p = _require_boxworld(w)

    def compute():
        t = p.tensor
        ab = (t - reduce_and_replace(t, [WB.op])).is_zero()
        ba = (t - reduce_and_replace(t, [WA.op])).is_zero()
        if ab and ba:
            return NONSIGNALING
        return A_BEFORE_B if ab else B_BEFORE_A if ba else NONE_OF_ORDERED

    return p._memo("causal_class", compute)


def is_ordered(w, order: str) -> bool:
    """W = _{O'_B}W for A<B, W = _{O'_A}W for B<A (no boxworld precondition)."""
    t = _tensor(w)
    axis = WB.op if order == A_BEFORE_B else WA.op
    return (t - reduce_and_replace(t, [axis])).is_zero()


@dataclass(frozen=True)
class CausalDecomposition:
    lam: Fraction
    w_ab: ProcessTensor
    w_ba: ProcessTensor
    pivot: str = WB.op

    def recombine(self) -> LabeledTensor:
        if self.pivot == WB.op:
            return self.w_ab.tensor.scale(self.lam) + self.w_ba.tensor.scale(1 - self.lam)
        return self.w_ba.tensor.scale(self.lam) + self.w_ab.tensor.scale(1 - self.lam)


def affine_decompose(w, pivot: str = "B") -> CausalDecomposition:
    """W = λ W^{A<B} + (1-λ) W^{B<A} with λ = d = |O'_B| (pivot "B"); pivot "A" mirrors the roles."""
    p = _require_boxworld(w)
    t = p.tensor
    first, second = (WB.op, WA.op) if pivot == "B" else (WA.op, WB.op)
    d = t.card(first)
    if d < 2:
        raise ProcessError(f"{first} has cardinality 1; the process is already causally ordered")
    both = reduce_and_replace(t, [WA.op, WB.op])
    lam = Fraction(d) if t.mode == RATIONAL else float(d)
    near = (both.scale(d - 1) + reduce_and_replace(t, [first])) / d
    far = (both.scale(d) - reduce_and_replace(t, [second])) / (d - 1)
    near = ProcessTensor(_clip_checked(near))
    far = ProcessTensor(_clip_checked(far))
    if pivot == "B":
        return CausalDecomposition(lam, near, far, WB.op)
    return CausalDecomposition(lam, far, near, WA.op)


def _clip_checked(t: LabeledTensor) -> LabeledTensor:
    if t.mode == FLOAT:
        data = np.where(np.abs(t.data) <= 1e-12, 0.0, t.data)
        return LabeledTensor(t.axes, data)
    return t.as_checked()


def born_rule(w, ta: Instrument, tb: Instrument) -> Correlation:
    """P_{AB|XY} = W * T^{A|X} * T^{B|Y}."""
    t = _tensor(w)
    if ta.party != "A" or tb.party != "B":
        raise ProcessError("born_rule expects Alice's instrument then Bob's")
    out = contract_all(t, ta.tensor, tb.tensor)
    return Correlation(out.transpose([ta.wires.outcome, tb.wires.outcome, ta.wires.setting, tb.wires.setting]))


# process factories


def uniform_process(dims: ProcessDims = ALL_BIT_PROCESS, mode: str = RATIONAL) -> ProcessTensor:
    return ProcessTensor(LabeledTensor.constant(dims.axes(), Fraction(1, dims.output_size()), mode=mode))


def embed_process(w, dims: ProcessDims) -> ProcessTensor:
    """Place a process with cardinality-1 wires into larger dims.

    New output wires (I', O) are fixed to 0 and new input wires (I, O') are ignored.
    """
    t = _tensor(w)
    out = t
    for ax in dims.axes():
        have = t.card(ax.name)
        if have == ax.cardinality:
            continue
        if have != 1:
            raise ProcessError(f"cannot embed {ax.name}: cardinality {have} -> {ax.cardinality}")
        out = out.fix(**{ax.name: 0})
        if ax.role == OUTPUT:
            col = LabeledTensor.from_function((ax,), lambda _n=ax.name, **k: int(k[_n] == 0), mode=t.mode)
        else:
            col = LabeledTensor.constant((ax,), 1, mode=t.mode)
        out = LabeledTensor(out.axes + col.axes, np.multiply.outer(out.data, col.data), signed=out.signed)
    return ProcessTensor(out.transpose([a.name for a in dims.axes()]))


def class_constraints(kind: str) -> list[RrExpr]:
    """Linear conditions of a process class: general, nsp or boxworld."""
    if kind not in ("general", "nsp", "boxworld"):
        raise ValueError(f"unknown process class {kind!r}")
    exprs = list(process_constraints().values())
    if kind in ("nsp", "boxworld"):
        exprs += list(nsp_constraints().values())
    if kind == "boxworld":
        exprs += list(nswse_constraints().values())
    return exprs


@lru_cache(maxsize=None)
def class_projector(kind: str, dims: ProcessDims) -> RrExpr:
    """Projector onto the linear directions of a process class."""
    return kernel_projector(class_constraints(kind), dims.axes(), include_constant=False)


def random_process(kind: str = "boxworld", dims: ProcessDims = ALL_BIT_PROCESS, seed=None,
                   max_int: int = 6) -> ProcessTensor:
    """Random exact process of the given class: uniform plus a scaled random kernel direction."""
    rng = np.random.default_rng(seed)
    axes = dims.axes()
    n = int(np.prod([a.cardinality for a in axes]))
    x = LabeledTensor.unchecked(axes, [Fraction(int(v)) for v in rng.integers(-max_int, max_int + 1, size=n)])
    direction = apply_rr_expr(x, class_projector(kind, dims))
    u = Fraction(1, dims.output_size())
    m = direction.max_abs()
    if m == 0:
        return uniform_process(dims)
    frac = Fraction(int(rng.integers(1, 11)), 10)
    eps = u / m * frac
    base = uniform_process(dims).tensor
    return ProcessTensor((base + direction.scale(eps)).as_checked())


def mix(weights, processes) -> ProcessTensor:
    acc = None
    for wt, p in zip(weights, processes):
        term = _tensor(p).scale(wt)
        acc = term if acc is None else acc + term
    return ProcessTensor(acc.as_checked())


# definitional oracles (all-bit)


def _integer_scaled(t: LabeledTensor) -> tuple[np.ndarray, int]:
    if t.mode != RATIONAL:
        raise ProcessError("exact oracles need a rational tensor")
    flat = t.data.reshape(-1)
    den = lcm(*[x.denominator for x in flat])
    ints = np.array([int(x * den) for x in flat], dtype=object).reshape(t.shape)
    return ints, den


def _ordered(t: LabeledTensor, names) -> LabeledTensor:
    return t.transpose(list(names))


def _require_all_bit(p: ProcessTensor):
    if not p.dims.is_all_bit():
        raise ProcessError("definitional oracles are implemented for all-bit processes only")


@lru_cache(maxsize=1)
def _bit_components():
    comps, _ = deterministic_components(ALL_BIT)
    return comps


@lru_cache(maxsize=1)
def _ns_operation_pairs() -> list[tuple[int, int]]:
    """Pairs of deterministic operations (index into the 64 outcome-free operations) that are
    definitionally nonsignaling: equal output boxes on every test input box."""
    ops = _bit_operations()
    comps = ops[:, None]
    sig = component_output_signatures(comps, ALL_BIT)
    pairs = []
    for i in range(len(ops)):
        for j in range(len(ops)):
            if i != j and np.array_equal(sig[i], sig[j]):
                pairs.append((i, j))
    return pairs


@lru_cache(maxsize=1)
def _bit_operations() -> np.ndarray:
    """All 64 deterministic all-bit operations T^x[i, o', i', o]."""
    ops = {}
    for arr in _bit_components().sum(axis=1):
        ops.setdefault(arr.tobytes(), arr)
    return np.stack(list(ops.values())).astype(np.int64)


def _marginal_dependence(wint: np.ndarray, me: Wires, other: Wires) -> bool:
    """True when some NS deterministic operation of ``me`` and some deterministic component of
    ``other`` make other's marginal depend on me's setting."""
    comps = _bit_components().astype(np.int64)  # [c, out, i, o', i', o]
    ops = _bit_operations()  # [k, i, o', i', o]
    # W is ordered (I'_A, O_A, I_A, O'_A, I'_B, O_B, I_B, O'_B)
    w = wint
    if me.party == "A":
        # contract Bob's component over his wires: W[.., i'B, oB, iB, o'B] * C[c, b, iB, o'B, i'B, oB]
        v = np.einsum("pqrsIOJK,cbJKIO->cbpqrs", w, comps)  # [c, b, i'A, oA, iA, o'A]
        m = np.einsum("cbpqrs,krspq->cbk", v, ops)
    else:
        v = np.einsum("IOJKpqrs,cbJKIO->cbpqrs", w, comps)
        m = np.einsum("cbpqrs,krspq->cbk", v, ops)
    for i, j in _ns_operation_pairs():
        if not np.array_equal(m[:, :, i], m[:, :, j]):
            return True
    return False


ORACLE_ORDER = (WA.ip, WA.o, WA.i, WA.op, WB.ip, WB.o, WB.i, WB.op)


def nswse_definitional_oracle(w) -> bool:
    """Every pair of deterministic nonsignaling instruments yields a nonsignaling correlation."""
    p = _as_process(w)
    _require_all_bit(p)
    wint, _ = _integer_scaled(_ordered(p.tensor, ORACLE_ORDER))
    wint = wint.astype(np.int64) if max(abs(int(v)) for v in wint.reshape(-1)) < 2 ** 40 else wint
    return not _marginal_dependence(wint, WA, WB) and not _marginal_dependence(wint, WB, WA)


def nsp_definitional_oracle(w) -> bool:
    """Contracting with each of the 24 NS-bit vertices on (O'_A, O'_B | I'_A, I'_B) gives an NS box."""
    p = _as_process(w)
    _require_all_bit(p)
    for v in ns_bit_vertices(outs=(WA.op, WB.op), ins=(WA.ip, WB.ip)):
        out = contract_all(p.tensor, v.tensor)
        if not is_nonsignaling_box(out):
            return False
    return True


def nsp_directional_oracle(w) -> bool:
    """Per direction: boxes on (O'_A, O'_B | I'_A, I'_B) without signaling towards one party are mapped to
    boxes without signaling towards that party. Tested on the deterministic one-way vertices."""
    p = _as_process(w)
    _require_all_bit(p)
    names = {"A": WA.op, "B": WB.op, "X": WA.ip, "Y": WB.ip}
    for order, src, dst in (("A<B", "B", "A"), ("B<A", "A", "B")):
        for v in one_way_vertices(order):
            out = contract_all(p.tensor, v.tensor.rename(names))
            if signaling_residual(out, src, dst) != 0:
                return False
    return True


def deterministic_instrument_pairs_count() -> int:
    return len(_ns_operation_pairs())
