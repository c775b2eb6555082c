"""Local operations (instruments): characterization, parametrization, classification, enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .boxes import is_nonsignaling_box, ns_bit_vertices
from .tensor_core import (
    INPUT,
    OUTPUT,
    RATIONAL,
    AxisSpec,
    LabeledTensor,
    RrExpr,
    TensorError,
    apply_rr_expr,
    contract,
    reduction,
    rr,
    to_number,
)

OUTCOME_NAME = {"A": "A", "B": "B"}
SETTING_NAME = {"A": "X", "B": "Y"}

TRIVIAL = "trivial"
NONTRIVIAL = "nontrivial"
SIGNALING = "signaling"

DEFAULT_ENUM_CAP = 2 ** 20


class InstrumentError(TensorError):
    """Instrument with the wrong axis layout or an invalid instrument where a valid one is required."""


@dataclass(frozen=True)
class Wires:
    """The four wire names of one party: I, O' (operation outputs) and I', O (operation inputs)."""

    party: str

    @property
    def i(self) -> str:
        return f"I_{self.party}"

    @property
    def op(self) -> str:
        return f"O'_{self.party}"

    @property
    def ip(self) -> str:
        return f"I'_{self.party}"

    @property
    def o(self) -> str:
        return f"O_{self.party}"

    @property
    def outcome(self) -> str:
        return OUTCOME_NAME.get(self.party, f"A_{self.party}")

    @property
    def setting(self) -> str:
        return SETTING_NAME.get(self.party, f"X_{self.party}")

    def all(self) -> tuple[str, str, str, str]:
        return (self.i, self.op, self.ip, self.o)


@dataclass(frozen=True)
class OpDims:
    """Cardinalities of one party: d_{I'}, d_I, d_O, d_{O'}, outcomes and settings."""

    ip: int = 2
    i: int = 2
    o: int = 2
    op: int = 2
    a: int = 2
    x: int = 2

    def wire_axes(self, party: str) -> tuple[AxisSpec, ...]:
        w = Wires(party)
        return (AxisSpec(w.i, self.i, OUTPUT), AxisSpec(w.op, self.op, OUTPUT),
                AxisSpec(w.ip, self.ip, INPUT), AxisSpec(w.o, self.o, INPUT))

    def axes(self, party: str) -> tuple[AxisSpec, ...]:
        w = Wires(party)
        return (AxisSpec(w.outcome, self.a, OUTPUT), AxisSpec(w.setting, self.x, INPUT)) + self.wire_axes(party)

    def components_per_setting(self) -> int:
        return self.i ** self.ip * self.op ** (self.ip * self.o) * self.a ** (self.ip * self.o)


ALL_BIT = OpDims()


@dataclass
class Report:
    """Constraint-by-constraint outcome of a validator: name -> max residual."""

    residuals: dict = field(default_factory=dict)
    failed: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed

    def add(self, name: str, residual, passed: bool):
        self.residuals[name] = residual
        if not passed:
            self.failed.append(name)

    def to_json(self) -> dict:
        return {"valid": self.ok, "failed": list(self.failed),
                "residuals": {k: str(v) if isinstance(v, Fraction) else float(v) for k, v in self.residuals.items()}}


def _zero(r, mode) -> bool:
    return r == 0 if mode == RATIONAL else float(r) <= 1e-9


class Instrument:
    """T^{A|X}: one tensor over the outcome axis, the setting axis and the four party wires."""

    __slots__ = ("party", "tensor")

    def __init__(self, party: str, tensor: LabeledTensor):
        w = Wires(party)
        expected = {w.outcome: OUTPUT, w.setting: INPUT, w.i: OUTPUT, w.op: OUTPUT, w.ip: INPUT, w.o: INPUT}
        got = {a.name: a.role for a in tensor.axes}
        if got != expected:
            raise InstrumentError(f"instrument axes must be {expected}, got {got}")
        self.party = party
        self.tensor = tensor

    @property
    def wires(self) -> Wires:
        return Wires(self.party)

    @property
    def outcome_axis(self) -> AxisSpec:
        return self.tensor.axis(self.wires.outcome)

    @property
    def setting_axis(self) -> AxisSpec:
        return self.tensor.axis(self.wires.setting)

    @property
    def mode(self) -> str:
        return self.tensor.mode

    @property
    def dims(self) -> OpDims:
        w, t = self.wires, self.tensor
        return OpDims(t.card(w.ip), t.card(w.i), t.card(w.o), t.card(w.op), t.card(w.outcome), t.card(w.setting))

    def element(self, a: int, x: int) -> LabeledTensor:
        return self.tensor.fix(**{self.wires.outcome: a, self.wires.setting: x})

    def summed(self) -> LabeledTensor:
        """T^X = Σ_A T^{A|X}, still carrying the setting axis."""
        return reduction(self.tensor, [self.wires.outcome])

    def setting_slice(self, x: int) -> LabeledTensor:
        return self.summed().fix(**{self.wires.setting: x})

    def relabel_party(self, party: str) -> Instrument:
        old, new = self.wires, Wires(party)
        mapping = dict(zip(old.all() + (old.outcome, old.setting), new.all() + (new.outcome, new.setting)))
        return Instrument(party, self.tensor.rename(mapping))

    def to_float(self) -> Instrument:
        return Instrument(self.party, self.tensor.to_float())

    def to_rational(self, max_denominator: int | None = None) -> Instrument:
        return Instrument(self.party, self.tensor.to_rational(max_denominator))

    def __eq__(self, other):
        return isinstance(other, Instrument) and self.party == other.party and self.tensor == other.tensor

    __hash__ = None

    def __repr__(self):
        return f"Instrument(party={self.party!r}, dims={self.dims})"

    def to_json(self) -> dict:
        w = self.wires
        elements = {str(a): self.tensor.fix(**{w.outcome: a}).to_json() for a in range(self.outcome_axis.cardinality)}
        return {"kind": "instrument", "party": self.party, "outcome_axis": self.outcome_axis.to_json(),
                "setting_axis": self.setting_axis.to_json(), "elements": elements}

    @classmethod
    def from_json(cls, obj) -> Instrument:
        try:
            party = obj["party"]
            out = obj["outcome_axis"]
            outcome = AxisSpec(out["name"], int(out["cardinality"]), OUTPUT)
            parts = [LabeledTensor.from_json(obj["elements"][str(a)], signed=True) for a in range(outcome.cardinality)]
        except (KeyError, TypeError) as exc:
            raise InstrumentError(f"malformed instrument JSON: {exc}") from exc
        names = parts[0].names
        data = np.stack([p.transpose(names).data for p in parts])
        tensor = LabeledTensor((outcome,) + parts[0].axes, data, signed=True)
        if tensor.is_nonnegative():
            tensor = tensor.as_checked()
        return cls(party, tensor)


def operation_constraints(w: Wires) -> dict[str, RrExpr]:
    """The reduce-and-replace identities of T^X written as E(T^X) = 0."""
    return {
        "pre_processing": rr(w.i, w.op) - rr(w.ip, w.i, w.o, w.op),
        "post_processing": rr(w.op) - rr(w.o, w.op),
    }


def operation_projector(w: Wires) -> RrExpr:
    """P̃_T = 1 - O' + O O' - I O O' + I' I O O'."""
    return 1 - rr(w.op) + rr(w.o, w.op) - rr(w.i, w.o, w.op) + rr(w.ip, w.i, w.o, w.op)


def validate_instrument(t: Instrument) -> Report:
    if not isinstance(t, Instrument):
        raise InstrumentError("validate_instrument expects an Instrument")
    w, mode = t.wires, t.mode
    rep = Report()
    data = t.tensor.data.reshape(-1)
    neg = -min(min(data), 0) if data.size else 0
    rep.add("nonnegative", neg, _zero(neg, mode))
    tx = t.summed()
    norm = reduction(tx, [w.i, w.op, w.ip, w.o])
    target = to_number(t.dims.ip * t.dims.o, mode)
    res = max(abs(v - target) for v in norm.data.reshape(-1))
    rep.add("normalization", res, _zero(res, mode))
    for name, e in operation_constraints(w).items():
        r = apply_rr_expr(tx, e).max_abs()
        rep.add(name, r, _zero(r, mode))
    return rep


def is_valid_instrument(t: Instrument) -> bool:
    return validate_instrument(t).ok


def project_to_operation_subspace(t: LabeledTensor, party: str = "A") -> LabeledTensor:
    return apply_rr_expr(t, operation_projector(Wires(party)))


def parametrize_operation(x: LabeledTensor, party: str = "A") -> LabeledTensor:
    """T^X = 1/(d_I d_{O'}) + X - _{O'}X + _{OO'}X - _{IOO'}X."""
    w = Wires(party)
    e = 1 - rr(w.op) + rr(w.o, w.op) - rr(w.i, w.o, w.op)
    d = x.card(w.i) * x.card(w.op)
    const = LabeledTensor.constant(x.axes, Fraction(1, d), mode=x.mode)
    return const + apply_rr_expr(x, e)


# deterministic instruments


@dataclass(frozen=True)
class DeterministicDecomposition:
    """Σ_λ π_λ D^λ_{I|I'X} D^λ_{O'|I'OX} D^λ_{A|I'OX}.

    Each component is a triple of integer tables f[i', x], g[i', o, x], h[i', o, x].
    """

    dims: OpDims
    weights: tuple
    components: tuple

    def __post_init__(self):
        if len(self.weights) != len(self.components):
            raise InstrumentError("one weight per component")
        if any(wt < 0 for wt in self.weights):
            raise InstrumentError("negative weight in a deterministic decomposition")


def _component_tensor(dims: OpDims, f, g, h) -> np.ndarray:
    """0/1 array indexed [a, x, i, o', i', o]."""
    arr = np.zeros((dims.a, dims.x, dims.i, dims.op, dims.ip, dims.o), dtype=np.int64)
    for x in range(dims.x):
        for ip in range(dims.ip):
            for o in range(dims.o):
                arr[h[ip][o][x], x, f[ip][x], g[ip][o][x], ip, o] = 1
    return arr


def from_decomposition(d: DeterministicDecomposition, party: str = "A", mode: str = RATIONAL) -> Instrument:
    dims = d.dims
    total = sum(to_number(wt, mode) for wt in d.weights)
    if (total != 1) if mode == RATIONAL else abs(total - 1) > 1e-9:
        raise InstrumentError(f"weights sum to {total}, expected 1")
    acc = None
    for wt, (f, g, h) in zip(d.weights, d.components):
        comp = _component_tensor(dims, f, g, h).astype(object if mode == RATIONAL else float)
        term = comp * to_number(wt, mode)
        acc = term if acc is None else acc + term
    return Instrument(party, LabeledTensor(dims.axes(party), acc, mode=mode))


def deterministic_instrument(dims: OpDims, f, g, h, party: str = "A", mode: str = RATIONAL) -> Instrument:
    return from_decomposition(DeterministicDecomposition(dims, (1,), ((f, g, h),)), party, mode)


def _tables(dims: OpDims, fi, gi, hi):
    """Decode per-setting component indices into f[i'], g[i'][o], h[i'][o]."""
    f = np.unravel_index(fi, (dims.i,) * dims.ip) if dims.ip else ()
    g = np.unravel_index(gi, (dims.op,) * (dims.ip * dims.o))
    h = np.unravel_index(hi, (dims.a,) * (dims.ip * dims.o))
    f = [int(f[k]) for k in range(dims.ip)]
    g = [[int(g[k * dims.o + o]) for o in range(dims.o)] for k in range(dims.ip)]
    h = [[int(h[k * dims.o + o]) for o in range(dims.o)] for k in range(dims.ip)]
    return f, g, h


def deterministic_components(dims: OpDims) -> tuple[np.ndarray, list]:
    """All per-setting deterministic components.

    Returns an int8 array indexed [c, a, i, o', i', o] and the matching
    (f, g, h) tables, deduplicated by tensor equality.
    """
    nf = dims.i ** dims.ip
    ng = dims.op ** (dims.ip * dims.o)
    nh = dims.a ** (dims.ip * dims.o)
    one = OpDims(dims.ip, dims.i, dims.o, dims.op, dims.a, 1)
    seen = {}
    arrays, tables = [], []
    for fi, gi, hi in itertools.product(range(nf), range(ng), range(nh)):
        f, g, h = _tables(dims, fi, gi, hi)
        tab = ([[v] for v in f], [[[v] for v in row] for row in g], [[[v] for v in row] for row in h])
        arr = _component_tensor(one, *tab)[:, 0].astype(np.int8)
        key = arr.tobytes()
        if key in seen:
            continue
        seen[key] = len(arrays)
        arrays.append(arr)
        tables.append((f, g, h))
    return np.stack(arrays), tables


def instrument_from_components(dims: OpDims, comps: np.ndarray, indices: Sequence[int], party: str = "A",
                               mode: str = RATIONAL) -> Instrument:
    """Assemble a deterministic instrument from one per-setting component index per setting value."""
    arr = np.stack([comps[c] for c in indices], axis=1).astype(object if mode == RATIONAL else float)
    if mode == RATIONAL:
        arr = np.vectorize(Fraction, otypes=[object])(arr)
    return Instrument(party, LabeledTensor(dims.axes(party), arr, mode=mode))


def count_deterministic_instruments(dims: OpDims) -> int:
    return dims.components_per_setting() ** dims.x


def enumerate_deterministic_instruments(dims: OpDims, party: str = "A", cap: int = DEFAULT_ENUM_CAP,
                                        mode: str = RATIONAL) -> Iterator[Instrument]:
    count = count_deterministic_instruments(dims)
    if count > cap:
        raise InstrumentError(f"{count} deterministic instruments exceed the cap of {cap}")
    comps, _ = deterministic_components(dims)
    for idx in itertools.product(range(len(comps)), repeat=dims.x):
        yield instrument_from_components(dims, comps, idx, party, mode)


def embed_instrument(t: Instrument, dims: OpDims) -> Instrument:
    """Place an instrument with cardinality-1 wires into larger wire dims.

    New output wires (I, O') are fixed to 0 and new input wires (I', O) are ignored.
    """
    out = t.tensor
    for ax in dims.wire_axes(t.party):
        have = out.card(ax.name)
        if have == ax.cardinality:
            continue
        if have != 1:
            raise InstrumentError(f"cannot embed {ax.name}: cardinality {have} -> {ax.cardinality}")
        out = out.fix(**{ax.name: 0})
        if ax.role == OUTPUT:
            col = LabeledTensor.from_function((ax,), lambda _n=ax.name, **k: int(k[_n] == 0), mode=out.mode)
        else:
            col = LabeledTensor.constant((ax,), 1, mode=out.mode)
        out = LabeledTensor(out.axes + col.axes, np.multiply.outer(out.data, col.data))
    return Instrument(t.party, out.transpose([a.name for a in t.dims.axes(t.party)]))


def random_instrument(dims: OpDims, seed=None, party: str = "A", n_components: int = 4,
                      mode: str = RATIONAL) -> Instrument:
    """Random convex mixture of deterministic instruments with integer-derived rational weights."""
    rng = np.random.default_rng(seed)
    comps = []
    for _ in range(n_components):
        f = [[int(rng.integers(dims.i)) for _ in range(dims.x)] for _ in range(dims.ip)]
        g = [[[int(rng.integers(dims.op)) for _ in range(dims.x)] for _ in range(dims.o)] for _ in range(dims.ip)]
        h = [[[int(rng.integers(dims.a)) for _ in range(dims.x)] for _ in range(dims.o)] for _ in range(dims.ip)]
        comps.append((f, g, h))
    raw = [int(v) for v in rng.integers(1, 20, size=n_components)]
    weights = tuple(Fraction(v, sum(raw)) for v in raw)
    return from_decomposition(DeterministicDecomposition(dims, weights, tuple(comps)), party, mode)


def random_deterministic_instrument(dims: OpDims, seed=None, party: str = "A", mode: str = RATIONAL) -> Instrument:
    return random_instrument(dims, seed, party, n_components=1, mode=mode)


# nonsignaling classification


def is_nonsignaling_instrument(t: Instrument) -> str:
    """Classify as trivial (T^X the same for all X), nontrivial or signaling.

    Nonsignaling means every difference D = T^X - T^X' does not depend on O and vanishes under
    reduce-and-replace over I. With trivial I' this is the split into X-independent operations and
    operations whose O' ignores O and X; otherwise the split may differ between values of I'.
    """
    rep = validate_instrument(t)
    if not rep.ok:
        raise InstrumentError(f"invalid instrument, failed constraints {rep.failed}")
    w = t.wires
    slices = [t.setting_slice(x) for x in range(t.setting_axis.cardinality)]
    if all(s == slices[0] for s in slices[1:]):
        return TRIVIAL
    diffs = [s - slices[0] for s in slices[1:]]
    ok = all(apply_rr_expr(d, rr(w.i)).is_zero() and (apply_rr_expr(d, rr(w.o)) - d).is_zero() for d in diffs)
    return NONTRIVIAL if ok else SIGNALING


def _single_party_input_boxes(dims: OpDims, party: str) -> list[LabeledTensor]:
    w = Wires(party)
    axes = (AxisSpec(w.o, dims.o, OUTPUT), AxisSpec(w.i, dims.i, INPUT))
    boxes = []
    for fn in itertools.product(range(dims.o), repeat=dims.i):
        boxes.append(LabeledTensor.from_function(axes, lambda fn=fn, **k: int(k[w.o] == fn[k[w.i]])))
    return boxes


def _wing_input_boxes(party: str) -> list[LabeledTensor]:
    w = Wires(party)
    return [v.tensor for v in ns_bit_vertices(outs=(w.o, "O_w"), ins=(w.i, "I_w"))]


def definitional_input_boxes(dims: OpDims, party: str = "A") -> list[LabeledTensor]:
    """Deterministic single-party boxes, plus one wing of every NS-bit vertex when the wires are bits."""
    boxes = _single_party_input_boxes(dims, party)
    if dims.i == 2 and dims.o == 2:
        boxes += _wing_input_boxes(party)
    return boxes


def output_boxes(t: Instrument, box: LabeledTensor) -> list[LabeledTensor]:
    """T^x * P for every setting value x."""
    return [contract(t.setting_slice(x), box) for x in range(t.setting_axis.cardinality)]


def signals_definitionally(t: Instrument) -> bool:
    """True when some input box yields an output box depending on the setting."""
    for box in definitional_input_boxes(t.dims, t.party):
        outs = output_boxes(t, box)
        if any(o != outs[0] for o in outs[1:]):
            return True
    return False


def preserves_nonsignaling(t: Instrument) -> bool:
    """Applying every setting slice to one wing of every NS-bit vertex gives an NS box."""
    for box in _wing_input_boxes(t.party):
        for out in output_boxes(t, box):
            if not is_nonsignaling_box(out):
                return False
    return True


# array-level helpers for exhaustive all-setting checks over per-setting components


def component_operations(comps: np.ndarray) -> np.ndarray:
    """Sum over the outcome: the deterministic operation T^x of each component, [c, i, o', i', o]."""
    return comps.sum(axis=1)


def component_pair_classes(comps: np.ndarray) -> np.ndarray:
    """Classification codes (0 trivial, 1 nontrivial, 2 signaling) for every two-setting pair (c0, c1)."""
    ops = component_operations(comps).astype(np.int64)
    n = len(ops)
    flat = ops.reshape(n, -1)
    d_o = ops.shape[4]
    # the difference of two operations is nonsignaling iff both have equal sums over I and equal
    # O-dependent parts d_O T - sum_O T (kept in integers)
    pre = ops.sum(axis=1).reshape(n, -1)
    dep = (ops * d_o - ops.sum(axis=4, keepdims=True)).reshape(n, -1)
    key = np.unique(np.concatenate([pre, dep], axis=1), axis=0, return_inverse=True)[1].reshape(-1)
    same = np.unique(flat, axis=0, return_inverse=True)[1].reshape(-1)
    codes = np.full((n, n), 2, dtype=np.int8)
    codes[key[:, None] == key[None, :]] = 1
    codes[same[:, None] == same[None, :]] = 0
    return codes


def component_output_signatures(comps: np.ndarray, dims: OpDims, party: str = "A") -> np.ndarray:
    """Flattened output boxes of each component's operation on every definitional input box."""
    ops = component_operations(comps).astype(np.int64)
    sigs = []
    for box in definitional_input_boxes(dims, party):
        w = Wires(party)
        # scale by 2 so PR entries stay integral
        b = box.data * 2
        b = np.array(b.astype(float) if b.dtype == object else b, dtype=np.int64)
        names = list(box.names)
        o_ax, i_ax = names.index(w.o), names.index(w.i)
        out = np.tensordot(ops, b, axes=([1, 4], [i_ax, o_ax]))
        sigs.append(out.reshape(len(ops), -1))
    return np.concatenate(sigs, axis=1)
