"""Labeled tensors over named finite random variables and the reduce-and-replace calculus."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

INPUT = "input"
OUTPUT = "output"
ROLES = (INPUT, OUTPUT)

RATIONAL = "rational"
FLOAT = "float"
FLOAT_TOL = 1e-9


class TensorError(ValueError):
    """Malformed axes, unknown names or incompatible layouts."""


class DimensionError(TensorError):
    """Shared axis with mismatched cardinality."""


@dataclass(frozen=True, order=True)
class AxisSpec:
    name: str
    cardinality: int
    role: str = OUTPUT

    def __post_init__(self):
        if not isinstance(self.cardinality, (int, np.integer)) or self.cardinality < 1:
            raise TensorError(f"axis {self.name!r}: cardinality must be a positive integer")
        if self.role not in ROLES:
            raise TensorError(f"axis {self.name!r}: role must be one of {ROLES}")

    def flipped(self) -> AxisSpec:
        return AxisSpec(self.name, self.cardinality, INPUT if self.role == OUTPUT else OUTPUT)

    def to_json(self) -> dict:
        return {"name": self.name, "cardinality": int(self.cardinality), "role": self.role}


_PARTY_OF = {"A": "A", "X": "A", "B": "B", "Y": "B", "Y'": "B"}


def party_of(name: str) -> str:
    if name in _PARTY_OF:
        return _PARTY_OF[name]
    if "_" in name:
        return name.rsplit("_", 1)[1]
    return ""


def canonical_key(axis: AxisSpec):
    return (party_of(axis.name), axis.role, axis.name)


def to_number(x, mode: str = RATIONAL):
    if mode == FLOAT:
        return float(Fraction(x)) if isinstance(x, str) else float(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(x)


def _as_array(data, shape, mode):
    arr = np.asarray(data, dtype=object if mode == RATIONAL else float)
    if arr.size != int(np.prod(shape, dtype=np.int64)):
        raise TensorError(f"data has {arr.size} entries, axes require {int(np.prod(shape))}")
    arr = arr.reshape(shape)
    if mode == RATIONAL:
        arr = np.vectorize(to_number, otypes=[object])(arr) if arr.size else arr
    return arr


def _mode_of(arr: np.ndarray) -> str:
    return RATIONAL if arr.dtype == object else FLOAT


class LabeledTensor:
    """Dense tensor whose axes carry a name, a cardinality and an input/output role.

    The default constructor rejects negative entries. ``LabeledTensor.unchecked``
    builds signed intermediates such as projector residuals.
    """

    __slots__ = ("axes", "data", "signed")

    def __init__(self, axes: Sequence[AxisSpec], data, *, mode: str | None = None, signed: bool = False):
        axes = tuple(axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise TensorError(f"duplicate axis names in {names}")
        shape = tuple(a.cardinality for a in axes)
        if isinstance(data, np.ndarray) and mode is None:
            mode = _mode_of(data)
        arr = _as_array(data, shape, mode or RATIONAL)
        arr.flags.writeable = False
        self.axes = axes
        self.data = arr
        self.signed = signed
        if not signed and arr.size and _min(arr) < (-FLOAT_TOL if arr.dtype != object else 0):
            raise TensorError("negative entry in a nonnegative tensor")

    @classmethod
    def unchecked(cls, axes, data, *, mode: str | None = None) -> LabeledTensor:
        return cls(axes, data, mode=mode, signed=True)

    @classmethod
    def from_function(cls, axes: Sequence[AxisSpec], fn: Callable[..., object], *,
                      mode: str = RATIONAL, signed: bool = False) -> LabeledTensor:
        """Tabulate ``fn(**indices)`` over all index tuples (keyword names are axis names)."""
        axes = tuple(axes)
        shape = tuple(a.cardinality for a in axes)
        names = [a.name for a in axes]
        flat = [to_number(fn(**dict(zip(names, idx))), mode) for idx in itertools.product(*map(range, shape))]
        return cls(axes, flat, mode=mode, signed=signed)

    @classmethod
    def constant(cls, axes: Sequence[AxisSpec], value, *, mode: str = RATIONAL) -> LabeledTensor:
        axes = tuple(axes)
        n = int(np.prod([a.cardinality for a in axes], dtype=np.int64))
        return cls(axes, [to_number(value, mode)] * n, mode=mode)

    @classmethod
    def scalar(cls, value, *, mode: str = RATIONAL) -> LabeledTensor:
        return cls((), [to_number(value, mode)], mode=mode, signed=True)

    # basic accessors
    @property
    def mode(self) -> str:
        return _mode_of(self.data)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def axis(self, name: str) -> AxisSpec:
        for a in self.axes:
            if a.name == name:
                return a
        raise TensorError(f"unknown axis {name!r}; tensor has {self.names}")

    def card(self, name: str) -> int:
        return self.axis(name).cardinality

    def has(self, name: str) -> bool:
        return name in self.names

    def item(self):
        if self.data.size != 1:
            raise TensorError("item() needs a single-entry tensor")
        return self.data.reshape(-1)[0]

    def __getitem__(self, index: Mapping[str, int]):
        return self.data[tuple(index[n] for n in self.names)]

    def value_at(self, **index):
        return self[index]

    def __repr__(self):
        axes = ", ".join(f"{a.name}:{a.cardinality}{'>' if a.role == OUTPUT else '<'}" for a in self.axes)
        return f"LabeledTensor([{axes}], mode={self.mode}{', signed' if self.signed else ''})"

    # layout
    def transpose(self, names: Sequence[str]) -> LabeledTensor:
        names = list(names)
        if sorted(names) != sorted(self.names):
            raise TensorError(f"transpose needs a permutation of {self.names}, got {names}")
        perm = [self.names.index(n) for n in names]
        return LabeledTensor(tuple(self.axes[i] for i in perm), np.transpose(self.data, perm), signed=self.signed)

    def canonical(self) -> LabeledTensor:
        order = sorted(self.axes, key=canonical_key)
        return self.transpose([a.name for a in order])

    def rename(self, mapping: Mapping[str, str]) -> LabeledTensor:
        axes = tuple(AxisSpec(mapping.get(a.name, a.name), a.cardinality, a.role) for a in self.axes)
        return LabeledTensor(axes, self.data, signed=self.signed)

    def with_roles(self, roles: Mapping[str, str]) -> LabeledTensor:
        axes = tuple(AxisSpec(a.name, a.cardinality, roles.get(a.name, a.role)) for a in self.axes)
        return LabeledTensor(axes, self.data, signed=self.signed)

    def expand(self, axes: Iterable[AxisSpec]) -> LabeledTensor:
        """Broadcast along new axes (constant along each)."""
        extra = [a for a in axes if not self.has(a.name)]
        if not extra:
            return self
        ones = LabeledTensor.constant(extra, 1, mode=self.mode)
        return tensor_product(self, ones)

    def fix(self, **index: int) -> LabeledTensor:
        """Slice at fixed values of some axes, dropping them."""
        for n in index:
            self.axis(n)
        sl = tuple(index.get(n, slice(None)) for n in self.names)
        axes = tuple(a for a in self.axes if a.name not in index)
        return LabeledTensor(axes, self.data[sl], signed=self.signed)

    # conversions
    def to_float(self) -> LabeledTensor:
        if self.mode == FLOAT:
            return self
        return LabeledTensor(self.axes, self.data.astype(float), signed=self.signed)

    def to_rational(self, max_denominator: int | None = None) -> LabeledTensor:
        if self.mode == RATIONAL:
            return self
        conv = (lambda x: Fraction(x).limit_denominator(max_denominator)) if max_denominator else Fraction
        data = np.array([conv(float(x)) for x in self.data.reshape(-1)], dtype=object)
        return LabeledTensor(self.axes, data.reshape(self.shape), signed=self.signed)

    def to_mode(self, mode: str) -> LabeledTensor:
        return self.to_float() if mode == FLOAT else self.to_rational()

    def as_signed(self) -> LabeledTensor:
        return LabeledTensor(self.axes, self.data, signed=True)

    def as_checked(self) -> LabeledTensor:
        return LabeledTensor(self.axes, self.data, signed=False)

    def flat(self, names: Sequence[str] | None = None) -> np.ndarray:
        t = self.transpose(names) if names is not None else self
        return t.data.reshape(-1)

    # arithmetic (results are signed intermediates)
    def _aligned(self, other: LabeledTensor) -> np.ndarray:
        if sorted(other.names) != sorted(self.names):
            raise TensorError(f"axis sets differ: {self.names} vs {other.names}")
        for a in self.axes:
            if other.card(a.name) != a.cardinality:
                raise DimensionError(f"axis {a.name!r}: cardinality {a.cardinality} vs {other.card(a.name)}")
        data = other.transpose(self.names).data
        if self.mode != other.mode:
            return data.astype(float)
        return data

    def _binary(self, other: LabeledTensor, op) -> LabeledTensor:
        rhs = self._aligned(other)
        lhs = self.data.astype(float) if rhs.dtype != self.data.dtype else self.data
        return LabeledTensor.unchecked(self.axes, op(lhs, rhs))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return LabeledTensor.unchecked(self.axes, -self.data)

    def scale(self, c) -> LabeledTensor:
        c = to_number(c, self.mode)
        return LabeledTensor(self.axes, self.data * c, signed=self.signed or c < 0)

    def __mul__(self, other):
        if isinstance(other, LabeledTensor):
            return contract(self, other)
        return self.scale(other)

    __rmul__ = scale

    def __truediv__(self, c):
        return self.scale(1 / to_number(c, self.mode))

    # comparisons
    def __eq__(self, other):
        if not isinstance(other, LabeledTensor):
            return NotImplemented
        if sorted(self.axes, key=lambda a: a.name) != sorted(other.axes, key=lambda a: a.name):
            return False
        rhs = other.transpose(self.names).data
        if self.mode == RATIONAL and other.mode == RATIONAL:
            return bool(np.all(self.data == rhs))
        return bool(np.allclose(self.data.astype(float), rhs.astype(float), atol=FLOAT_TOL, rtol=0))

    __hash__ = None

    def max_abs(self):
        if self.data.size == 0:
            return 0
        return max(abs(x) for x in self.data.reshape(-1))

    def is_zero(self, tol: float | None = None) -> bool:
        if self.mode == RATIONAL and tol is None:
            return all(x == 0 for x in self.data.reshape(-1))
        return float(self.max_abs()) <= (FLOAT_TOL if tol is None else tol)

    def is_nonnegative(self) -> bool:
        return not self.data.size or _min(self.data) >= (-FLOAT_TOL if self.mode == FLOAT else 0)

    def allclose(self, other: LabeledTensor, atol: float = FLOAT_TOL) -> bool:
        return (self - other).is_zero(atol)

    # serialization
    def to_json(self) -> dict:
        t = self.canonical()
        if t.mode == RATIONAL:
            data = [str(x) for x in t.data.reshape(-1)]
        else:
            data = [float(x) for x in t.data.reshape(-1)]
        return {"axes": [a.to_json() for a in t.axes], "data": data, "number_mode": t.mode}

    @classmethod
    def from_json(cls, obj: Mapping, *, signed: bool = False) -> LabeledTensor:
        try:
            axes = [AxisSpec(a["name"], int(a["cardinality"]), a.get("role", OUTPUT)) for a in obj["axes"]]
            mode = obj.get("number_mode", RATIONAL)
            if mode not in (RATIONAL, FLOAT):
                raise TensorError(f"unknown number_mode {mode!r}")
            data = [to_number(x, mode) for x in obj["data"]]
        except (KeyError, TypeError, ZeroDivisionError) as exc:
            raise TensorError(f"malformed tensor JSON: {exc}") from exc
        except ValueError as exc:
            raise TensorError(f"malformed tensor JSON: {exc}") from exc
        return cls(axes, data, mode=mode, signed=signed)


def _min(arr: np.ndarray):
    return min(arr.reshape(-1)) if arr.dtype == object else float(arr.min())


def _common_mode(*ts: LabeledTensor) -> str:
    return RATIONAL if all(t.mode == RATIONAL for t in ts) else FLOAT


def contract(a: LabeledTensor, b: LabeledTensor, *, check_roles: bool = True) -> LabeledTensor:
    """Sum over all shared axis names; the result keeps the remaining axes of a then b."""
    shared = [n for n in a.names if b.has(n)]
    for n in shared:
        x, y = a.axis(n), b.axis(n)
        if x.cardinality != y.cardinality:
            raise DimensionError(f"axis {n!r}: cardinality {x.cardinality} vs {y.cardinality}")
        if check_roles and x.role == y.role and x.cardinality > 1:
            raise TensorError(f"axis {n!r} is an {x.role} on both sides")
    mode = _common_mode(a, b)
    da, db = a.to_mode(mode).data, b.to_mode(mode).data
    ia = [a.names.index(n) for n in shared]
    ib = [b.names.index(n) for n in shared]
    data = np.tensordot(da, db, axes=(ia, ib))
    axes = tuple(x for x in a.axes if x.name not in shared) + tuple(y for y in b.axes if y.name not in shared)
    if not axes:
        data = np.asarray(data, dtype=da.dtype).reshape(())
    return LabeledTensor(axes, data, signed=a.signed or b.signed)


def contract_all(*ts: LabeledTensor, check_roles: bool = True) -> LabeledTensor:
    out = ts[0]
    for t in ts[1:]:
        out = contract(out, t, check_roles=check_roles)
    return out


def tensor_product(a: LabeledTensor, b: LabeledTensor) -> LabeledTensor:
    overlap = set(a.names) & set(b.names)
    if overlap:
        raise TensorError(f"tensor product needs disjoint axes, shared: {sorted(overlap)}")
    return contract(a, b)


def identity(axes: Sequence[AxisSpec], *, mode: str = RATIONAL) -> LabeledTensor:
    """The all-ones tensor 1_A; contracting with it is the reduction r_A."""
    return LabeledTensor.constant(tuple(a.flipped() for a in axes), 1, mode=mode)


def delta(a: AxisSpec, b: AxisSpec, *, mode: str = RATIONAL) -> LabeledTensor:
    """Identity channel δ_{a,b} between two axes of equal cardinality."""
    if a.cardinality != b.cardinality:
        raise DimensionError(f"δ needs equal cardinalities, got {a.cardinality} and {b.cardinality}")
    return LabeledTensor.from_function((a, b), lambda **k: int(k[a.name] == k[b.name]), mode=mode)


def point(axis: AxisSpec, value: int, *, mode: str = RATIONAL) -> LabeledTensor:
    """δ_{axis,value}."""
    return LabeledTensor.from_function((axis,), lambda **k: int(k[axis.name] == value), mode=mode)


def _check_names(t: LabeledTensor, names: Iterable[str]) -> list[str]:
    names = list(names)
    for n in names:
        t.axis(n)
    return names


def reduction(t: LabeledTensor, axes: Iterable[str]) -> LabeledTensor:
    names = _check_names(t, axes)
    idx = tuple(t.names.index(n) for n in names)
    data = t.data.sum(axis=idx) if idx else t.data
    kept = tuple(a for a in t.axes if a.name not in names)
    if not kept:
        data = np.asarray(data, dtype=t.data.dtype).reshape(())
    return LabeledTensor(kept, data, signed=t.signed)


def total_reduction(t: LabeledTensor):
    return reduction(t, t.names).item()


def reduce_and_replace(t: LabeledTensor, axes: Iterable[str]) -> LabeledTensor:
    """Replace every slice along ``axes`` by its average; shape is preserved."""
    names = _check_names(t, axes)
    if not names:
        return t
    idx = tuple(t.names.index(n) for n in names)
    d = int(np.prod([t.card(n) for n in names]))
    avg = t.data.sum(axis=idx, keepdims=True)
    avg = avg / Fraction(d) if t.mode == RATIONAL else avg / d
    return LabeledTensor(t.axes, np.broadcast_to(avg, t.shape).copy(), signed=t.signed)


class RrExpr:
    """Formal polynomial in reduce-and-replace symbols, e.g. (1 - O' + O O' - I O O').

    Each term is a coefficient times a set of axis names. Since reduce-and-replace
    maps are commuting idempotents, the product of two monomials is the union
    of their axis sets.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[frozenset, Fraction] | Iterable[tuple] = ()):
        acc: dict[frozenset, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for subset, coeff in items:
            key = frozenset([subset] if isinstance(subset, str) else subset)
            acc[key] = acc.get(key, Fraction(0)) + Fraction(coeff)
        self.terms = {k: v for k, v in acc.items() if v != 0}

    @classmethod
    def one(cls) -> RrExpr:
        return cls({frozenset(): 1})

    @classmethod
    def mono(cls, *names: str, coeff=1) -> RrExpr:
        return cls({frozenset(names): coeff})

    def __add__(self, other):
        other = _as_expr(other)
        return RrExpr(list(self.terms.items()) + list(other.terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return RrExpr({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_expr(other))

    def __rsub__(self, other):
        return _as_expr(other) - self

    def __mul__(self, other):
        other = _as_expr(other)
        return RrExpr([(s | t, c * d) for s, c in self.terms.items() for t, d in other.terms.items()])

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, RrExpr):
            other = _as_expr(other)
        return self.terms == other.terms

    __hash__ = None

    def axis_names(self) -> set[str]:
        return set().union(*self.terms) if self.terms else set()

    def sector_value(self, sector: Iterable[str]) -> Fraction:
        """Eigenvalue on the sector that is zero-sum along ``sector`` and constant elsewhere."""
        s = set(sector)
        return sum((c for t, c in self.terms.items() if not (t & s)), Fraction(0))

    def is_idempotent_on(self, axes: Iterable[str]) -> bool:
        axes = list(axes)
        return all(self.sector_value(s) in (0, 1) for s in _subsets(axes))

    def __repr__(self):
        if not self.terms:
            return "RrExpr(0)"
        parts = []
        for t, c in sorted(self.terms.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
            sym = " ".join(sorted(t)) or "1"
            parts.append(f"{c}*[{sym}]" if c != 1 else f"[{sym}]")
        return "RrExpr(" + " + ".join(parts) + ")"


def _as_expr(x) -> RrExpr:
    if isinstance(x, RrExpr):
        return x
    return RrExpr({frozenset(): Fraction(x)})


def _subsets(items: Sequence[str]):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def apply_rr_expr(t: LabeledTensor, e: RrExpr) -> LabeledTensor:
    """Σ_k c_k · reduce_and_replace(t, S_k); the result is a signed tensor."""
    for n in e.axis_names():
        t.axis(n)
    zero = np.zeros(t.shape, dtype=t.data.dtype)
    if t.mode == RATIONAL:
        zero = np.full(t.shape, Fraction(0), dtype=object)
    acc = zero
    for subset, coeff in e.terms.items():
        term = reduce_and_replace(t, subset).data
        acc = acc + term * (coeff if t.mode == RATIONAL else float(coeff))
    return LabeledTensor.unchecked(t.axes, acc)


def rr(*names: str) -> RrExpr:
    """Shorthand for the monomial reduce-and-replace over ``names``."""
    return RrExpr.mono(*names)


# Sector decomposition. Each axis space splits into constants and zero-sum
# vectors; a sector picks the zero-sum part on a subset S of axes and the
# constant part elsewhere. Every RrExpr acts on sector S as the scalar
# sector_value(S), so linear constraints built from RrExprs are diagonal here.


def sector_axes(axes: Sequence[AxisSpec]) -> list[str]:
    """Axes that carry a nontrivial zero-sum part (cardinality ≥ 2)."""
    return [a.name for a in axes if a.cardinality > 1]


def all_sectors(axes: Sequence[AxisSpec]) -> list[frozenset]:
    return [frozenset(s) for s in _subsets(sector_axes(axes))]


def kernel_sectors(exprs: Iterable[RrExpr], axes: Sequence[AxisSpec]) -> list[frozenset]:
    """Sectors annihilated by every expression (the common kernel)."""
    exprs = list(exprs)
    return [s for s in all_sectors(axes) if all(e.sector_value(s) == 0 for e in exprs)]


def sector_projector(sector: Iterable[str], axes: Sequence[AxisSpec]) -> RrExpr:
    s = set(sector)
    out = RrExpr.one()
    for n in sector_axes(axes):
        out = out * ((1 - rr(n)) if n in s else rr(n))
    return out


def kernel_projector(exprs: Iterable[RrExpr], axes: Sequence[AxisSpec], *, include_constant: bool = True) -> RrExpr:
    """Orthogonal projector onto the common kernel of the expressions."""
    out = RrExpr()
    for s in kernel_sectors(exprs, axes):
        if s or include_constant:
            out = out + sector_projector(s, axes)
    return out


def sector_dimension(sector: Iterable[str], axes: Sequence[AxisSpec]) -> int:
    s = set(sector)
    n = 1
    for a in axes:
        if a.name in s:
            n *= a.cardinality - 1
    return n


def sector_rows(sector: Iterable[str], axes: Sequence[AxisSpec]) -> np.ndarray:
    """Integer basis of the sector's row space, flattened in ``axes`` order.

    Zero-sum axes use e_0 - e_k (k ≥ 1); constant axes use the all-ones vector.
    The rows of distinct sectors are mutually orthogonal.
    """
    s = set(sector)
    factors = []
    for a in axes:
        d = a.cardinality
        if a.name in s:
            m = np.zeros((d - 1, d), dtype=np.int64)
            m[:, 0] = 1
            m[np.arange(d - 1), np.arange(1, d)] = -1
        else:
            m = np.ones((1, d), dtype=np.int64)
        factors.append(m)
    rows = np.ones((1, 1), dtype=np.int64)
    for m in factors:
        rows = np.kron(rows, m)
    return rows
