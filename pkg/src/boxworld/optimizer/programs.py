"""LP encodings: maximize an inequality over boxworld processes (fixed instruments) or over one instrument."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix

from ..inequalities import coefficient_tensor, two_way_signaling_bound
from ..operations import Instrument, OpDims, Wires, operation_constraints, validate_instrument
from ..processes import (
    ProcessDims,
    ProcessTensor,
    boxworld_constraints,
    class_constraints,
    is_boxworld_process,
    is_valid_process,
    satisfies_nsp,
)
from ..tensor_core import FLOAT, RATIONAL, LabeledTensor, all_sectors, contract_all, kernel_sectors, sector_rows
from .lp import LinearProgram, LPResult, default_backend, solve


class OptimizerError(RuntimeError):
    """An LP that must be feasible and bounded was not, or a returned optimum failed revalidation."""


class BoundViolation(AssertionError):
    """A boxworld GYNI value above 1 - 1/(2d): an encoding bug, never a finding."""


def check_two_way_bound(which: str, dims: ProcessDims, value, tol: float = 1e-9):
    """Assert GYNI ≤ 1 - 1/(2d) with d = min(|O'_A|, |O'_B|)."""
    if not isinstance(which, str) or which.lower() != "gyni":
        return
    bound = two_way_signaling_bound(min(dims.a.op, dims.b.op))
    if (value > bound) if not isinstance(value, float) else (value > float(bound) + tol):
        raise BoundViolation(f"GYNI value {value} exceeds the two-way signaling bound {bound}")


def _constraint_rows(exprs, axes) -> np.ndarray:
    """Rows spanning the complement of the common kernel, excluding the constant sector."""
    allowed = set(kernel_sectors(exprs, axes))
    if frozenset() not in allowed:
        raise OptimizerError("constraints forbid the constant direction; normalization is unsatisfiable")
    blocks = [sector_rows(s, axes) for s in all_sectors(axes) if s and s not in allowed]
    n = int(np.prod([a.cardinality for a in axes]))
    return np.vstack(blocks) if blocks else np.zeros((0, n), dtype=np.int64)


@lru_cache(maxsize=None)
def process_rows(dims: ProcessDims, kind: str = "boxworld") -> tuple[np.ndarray, np.ndarray]:
    """Equality system E w = f over W flattened in ``dims.axes()`` order."""
    axes = dims.axes()
    exprs = list(boxworld_constraints().values()) if kind == "boxworld" else class_constraints(kind)
    e = _constraint_rows(exprs, axes)
    ones = np.ones((1, e.shape[1]), dtype=np.int64)
    f = np.zeros(e.shape[0] + 1, dtype=np.int64)
    f[-1] = dims.normalization()
    return np.vstack([e, ones]), f


@lru_cache(maxsize=None)
def instrument_rows(dims: OpDims, party: str) -> tuple[np.ndarray, np.ndarray]:
    """Equality system for T^{A|X} flattened in ``dims.axes(party)`` order: each Σ_a T^{a|x} is an operation."""
    wires = dims.wire_axes(party)
    e = _constraint_rows(list(operation_constraints(Wires(party)).values()), wires)
    ones = np.ones((1, e.shape[1]), dtype=np.int64)
    per_setting = np.vstack([e, ones])
    blocks = []
    rhs = []
    for x in range(dims.x):
        ex = np.zeros((1, dims.x), dtype=np.int64)
        ex[0, x] = 1
        blocks.append(np.kron(np.ones((1, dims.a), dtype=np.int64), np.kron(ex, per_setting)))
        rhs += [0] * e.shape[0] + [dims.ip * dims.o]
    return np.vstack(blocks), np.array(rhs, dtype=np.int64)


@dataclass
class ProcessOptimum:
    value: object
    process: ProcessTensor
    lp: LPResult


@dataclass
class InstrumentOptimum:
    value: object
    instrument: Instrument
    lp: LPResult


SPARSE_ABOVE = 1024  # float process LPs with more variables use the marginal formulation


def _marginal_sets(sectors, n_axes: int) -> list[tuple[int, ...]]:
    """Axis sets whose marginals are needed, each with its parent (one more axis) also listed."""
    full = tuple(range(n_axes))
    need = set()
    for s in sectors:
        while s != full and s not in need:
            need.add(s)
            b = min(set(full) - set(s))
            s = tuple(sorted(set(s) | {b}))
    return sorted(need, key=lambda t: (-len(t), t))


@lru_cache(maxsize=None)
def sparse_process_system(dims: ProcessDims, kind: str = "boxworld"):
    """Sparse equality system over (W, marginals of W).

    For each axis set S the marginal m_S sums W over the axes outside S; it is defined from a parent
    marginal with one more axis. A forbidden sector S becomes rows ⊗(e_0 - e_k) on m_S.
    Returns (E, f, number of W entries).
    """
    axes = dims.axes()
    names = [a.name for a in axes]
    cards = [a.cardinality for a in axes]
    exprs = list(boxworld_constraints().values()) if kind == "boxworld" else class_constraints(kind)
    allowed = set(kernel_sectors(exprs, axes))
    forbidden = [tuple(sorted(names.index(n) for n in s)) for s in all_sectors(axes) if s and s not in allowed]
    forbidden = [s for s in forbidden if all(cards[k] > 1 for k in s)]
    full = tuple(range(len(axes)))
    n_w = int(np.prod(cards))
    offset = {full: 0}
    col = n_w
    sets = _marginal_sets(forbidden, len(axes))
    for s in sets:
        offset[s] = col
        col += int(np.prod([cards[k] for k in s]))
    rows, cols, vals = [], [], []
    r = 0
    for s in sets:
        b = min(set(full) - set(s))
        parent = tuple(sorted(set(s) | {b}))
        pc = [cards[k] for k in parent]
        idx = np.indices(pc).reshape(len(parent), -1)
        keep = [i for i, k in enumerate(parent) if k != b]
        size = int(np.prod([cards[k] for k in s]))
        child = np.ravel_multi_index(idx[keep], [pc[i] for i in keep]) if keep else np.zeros(idx.shape[1], int)
        rows += [r + child, r + np.arange(size)]
        cols += [offset[parent] + np.arange(idx.shape[1]), offset[s] + np.arange(size)]
        vals += [-np.ones(idx.shape[1]), np.ones(size)]
        r += size
    for s in forbidden:
        local = np.ones((1, 1), dtype=np.int64)
        for k in s:
            d = cards[k]
            m = np.zeros((d - 1, d), dtype=np.int64)
            m[:, 0] = 1
            m[np.arange(d - 1), np.arange(1, d)] = -1
            local = np.kron(local, m)
        nz = np.nonzero(local)
        rows.append(r + nz[0])
        cols.append(offset[s] + nz[1])
        vals.append(local[nz].astype(float))
        r += local.shape[0]
    rows.append(np.full(n_w, r))
    cols.append(np.arange(n_w))
    vals.append(np.ones(n_w))
    r += 1
    e = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(r, col)).tocsr()
    f = np.zeros(r)
    f[-1] = dims.normalization()
    return e, f, n_w


def _objective(which, *tensors: LabeledTensor, setting_card_y: int) -> LabeledTensor:
    """``which`` names an inequality or is a coefficient tensor over A, B, X, Y."""
    v = which if isinstance(which, LabeledTensor) else coefficient_tensor(which, setting_card_y)
    return contract_all(*tensors, v)


def process_dims_of(ta: Instrument, tb: Instrument) -> ProcessDims:
    return ProcessDims(ta.dims, tb.dims)


def max_over_processes(which, ta: Instrument, tb: Instrument, backend: str | None = None,
                       kind: str = "boxworld", validate: bool = True) -> ProcessOptimum:
    """max_W ineq(W * T^A * T^B) over the boxworld (or ``kind``) process polytope."""
    backend = backend or default_backend()
    dims = process_dims_of(ta, tb)
    axes = dims.axes()
    m = _objective(which, ta.tensor, tb.tensor, setting_card_y=tb.setting_axis.cardinality)
    c = m.transpose([a.name for a in axes]).data.reshape(-1)
    if backend == FLOAT:
        c = c.astype(float)
    if backend == FLOAT and len(c) > SPARSE_ABOVE:
        e, f, n_w = sparse_process_system(dims, kind)
        res = solve(LinearProgram(np.concatenate([c, np.zeros(e.shape[1] - n_w)]), e, f), backend=backend)
        res.x = res.x[:n_w]
    else:
        e, f = process_rows(dims, kind)
        res = solve(LinearProgram(list(c), e, list(f)), backend=backend)
    if not res.ok:
        raise OptimizerError(f"process LP is {res.status}; the uniform process is always feasible")
    if kind == "boxworld":
        check_two_way_bound(which, dims, res.value)
    data = np.array(res.x, dtype=object if backend == RATIONAL else float).reshape([a.cardinality for a in axes])
    if backend == FLOAT:
        data = np.where(np.abs(data) <= 1e-12, 0.0, np.maximum(data, 0.0))
    w = ProcessTensor(LabeledTensor(axes, data))
    if validate:
        ok = {"boxworld": is_boxworld_process, "nsp": satisfies_nsp, "general": is_valid_process}[kind]
        if not is_valid_process(w) or not ok(w):
            raise OptimizerError("LP optimum failed process revalidation")
    return ProcessOptimum(res.value, w, res)


def max_over_instrument(which, w: ProcessTensor, other: Instrument, party: str,
                        backend: str | None = None, dims: OpDims | None = None) -> InstrumentOptimum:
    """max over T of one party with W and the other party's instrument fixed."""
    backend = backend or default_backend()
    if party == other.party:
        raise ValueError("the fixed instrument must belong to the other party")
    if dims is None:
        base = w.dims.a if party == "A" else w.dims.b
        x = 4 if party == "B" and isinstance(which, str) and which.lower() == "ocb" else 2
        dims = OpDims(base.ip, base.i, base.o, base.op, 2, x)
    y_card = other.setting_axis.cardinality if party == "A" else dims.x
    m = _objective(which, w.tensor, other.tensor, setting_card_y=y_card)
    axes = dims.axes(party)
    c = m.transpose([a.name for a in axes]).data.reshape(-1)
    if backend == FLOAT:
        c = c.astype(float)
    e, f = instrument_rows(dims, party)
    res = solve(LinearProgram(list(c), e, list(f)), backend=backend)
    if not res.ok:
        raise OptimizerError(f"instrument LP is {res.status}")
    if isinstance(which, str) and which.lower() == "gyni" and is_boxworld_process(w):
        check_two_way_bound(which, w.dims, res.value)
    data = np.array(res.x, dtype=object if backend == RATIONAL else float).reshape([a.cardinality for a in axes])
    if backend == FLOAT:
        data = np.where(np.abs(data) <= 1e-12, 0.0, np.maximum(data, 0.0))
    t = Instrument(party, LabeledTensor(axes, data))
    if not validate_instrument(t).ok:
        raise OptimizerError("LP optimum failed instrument revalidation")
    return InstrumentOptimum(res.value, t, res)


def evaluate_triple(which, w: ProcessTensor, ta: Instrument, tb: Instrument):
    m = _objective(which, w.tensor, ta.tensor, tb.tensor, setting_card_y=tb.setting_axis.cardinality)
    v = m.item()
    return v if m.mode == RATIONAL else float(v)
