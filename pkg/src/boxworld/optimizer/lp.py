"""Linear programs max c·x s.t. Ex = f, x ≥ 0: exact simplex (gmpy2) and a floating backend (HiGHS)."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, issparse
from scipy.sparse.linalg import lsqr

from ..tensor_core import FLOAT, FLOAT_TOL, RATIONAL

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

DEGENERATE_SWITCH = 20  # consecutive degenerate pivots before Bland's rule takes over


class LPError(RuntimeError):
    """Solver failure that is not a property of the program (e.g. iteration limit)."""


def default_backend() -> str:
    b = os.environ.get("BOXWORLD_BACKEND", RATIONAL)
    if b not in (RATIONAL, FLOAT):
        raise ValueError(f"BOXWORLD_BACKEND must be {RATIONAL!r} or {FLOAT!r}, got {b!r}")
    return b


@dataclass
class LinearProgram:
    """max objective·x subject to eq_matrix x = eq_rhs, x ≥ 0."""

    objective: Sequence
    eq_matrix: object
    eq_rhs: Sequence
    names: Sequence[str] | None = None

    def __post_init__(self):
        if issparse(self.eq_matrix):
            self.eq_matrix = csr_matrix(self.eq_matrix, dtype=float)
            m, n = self.eq_matrix.shape
            if len(self.objective) != n or len(self.eq_rhs) != m:
                raise ValueError(f"shape mismatch: E is {m}x{n}, c has {len(self.objective)}, f has {len(self.eq_rhs)}")
            return
        e = np.asarray(self.eq_matrix)
        self.eq_matrix = e if e.dtype.kind in "iuf" else np.asarray(self.eq_matrix, dtype=object)
        if self.eq_matrix.ndim != 2:
            self.eq_matrix = self.eq_matrix.reshape(len(self.eq_rhs), -1)
        m, n = self.eq_matrix.shape
        if len(self.objective) != n or len(self.eq_rhs) != m:
            raise ValueError(f"shape mismatch: E is {m}x{n}, c has {len(self.objective)}, f has {len(self.eq_rhs)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.eq_matrix.shape

    def float_system(self) -> tuple[object, np.ndarray]:
        if not hasattr(self, "_float"):
            e = self.eq_matrix if issparse(self.eq_matrix) else np.asarray(self.eq_matrix, dtype=float)
            self._float = (e, np.asarray(self.eq_rhs, dtype=float))
        return self._float


@dataclass
class LPResult:
    status: str
    value: object = None
    x: list = field(default_factory=list)
    backend: str = RATIONAL
    pivots: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _mpq(v) -> gmpy2.mpq:
    if isinstance(v, Fraction):
        return gmpy2.mpq(v.numerator, v.denominator)
    if isinstance(v, (float, np.floating)):
        return gmpy2.mpq(Fraction(float(v)))
    if isinstance(v, np.integer):
        return gmpy2.mpq(int(v))
    return gmpy2.mpq(v)


_to_mpq = np.vectorize(_mpq, otypes=[object])


def _frac(v) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


class _Tableau:
    """Dense tableau [A | b] with a reduced-cost row; rows updated only where the pivot column is nonzero."""

    def __init__(self, a: np.ndarray, b: np.ndarray):
        m, n = a.shape
        self.t = np.empty((m + 1, n + 1), dtype=object)
        self.t[:m, :n] = a
        self.t[:m, n] = b
        self.t[m, :] = gmpy2.mpq(0)
        self.basis = [-1] * m
        self.pivots = 0

    @property
    def m(self) -> int:
        return self.t.shape[0] - 1

    def pivot(self, r: int, j: int):
        t = self.t
        t[r] = t[r] / t[r, j]
        col = t[:, j]
        rows = [i for i in np.flatnonzero(col != 0) if i != r]
        if rows:
            cols = np.flatnonzero(t[r] != 0)
            sub = np.ix_(rows, cols)
            t[sub] = t[sub] - np.outer(col[rows], t[r, cols])
        self.basis[r] = j
        self.pivots += 1

    def set_objective(self, c: np.ndarray):
        """Reduced-cost row z - c for maximizing c·x over the current basis."""
        n = self.t.shape[1] - 1
        row = np.empty(n + 1, dtype=object)
        row[:n] = -c
        row[n] = gmpy2.mpq(0)
        for r, j in enumerate(self.basis):
            if c[j] != 0:
                row = row + c[j] * self.t[r]
        self.t[-1] = row

    def drop_rows(self, rows: Sequence[int]):
        keep = [i for i in range(self.m) if i not in set(rows)] + [self.m]
        self.t = self.t[keep]
        self.basis = [self.basis[i] for i in keep[:-1]]

    def run(self, allowed: np.ndarray, max_pivots: int) -> str:
        """Primal simplex on columns where ``allowed`` is true. Dantzig pricing, Bland on degenerate runs."""
        degenerate = 0
        while True:
            obj = self.t[-1, :-1]
            neg = np.flatnonzero((obj < 0) & allowed)
            if len(neg) == 0:
                return OPTIMAL
            if degenerate >= DEGENERATE_SWITCH:
                j = int(neg[0])
            else:
                j = int(neg[np.argmin(obj[neg])])
            col = self.t[:-1, j]
            pos = np.flatnonzero(col > 0)
            if len(pos) == 0:
                return UNBOUNDED
            rhs = self.t[:-1, -1]
            ratios = rhs[pos] / col[pos]
            best = min(ratios)
            ties = [int(pos[k]) for k in range(len(pos)) if ratios[k] == best]
            r = min(ties, key=lambda i: self.basis[i])
            degenerate = degenerate + 1 if best == 0 else 0
            self.pivot(r, j)
            if self.pivots > max_pivots:
                raise LPError(f"pivot limit {max_pivots} exceeded")

    def solution(self, n: int) -> list:
        x = [gmpy2.mpq(0)] * n
        for r, j in enumerate(self.basis):
            if j < n:
                x[j] = self.t[r, -1]
        return x


def _exact_inputs(lp: LinearProgram):
    a = _to_mpq(lp.eq_matrix.toarray() if issparse(lp.eq_matrix) else lp.eq_matrix)
    b = _to_mpq(np.asarray(lp.eq_rhs, dtype=object))
    c = _to_mpq(np.asarray(lp.objective, dtype=object))
    neg = b < 0
    a[neg] = -a[neg]
    b[neg] = -b[neg]
    return a, b, c


def _finish(tab: _Tableau, c: np.ndarray, n: int) -> LPResult:
    allowed = np.zeros(tab.t.shape[1] - 1, dtype=bool)
    allowed[:n] = True
    tab.set_objective(np.concatenate([c, np.full(tab.t.shape[1] - 1 - n, gmpy2.mpq(0), dtype=object)]))
    status = tab.run(allowed, max_pivots=50 * (n + tab.m) + 1000)
    if status != OPTIMAL:
        return LPResult(status, backend=RATIONAL, pivots=tab.pivots)
    x = [_frac(v) for v in tab.solution(n)]
    return LPResult(OPTIMAL, _frac(tab.t[-1, -1]), x, RATIONAL, tab.pivots)


def _two_phase(lp: LinearProgram) -> LPResult:
    a, b, c = _exact_inputs(lp)
    m, n = a.shape
    art = np.empty((m, m), dtype=object)
    art[:] = gmpy2.mpq(0)
    for i in range(m):
        art[i, i] = gmpy2.mpq(1)
    tab = _Tableau(np.hstack([a, art]) if m else a, b)
    tab.basis = list(range(n, n + m))
    phase1 = np.array([gmpy2.mpq(0)] * n + [gmpy2.mpq(-1)] * m, dtype=object)
    tab.set_objective(phase1)
    tab.run(np.ones(n + m, dtype=bool), max_pivots=50 * (n + m) + 1000)
    if tab.t[-1, -1] != 0:
        return LPResult(INFEASIBLE, backend=RATIONAL, pivots=tab.pivots)
    redundant = []
    for r in range(tab.m):
        if tab.basis[r] >= n:
            nz = np.flatnonzero(tab.t[r, :n] != 0)
            if len(nz):
                tab.pivot(r, int(nz[0]))
            else:
                redundant.append(r)
    tab.drop_rows(redundant)
    tab.t = np.delete(tab.t, np.s_[n:n + m], axis=1)
    return _finish(tab, c, n)


def _crossover(lp: LinearProgram, x_float: np.ndarray) -> LPResult | None:
    """Rebuild an exact basis around the support of a float optimum, then finish with exact phase 2."""
    a, b, c = _exact_inputs(lp)
    m, n = a.shape
    tab = _Tableau(a, b)
    support = [int(j) for j in np.argsort(-x_float) if x_float[j] > FLOAT_TOL]
    others = [j for j in range(n) if x_float[j] <= FLOAT_TOL]
    free = set(range(m))
    for j in support + others:
        if not free:
            break
        col = tab.t[:m, j]
        rows = [i for i in np.flatnonzero(col != 0) if i in free]
        if not rows:
            if j in support and len(support) <= m:
                return None
            continue
        r = rows[0]
        tab.pivot(r, j)
        free.discard(r)
    if any(tab.t[i, -1] != 0 for i in free):
        return None
    tab.drop_rows(sorted(free))
    if any(v < 0 for v in tab.t[:-1, -1]):
        return None
    return _finish(tab, c, n)


def _solve_float(lp: LinearProgram) -> tuple[LPResult, np.ndarray | None]:
    m, n = lp.shape
    e, f = lp.float_system()
    a = (e if issparse(e) else csr_matrix(e)) if m else None
    res = linprog(-np.asarray(lp.objective, dtype=float), A_eq=a,
                  b_eq=f if m else None,
                  bounds=(0, None), method="highs")
    if res.status == 2:
        return LPResult(INFEASIBLE, backend=FLOAT), None
    if res.status == 3:
        return LPResult(UNBOUNDED, backend=FLOAT), None
    if res.status != 0:
        raise LPError(f"HiGHS failed: {res.message}")
    x = _polish(lp, res.x)
    return LPResult(OPTIMAL, float(np.dot(np.asarray(lp.objective, dtype=float), x)), list(x), FLOAT), res.x


def _polish(lp: LinearProgram, x: np.ndarray) -> np.ndarray:
    """Re-solve E_S x_S = f on the support S by least squares, so equality residuals drop to round-off."""
    support = np.flatnonzero(x > FLOAT_TOL)
    if lp.shape[0] == 0 or len(support) == 0:
        return np.where(x > FLOAT_TOL, x, 0.0)
    e, f = lp.float_system()
    if issparse(e):
        xs = lsqr(e[:, support], f, atol=1e-15, btol=1e-15, iter_lim=20 * len(support))[0]
    else:
        xs, *_ = np.linalg.lstsq(e[:, support], f, rcond=None)
    if xs.min() < -FLOAT_TOL:
        return np.where(x > FLOAT_TOL, x, 0.0)
    out = np.zeros_like(x)
    out[support] = np.maximum(xs, 0.0)
    return out


def solve(lp: LinearProgram, backend: str | None = None, warm_start: bool = True) -> LPResult:
    """Solve ``lp``. Rational mode returns exact Fractions; a float optimum is used only as a starting basis."""
    backend = backend or default_backend()
    if backend == FLOAT:
        return _solve_float(lp)[0]
    if backend != RATIONAL:
        raise ValueError(f"unknown backend {backend!r}")
    if warm_start and lp.shape[0] > 0:
        res, x = _solve_float(lp)
        if res.status == OPTIMAL:
            exact = _crossover(lp, x)
            if exact is not None:
                return exact
    return _two_phase(lp)


def verify(lp: LinearProgram, x: Sequence) -> bool:
    """Exact feasibility check of a candidate point."""
    xs = [Fraction(v) for v in x]
    if any(v < 0 for v in xs):
        return False
    rows = lp.eq_matrix.toarray() if issparse(lp.eq_matrix) else lp.eq_matrix
    for row, rhs in zip(rows, lp.eq_rhs):
        if sum((Fraction(e) * v for e, v in zip(row, xs) if e != 0), Fraction(0)) != Fraction(rhs):
            return False
    return True
