"""Exhaustive GYNI search over identical deterministic all-bit instruments for both parties."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from ..operations import ALL_BIT, deterministic_components
from ..processes import ALL_BIT_PROCESS
from .lp import LinearProgram, LPError, solve
from .programs import check_two_way_bound, process_rows

GOLDEN = Fraction(2, 3)
NEAR = 1e-7  # float values this close to the running maximum are re-solved exactly


class LongRunRefused(RuntimeError):
    """The full search was requested without the long-run flag."""


@lru_cache(maxsize=1)
def _components() -> np.ndarray:
    comps, _ = deterministic_components(ALL_BIT)
    return comps.astype(np.int64)  # [c, a, i, o', i', o]


def components_per_setting() -> int:
    return len(_components())


def symmetric_lp_count() -> int:
    """One LP per deterministic instrument (a component for each setting value), used by both parties."""
    return components_per_setting() ** ALL_BIT.x


def instrument_array(index: int) -> np.ndarray:
    """T[a, x, i, o', i', o] of the deterministic instrument with the given index."""
    comps = _components()
    n = len(comps)
    parts = []
    for _ in range(ALL_BIT.x):
        index, c = divmod(index, n)
        parts.append(comps[c])
    return np.stack(parts, axis=1)


def gyni_objective(index: int) -> np.ndarray:
    """4 × GYNI coefficient vector over W in ``ALL_BIT_PROCESS.axes()`` order, both parties using ``index``."""
    t = instrument_array(index)
    # W order: I'_A, O_A, I_A, O'_A, I'_B, O_B, I_B, O'_B; GYNI picks a = y, b = x
    out = np.zeros((2,) * 8, dtype=np.int64)
    for x in range(2):
        for y in range(2):
            ta = t[y, x]  # a = y
            tb = t[x, y]  # b = x
            out += np.einsum("ijpo,klqr->poijqrkl", ta, tb)
    return out.reshape(-1)


@lru_cache(maxsize=1)
def _float_system():
    e, f = process_rows(ALL_BIT_PROCESS)
    return csr_matrix(e.astype(float)), f.astype(float)


def _float_value(c: np.ndarray) -> float:
    e, f = _float_system()
    res = linprog(-c.astype(float), A_eq=e, b_eq=f, bounds=(0, None), method="highs",
                  options={"presolve": False})
    if res.status != 0:
        raise LPError(f"HiGHS failed: {res.message}")
    return -res.fun


def solve_index(index: int, exact_above=None) -> Fraction | float:
    """GYNI optimum for one symmetric instrument pair; exact when the float value is near ``exact_above``."""
    c = gyni_objective(index)
    value = _float_value(c) / 4
    if exact_above is not None and value >= float(exact_above) - NEAR:
        e, f = process_rows(ALL_BIT_PROCESS)
        value = solve(LinearProgram(list(c), e, list(f)), backend="rational").value / 4
    check_two_way_bound("gyni", ALL_BIT_PROCESS, value)
    return value


def _better(v, best) -> bool:
    """Float values within NEAR of an exact best do not replace it."""
    if best is None:
        return True
    if isinstance(best, Fraction) and not isinstance(v, Fraction):
        return v > float(best) + NEAR
    return v > best


def _chunk(args) -> list[tuple[int, object]]:
    """Once a value at the threshold is certified exactly, only strictly larger float values are re-solved."""
    indices, exact_above = args
    out = []
    for i in indices:
        v = solve_index(i, exact_above)
        if isinstance(v, Fraction) and exact_above is not None and v >= exact_above:
            exact_above = v + Fraction(1, 10 ** 6)
        out.append((i, v))
    return out


@dataclass
class ExhaustiveResult:
    value: object
    best_index: int
    count: int
    complete: bool

    def to_json(self) -> dict:
        v = self.value
        return {"value": str(v) if isinstance(v, Fraction) else float(v), "best_index": self.best_index,
                "lps": self.count, "complete": self.complete}


def _parse(v: str):
    return Fraction(v) if "/" in v or v.isdigit() else float(v)


def _resume(path: str | None) -> tuple[int, object, int]:
    """(next index, best value, best index) from an append-only checkpoint of 'index value' lines."""
    nxt, best, best_i = 0, None, -1
    if path and os.path.exists(path):
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if len(parts) != 2:
                    continue
                i, v = int(parts[0]), _parse(parts[1])
                nxt = max(nxt, i + 1)
                if _better(v, best):
                    best, best_i = v, i
    return nxt, best, best_i


def _scan(indices, exact_above, jobs: int, checkpoint: str | None, chunk: int = 256):
    best, best_i, count = None, -1, 0
    chunks = [(indices[k:k + chunk], exact_above) for k in range(0, len(indices), chunk)]
    fh = open(checkpoint, "a") if checkpoint else None
    try:
        if jobs > 1:
            ex = ProcessPoolExecutor(max_workers=jobs)
            results = ex.map(_chunk, chunks)
        else:
            ex = None
            results = map(_chunk, chunks)
        for res in results:
            for i, v in res:
                count += 1
                if _better(v, best):
                    best, best_i = v, i
                if fh:
                    fh.write(f"{i} {v}\n")
            if fh:
                fh.flush()
        if ex:
            ex.shutdown()
    finally:
        if fh:
            fh.close()
    return best, best_i, count


def exhaustive_symmetric_gyni(long_run: bool = False, checkpoint: str | None = None, jobs: int = 1,
                              stop: int | None = None) -> ExhaustiveResult:
    """max over all symmetric deterministic pairs of the boxworld GYNI LP. Refuses without ``long_run``."""
    total = symmetric_lp_count()
    if not long_run:
        raise LongRunRefused(f"the exhaustive search solves {total} LPs ({components_per_setting()} components "
                             f"per setting value, squared); pass long_run=True (CLI: --long-run)")
    start, best, best_i = _resume(checkpoint)
    end = total if stop is None else min(total, stop)
    found, found_i, count = _scan(list(range(start, end)), GOLDEN, jobs, checkpoint)
    if found is not None and _better(found, best):
        best, best_i = found, found_i
    return ExhaustiveResult(best, best_i, end, end == total)


def subsample_symmetric_gyni(n: int = 1000, seed: int = 0, jobs: int = 1) -> ExhaustiveResult:
    """The same LP on ``n`` random symmetric pairs; values near 2/3 or above are re-solved exactly."""
    rng = np.random.default_rng(seed)
    indices = [int(i) for i in rng.choice(symmetric_lp_count(), size=n, replace=False)]
    best, best_i, count = _scan(indices, GOLDEN, jobs, None)
    return ExhaustiveResult(best, best_i, count, False)
