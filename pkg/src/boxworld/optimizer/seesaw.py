"""Seesaw: alternate LPs over W, T^A and T^B, each step never lowering the objective."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from ..operations import Instrument, OpDims, random_deterministic_instrument, validate_instrument
from ..processes import ProcessDims, ProcessTensor, uniform_process
from ..tensor_core import FLOAT, RATIONAL
from .programs import max_over_instrument, max_over_processes

DEFAULT_RESTARTS = 64
FLOAT_IMPROVEMENT = 1e-9
MAX_DENOMINATOR = 10 ** 6


def seesaw_dims(d: int, ip: int | None = None) -> ProcessDims:
    """Wires of cardinality d. I' defaults to trivial from d = 3 on, where it is irrelevant and a
    ternary I' makes the process LP 9 times larger."""
    if ip is None:
        ip = d if d <= 2 else 1
    op = OpDims(ip, d, d, d)
    return ProcessDims(op, op)


def setting_cards(which: str) -> tuple[int, int]:
    return (2, 4) if which.lower() == "ocb" else (2, 2)


@dataclass
class SeesawState:
    ta: Instrument
    tb: Instrument
    w: ProcessTensor
    seed: int
    tol: float
    trace: list = field(default_factory=list)

    def record(self, value):
        if self.trace and value < self.trace[-1] - (self.tol if isinstance(value, float) else 0):
            raise AssertionError(f"seesaw step lowered the objective: {self.trace[-1]} -> {value}")
        self.trace.append(value)

    @property
    def value(self):
        return self.trace[-1] if self.trace else None


@dataclass
class SeesawResult:
    value: object
    process: ProcessTensor
    instruments: tuple[Instrument, Instrument]
    traces: list
    best_restart: int
    certified: bool = False

    def to_json(self) -> dict:
        def num(v):
            return str(v) if isinstance(v, Fraction) else float(v)
        return {"value": num(self.value), "certified": self.certified, "best_restart": self.best_restart,
                "process": self.process.to_json(),
                "instruments": {t.party: t.to_json() for t in self.instruments},
                "trace": [[num(v) for v in tr] for tr in self.traces]}


def _initial(which: str, dims: ProcessDims, seed: int, symmetric: bool, backend: str):
    xa, xb = setting_cards(which)
    mode = RATIONAL if backend == RATIONAL else FLOAT
    da = OpDims(dims.a.ip, dims.a.i, dims.a.o, dims.a.op, 2, xa)
    db = OpDims(dims.b.ip, dims.b.i, dims.b.o, dims.b.op, 2, xb)
    ta = random_deterministic_instrument(da, seed=seed, party="A", mode=mode)
    tb = ta.relabel_party("B") if symmetric else random_deterministic_instrument(db, seed=seed + 10 ** 6, party="B",
                                                                               mode=mode)
    return ta, tb, uniform_process(dims, mode=mode)


def _improved(new, old, tol) -> bool:
    if old is None:
        return True
    return new > old + tol if isinstance(new, float) else new > old


def run_restart(which: str, dims: ProcessDims, seed: int, symmetric: bool = False, backend: str = FLOAT,
                tol: float = FLOAT_IMPROVEMENT, max_rounds: int = 50) -> SeesawState:
    """One seesaw restart. Each round optimizes W, then Alice, then Bob (symmetric: Alice copied to Bob)."""
    if symmetric and (which.lower() == "ocb" or dims.a != dims.b):
        raise ValueError("symmetric seesaw needs identical parties and a symmetric inequality")
    ta, tb, w = _initial(which, dims, seed, symmetric, backend)
    st = SeesawState(ta, tb, w, seed, tol)
    for _ in range(max_rounds):
        start = st.value
        opt = max_over_processes(which, st.ta, st.tb, backend=backend)
        st.w = opt.process
        st.record(opt.value)
        a = max_over_instrument(which, st.w, st.tb, "A", backend=backend, dims=st.ta.dims)
        if symmetric:
            cand = a.instrument.relabel_party("B")
            trial = max_over_processes(which, a.instrument, cand, backend=backend)
            if trial.value < st.value - (tol if isinstance(trial.value, float) else 0):
                break
            st.ta, st.tb, st.w = a.instrument, cand, trial.process
            st.record(trial.value)
        else:
            st.ta = a.instrument
            st.record(a.value)
            b = max_over_instrument(which, st.w, st.ta, "B", backend=backend, dims=st.tb.dims)
            st.tb = b.instrument
            st.record(b.value)
        if not _improved(st.value, start, tol):
            break
    return st


def _run(args) -> SeesawState:
    return run_restart(*args)


def certify(which: str, ta: Instrument, tb: Instrument, max_denominator: int = MAX_DENOMINATOR):
    """Exact re-solve of the W LP with rationalized instruments; None if rounding breaks validity."""
    ra, rb = ta.to_rational(max_denominator), tb.to_rational(max_denominator)
    if not (validate_instrument(ra).ok and validate_instrument(rb).ok):
        return None
    return max_over_processes(which, ra, rb, backend=RATIONAL), ra, rb


def seesaw(which: str, dims: ProcessDims | int = 2, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
           symmetric: bool = False, backend: str = FLOAT, tol: float = FLOAT_IMPROVEMENT, max_rounds: int = 50,
           jobs: int = 1, stop_at=None, exact: bool = True) -> SeesawResult:
    """Best value over restarts. ``stop_at`` ends early once a restart reaches it (e.g. an algebraic maximum).

    With ``exact`` the winning float instruments are rationalized and the W LP is re-solved exactly.
    """
    if isinstance(dims, int):
        dims = seesaw_dims(dims)
    tasks = [(which, dims, seed + r, symmetric, backend, tol, max_rounds) for r in range(restarts)]
    states: list[SeesawState] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for st in ex.map(_run, tasks):
                states.append(st)
                if stop_at is not None and st.value >= stop_at - tol:
                    break
    else:
        for t in tasks:
            st = _run(t)
            states.append(st)
            if stop_at is not None and st.value >= stop_at - tol:
                break
    best = max(range(len(states)), key=lambda i: (states[i].value, -i))
    st = states[best]
    value, w, ta, tb, certified = st.value, st.w, st.ta, st.tb, backend == RATIONAL
    if exact and backend != RATIONAL:
        cert = certify(which, ta, tb)
        if cert is not None:
            opt, ta, tb = cert
            value, w, certified = opt.value, opt.process, True
    return SeesawResult(value, w, (ta, tb), [s.trace for s in states], best, certified)
