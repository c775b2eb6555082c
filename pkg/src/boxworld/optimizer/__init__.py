"""LP solver and the optimization procedures built on it."""

from .exhaustive import (
    ExhaustiveResult,
    LongRunRefused,
    exhaustive_symmetric_gyni,
    subsample_symmetric_gyni,
    symmetric_lp_count,
)
from .lp import LinearProgram, LPError, LPResult, solve, verify
from .programs import (
    BoundViolation,
    InstrumentOptimum,
    OptimizerError,
    ProcessOptimum,
    check_two_way_bound,
    evaluate_triple,
    instrument_rows,
    max_over_instrument,
    max_over_processes,
    process_rows,
)
from .seesaw import SeesawResult, SeesawState, run_restart, seesaw

__all__ = [
    "BoundViolation", "ExhaustiveResult", "InstrumentOptimum", "LPError", "LPResult", "LinearProgram",
    "LongRunRefused", "OptimizerError", "ProcessOptimum", "SeesawResult", "SeesawState", "check_two_way_bound",
    "evaluate_triple", "exhaustive_symmetric_gyni", "instrument_rows", "max_over_instrument", "max_over_processes",
    "process_rows", "run_restart", "seesaw", "solve", "subsample_symmetric_gyni", "symmetric_lp_count", "verify",
]
