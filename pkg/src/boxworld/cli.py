"""boxworld command line: validate, correlate, inequality, optimize, constructions, reproduce-paper.

Numbers go to stdout as JSON, a one-line summary to stderr.
Exit codes: 0 success or valid, 1 domain failure, 2 I/O or format failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction

from . import constructions
from .inequalities import (
    BOUND_TABLE,
    Correlation,
    ShapeError,
    causal_vertices,
    evaluate,
    is_causal,
    signaling_profile,
    two_way_signaling_bound,
)
from .operations import Instrument, is_nonsignaling_instrument, validate_instrument
from .processes import (
    A_BEFORE_B,
    B_BEFORE_A,
    NONSIGNALING,
    ProcessTensor,
    born_rule,
    causal_class,
    class_report,
    is_ordered,
    is_valid_process,
)
from .tensor_core import FLOAT, RATIONAL

EXIT_OK, EXIT_DOMAIN, EXIT_FORMAT = 0, 1, 2
INEQUALITIES = ("gyni", "lgyni", "ocb")
CLASSES = ("operation", "process", "nsp", "boxworld", "causal-order")


class FormatError(Exception):
    """Unreadable or malformed input."""


class DomainError(Exception):
    """Well-formed input that fails a validity requirement."""


@dataclass
class RunManifest:
    command: str
    arguments: dict
    seed: int | None
    backend: str
    wall_time: float
    result_digest: str


def num(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, int):
        return str(v)
    return float(v)


def digest(result) -> str:
    return hashlib.sha256(json.dumps(result, sort_keys=True).encode()).hexdigest()


def env_backend(flag: str | None, default: str) -> str:
    b = flag or os.environ.get("BOXWORLD_BACKEND") or default
    if b not in (RATIONAL, FLOAT):
        raise FormatError(f"backend must be {RATIONAL!r} or {FLOAT!r}, got {b!r}")
    return b


def env_jobs(flag: int | None) -> int:
    if flag is not None:
        return flag
    try:
        return int(os.environ.get("BOXWORLD_JOBS", "1"))
    except ValueError:
        raise FormatError("BOXWORLD_JOBS must be an integer") from None


# loading


def read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _kind(obj) -> str:
    if not isinstance(obj, dict):
        raise FormatError("expected a JSON object")
    if "kind" in obj:
        return obj["kind"]
    if "process" in obj and "instruments" in obj:
        return "construction"
    if "axes" in obj:
        return "tensor"
    raise FormatError("cannot tell what the JSON object holds")


def _parse(fn, obj):
    try:
        return fn(obj)
    except (FormatError, DomainError):
        raise
    except Exception as exc:
        raise FormatError(f"malformed input: {exc}") from exc


def load_process(obj) -> ProcessTensor:
    k = _kind(obj)
    if k == "construction":
        obj = obj["process"]
    elif k not in ("process", "tensor"):
        raise FormatError(f"expected a process, got {k!r}")
    return _parse(ProcessTensor.from_json, obj if "tensor" in obj else {"tensor": obj})


def load_instrument(obj, party: str | None = None) -> Instrument:
    k = _kind(obj)
    if k == "construction":
        if party is None:
            raise FormatError("a construction holds two instruments; choose one with --party")
        obj = obj["instruments"].get(party)
        if obj is None:
            raise FormatError(f"no instrument for party {party!r}")
    elif k != "instrument":
        raise FormatError(f"expected an instrument, got {k!r}")
    t = _parse(Instrument.from_json, obj)
    if party is not None and t.party != party:
        raise FormatError(f"instrument belongs to party {t.party!r}, expected {party!r}")
    return t


def load_correlation(obj) -> Correlation:
    k = _kind(obj)
    if k == "construction":
        obj = obj["expected_correlation"]
    elif k not in ("correlation", "tensor"):
        raise FormatError(f"expected a correlation, got {k!r}")
    return _parse(Correlation.from_json, obj)


# commands


def inequality_values(p: Correlation) -> dict:
    out = {}
    for which in INEQUALITIES:
        try:
            out[which] = num(evaluate(which, p))
        except ShapeError:
            pass
    return out


def cmd_validate(args) -> tuple[dict, int, str]:
    obj = read_json(args.file)
    cls = args.cls
    if cls == "operation":
        parties = [args.party] if args.party or _kind(obj) != "construction" else ["A", "B"]
        reports = {}
        for party in parties:
            t = load_instrument(obj, party)
            rep = validate_instrument(t).to_json()
            if rep["valid"]:
                rep["nonsignaling"] = is_nonsignaling_instrument(t)
            reports[t.party] = rep
        ok = all(r["valid"] for r in reports.values())
        return {"class": cls, "valid": ok, "reports": reports}, EXIT_OK if ok else EXIT_DOMAIN, \
            f"operation: {'valid' if ok else 'invalid'}"
    if cls == "causal-order" and _kind(obj) in ("correlation",):
        p = load_correlation(obj)
        ok = is_causal(p)
        return {"class": cls, "valid": ok, "causal": ok, "signaling": signaling_profile(p).to_json()}, \
            EXIT_OK if ok else EXIT_DOMAIN, f"correlation is {'causal' if ok else 'noncausal'}"
    w = load_process(obj)
    if cls == "causal-order":
        rep = class_report(w, "boxworld").to_json()
        result = {"class": cls, "valid": False, "report": rep,
                  "ordered": {A_BEFORE_B: is_ordered(w, A_BEFORE_B), B_BEFORE_A: is_ordered(w, B_BEFORE_A)}}
        if rep["valid"]:
            c = causal_class(w)
            result["causal_class"] = c
            result["valid"] = c in (A_BEFORE_B, B_BEFORE_A, NONSIGNALING)
        else:
            result["causal_class"] = None
        ok = result["valid"]
        return result, EXIT_OK if ok else EXIT_DOMAIN, f"causal class: {result['causal_class']}"
    rep = class_report(w, cls).to_json()
    ok = rep["valid"]
    return {"class": cls, **rep}, EXIT_OK if ok else EXIT_DOMAIN, \
        f"{cls}: {'valid' if ok else 'invalid, failed ' + ', '.join(rep['failed'])}"


def cmd_correlate(args) -> tuple[dict, int, str]:
    w = load_process(read_json(args.process))
    ta = load_instrument(read_json(args.alice), "A")
    tb = load_instrument(read_json(args.bob), "B")
    bad = [n for n, ok in (("process", is_valid_process(w)), ("alice", validate_instrument(ta).ok),
                           ("bob", validate_instrument(tb).ok)) if not ok]
    if bad:
        raise DomainError(f"invalid input: {', '.join(bad)}")
    p = born_rule(w, ta, tb)
    prof = signaling_profile(p)
    return {"correlation": p.to_json(), "inequalities": inequality_values(p), "signaling": prof.to_json()}, \
        EXIT_OK, f"signaling: {prof.kind}"


def cmd_inequality(args) -> tuple[dict, int, str]:
    p = load_correlation(read_json(args.correlation))
    try:
        v = evaluate(args.which, p)
    except ShapeError as exc:
        raise FormatError(str(exc)) from exc
    return {"which": args.which, "value": num(v), "causal_bound": num(BOUND_TABLE[args.which].causal)}, EXIT_OK, \
        f"{args.which} = {v}"


BOUND_CONSTANTS = {1: Fraction(1, 2), 2: Fraction(3, 4), 3: Fraction(5, 6), 4: Fraction(7, 8)}
FIXED = {(2, "gyni"): "gyni_bit", (3, "gyni"): "gyni_trit", (2, "lgyni"): "lgyni", (2, "ocb"): "ocb"}


def cmd_optimize(args) -> tuple[dict, int, str]:
    from .optimizer import LongRunRefused, exhaustive_symmetric_gyni, max_over_processes, seesaw, \
        subsample_symmetric_gyni

    which, mode = args.objective, args.mode
    jobs = env_jobs(args.jobs)
    if mode == "fixed":
        name = FIXED.get((args.dims, which))
        if name is None:
            raise FormatError(f"no fixed instruments for {which} at dims {args.dims}")
        backend = env_backend(args.backend, RATIONAL)
        c = constructions.get(name)
        opt = max_over_processes(which, *c.instruments, backend=backend)
        return {"value": num(opt.value), "process": opt.process.to_json(),
                "instruments": {t.party: t.to_json() for t in c.instruments}, "trace": [num(opt.value)],
                "construction": name, "backend": backend}, EXIT_OK, f"{which} max over W = {opt.value}"
    if mode == "seesaw":
        backend = env_backend(args.backend, FLOAT)
        stop_at = Fraction(args.stop_at) if args.stop_at else None
        res = seesaw(which, args.dims, restarts=args.restarts, seed=args.seed, symmetric=args.symmetric,
                     backend=backend, jobs=jobs, stop_at=stop_at)
        out = res.to_json()
        out["backend"] = backend
        return out, EXIT_OK, f"{which} seesaw best = {res.value} (certified: {res.certified})"
    if which != "gyni" or args.dims != 2:
        raise FormatError("exhaustive-symmetric is defined for gyni at dims 2")
    if args.subsample:
        res = subsample_symmetric_gyni(args.subsample, seed=args.seed, jobs=jobs)
    else:
        try:
            res = exhaustive_symmetric_gyni(long_run=args.long_run, checkpoint=args.checkpoint, jobs=jobs)
        except LongRunRefused as exc:
            raise DomainError(str(exc)) from exc
    out = res.to_json()
    out.update({"process": None, "instruments": None, "trace": []})
    return out, EXIT_OK, f"symmetric GYNI max over {res.count} LPs = {res.value}"


def cmd_constructions(args) -> tuple[dict, int, str]:
    if args.action == "list":
        return {"constructions": sorted(constructions.CATALOG)}, EXIT_OK, f"{len(constructions.CATALOG)} constructions"
    if args.name not in constructions.CATALOG:
        raise FormatError(f"unknown construction {args.name!r}; choose from {sorted(constructions.CATALOG)}")
    return constructions.get(args.name).to_json(), EXIT_OK, f"dumped {args.name}"


def reproduce_rows(backend: str = RATIONAL) -> list[dict]:
    """Recompute the boxworld and causal bound values and compare them to the stored constants."""
    from .optimizer import max_over_processes

    rows = []

    def row(label, computed, expected):
        rows.append({"quantity": label, "computed": num(computed), "expected": num(expected),
                     "pass": computed == expected})

    for name, which, expected in (("gyni_bit", "gyni", Fraction(2, 3)), ("gyni_trit", "gyni", Fraction(3, 4)),
                                  ("lgyni", "lgyni", Fraction(11, 12)), ("ocb", "ocb", Fraction(1))):
        c = constructions.get(name)
        row(f"{which}({name}) construction", evaluate(which, c.correlation()), expected)
        row(f"{which}({name}) max over boxworld W", max_over_processes(which, *c.instruments, backend=backend).value,
            expected)
    for d, expected in BOUND_CONSTANTS.items():
        row(f"two-way signaling bound d={d}", two_way_signaling_bound(d), expected)
    for which in INEQUALITIES:
        y = 4 if which == "ocb" else 2
        best = max(evaluate(which, p) for _, p in causal_vertices(y=y))
        row(f"{which} causal maximum", best, BOUND_TABLE[which].causal)
    return rows


def cmd_reproduce(args) -> tuple[dict, int, str]:
    backend = env_backend(args.backend, RATIONAL)
    rows = reproduce_rows(backend)
    reference = {k: {"process_matrix": b.process_matrix, "note": b.process_matrix_note, "boxworld": b.boxworld_note}
                 for k, b in BOUND_TABLE.items()}
    for r in rows:
        print(f"{'PASS' if r['pass'] else 'FAIL'}  {r['quantity']}: {r['computed']} (expected {r['expected']})",
              file=sys.stderr)
    ok = all(r["pass"] for r in rows)
    return {"rows": rows, "reference_only": reference, "pass": ok}, EXIT_OK if ok else EXIT_DOMAIN, \
        f"{sum(r['pass'] for r in rows)}/{len(rows)} rows match"


# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boxworld", description="Higher-order boxworld toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate an operation, process or correlation")
    p.add_argument("file")
    p.add_argument("--class", dest="cls", choices=CLASSES, required=True)
    p.add_argument("--party", choices=("A", "B"))
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("correlate", help="Born rule W * T^A * T^B")
    p.add_argument("process")
    p.add_argument("alice")
    p.add_argument("bob")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("inequality", help="evaluate a causal inequality")
    isub = p.add_subparsers(dest="action", required=True)
    q = isub.add_parser("eval")
    q.add_argument("--which", choices=INEQUALITIES, required=True)
    q.add_argument("--correlation", required=True)
    q.set_defaults(func=cmd_inequality)

    p = sub.add_parser("optimize", help="maximize an inequality over boxworld processes")
    p.add_argument("--objective", choices=INEQUALITIES, required=True)
    p.add_argument("--dims", type=int, choices=(2, 3), default=2)
    p.add_argument("--mode", choices=("fixed", "seesaw", "exhaustive-symmetric"), default="fixed")
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--symmetric", action="store_true", help="seesaw with Bob's instrument equal to Alice's")
    p.add_argument("--stop-at", help="end the seesaw once a restart reaches this value, e.g. 1 or 2/3")
    p.add_argument("--long-run", action="store_true", help="allow the full exhaustive search")
    p.add_argument("--checkpoint", help="append-only checkpoint file for the exhaustive search")
    p.add_argument("--subsample", type=int, help="solve this many random symmetric LPs instead")
    p.add_argument("--jobs", type=int)
    p.add_argument("--backend", choices=(RATIONAL, FLOAT))
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("constructions", help="list or dump the explicit constructions")
    p.add_argument("action", choices=("list", "dump"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_constructions)

    p = sub.add_parser("reproduce-paper", help="recompute the boxworld and causal bound values")
    p.add_argument("--backend", choices=(RATIONAL, FLOAT))
    p.set_defaults(func=cmd_reproduce)
    return ap


def _backend_of(args) -> str:
    b = getattr(args, "backend", None)
    if b:
        return b
    default = FLOAT if getattr(args, "mode", "fixed") != "fixed" else RATIONAL
    return os.environ.get("BOXWORLD_BACKEND") or default


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_FORMAT if exc.code else EXIT_OK
    if args.command == "constructions" and args.action == "dump" and not args.name:
        print("constructions dump needs a name", file=sys.stderr)
        return EXIT_FORMAT
    start = time.perf_counter()
    try:
        result, code, summary = args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except DomainError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    arguments = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = RunManifest(args.command, arguments, getattr(args, "seed", None), _backend_of(args),
                           time.perf_counter() - start, digest(result))
    result["manifest"] = asdict(manifest)
    json.dump(result, sys.stdout, indent=1)
    sys.stdout.write("\n")
    print(summary, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
