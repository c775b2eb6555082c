from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from boxworld.constructions import gyni_bit, gyni_trit, lgyni, ocb
from boxworld.inequalities import coefficient_tensor
from boxworld.operations import ALL_BIT, OpDims, enumerate_deterministic_instruments, random_instrument
from boxworld.optimizer.lp import LPResult
from boxworld.optimizer.programs import (
    BoundViolation,
    OptimizerError,
    check_two_way_bound,
    evaluate_triple,
    max_over_instrument,
    max_over_processes,
    process_rows,
    sparse_process_system,
)
from boxworld.processes import (
    ALL_BIT_PROCESS,
    ProcessDims,
    embed_process,
    is_boxworld_process,
    random_process,
    satisfies_nsp,
    uniform_process,
)
from boxworld.tensor_core import LabeledTensor

GOLDEN = [(gyni_bit, "gyni", Fraction(2, 3)), (lgyni, "lgyni", Fraction(11, 12)), (ocb, "ocb", Fraction(1))]


class TestProcessLP:
    @pytest.mark.parametrize("make,which,want", GOLDEN)
    def test_golden(self, make, which, want):
        c = make()
        opt = max_over_processes(which, *c.instruments, backend="rational")
        assert opt.value == want
        assert is_boxworld_process(opt.process)
        assert evaluate_triple(which, opt.process, *c.instruments) == want

    def test_trit(self):
        c = gyni_trit()
        opt = max_over_processes("gyni", *c.instruments, backend="rational")
        assert opt.value == Fraction(3, 4)

    def test_zero_objective(self):
        zero = LabeledTensor.constant(coefficient_tensor("gyni").axes, 0)
        c = gyni_bit()
        assert max_over_processes(zero, *c.instruments, backend="rational").value == 0

    @pytest.mark.parametrize("make,which,want", GOLDEN)
    def test_construction_process_feasible(self, make, which, want):
        """The construction's own W is feasible, so the LP is at least its value."""
        c = make()
        assert evaluate_triple(which, c.process, *c.instruments) == want
        e, f = process_rows(c.process.dims)
        w = c.process.tensor.transpose([a.name for a in c.process.dims.axes()]).data.reshape(-1)
        assert all(sum(Fraction(int(v)) * x for v, x in zip(row, w) if v) == rhs for row, rhs in zip(e, f))

    def test_float_matches_rational(self):
        for seed in range(5):
            ta = random_instrument(ALL_BIT, seed=seed, party="A")
            tb = random_instrument(ALL_BIT, seed=seed + 100, party="B")
            ex = max_over_processes("lgyni", ta, tb, backend="rational").value
            fl = max_over_processes("lgyni", ta, tb, backend="float").value
            assert fl == pytest.approx(float(ex), abs=1e-9)

    def test_other_classes(self):
        c = gyni_bit()
        nsp = max_over_processes("gyni", *c.instruments, backend="rational", kind="nsp")
        assert nsp.value >= Fraction(2, 3) and satisfies_nsp(nsp.process)
        gen = max_over_processes("gyni", *c.instruments, backend="rational", kind="general")
        assert gen.value >= nsp.value

    def test_bound_scoped_to_boxworld(self):
        """Beyond boxworld perfect two-way signaling is reachable, as with W△."""
        c = gyni_bit()
        assert max_over_processes("gyni", *c.instruments, backend="rational", kind="general").value == 1

    def test_instrument_lp_against_non_boxworld(self):
        from boxworld.constructions import triangle_construction as triangle
        c = triangle()
        w = embed_process(c.process, ALL_BIT_PROCESS)
        opt = max_over_instrument("gyni", w, random_instrument(ALL_BIT, seed=1, party="B"), "A", backend="rational")
        assert 0 <= opt.value <= 1

    def test_sparse_system_matches_dense(self):
        """The marginal formulation has the same feasible W set: same optimum for random objectives."""
        e, f = process_rows(ALL_BIT_PROCESS)
        es, fs, n = sparse_process_system(ALL_BIT_PROCESS)
        rng = np.random.default_rng(0)
        for _ in range(5):
            c = rng.normal(size=n)
            r1 = linprog(-c, A_eq=e.astype(float), b_eq=f.astype(float), bounds=(0, None), method="highs")
            r2 = linprog(-np.r_[c, np.zeros(es.shape[1] - n)], A_eq=es, b_eq=fs, bounds=(0, None), method="highs")
            assert -r1.fun == pytest.approx(-r2.fun, abs=1e-8)

    def test_sparse_path_used_for_large_float(self, monkeypatch):
        import boxworld.optimizer.programs as programs
        monkeypatch.setattr(programs, "SPARSE_ABOVE", 10)
        c = gyni_bit()
        opt = max_over_processes("gyni", *c.instruments, backend="float")
        assert opt.value == pytest.approx(2 / 3, abs=1e-9) and is_boxworld_process(opt.process)

    def test_revalidation_failure_raises(self, monkeypatch):
        import boxworld.optimizer.programs as programs
        n = int(np.prod([a.cardinality for a in gyni_bit().process.dims.axes()]))
        bad = LPResult("optimal", Fraction(1, 2), [Fraction(0)] * (n - 1) + [Fraction(16)], "rational")
        monkeypatch.setattr(programs, "solve", lambda lp, backend=None: bad)
        with pytest.raises(OptimizerError):
            max_over_processes("lgyni", *gyni_bit().instruments, backend="rational")


class TestBound:
    def test_violation(self):
        with pytest.raises(BoundViolation):
            check_two_way_bound("gyni", ALL_BIT_PROCESS, Fraction(4, 5))
        with pytest.raises(BoundViolation):
            check_two_way_bound("gyni", ALL_BIT_PROCESS, 0.76)

    def test_within(self):
        check_two_way_bound("gyni", ALL_BIT_PROCESS, Fraction(3, 4))
        check_two_way_bound("ocb", ALL_BIT_PROCESS, Fraction(1))

    def test_optimizer_raises_on_violation(self, monkeypatch):
        import boxworld.optimizer.programs as programs
        monkeypatch.setattr(programs, "two_way_signaling_bound", lambda d: Fraction(1, 2))
        with pytest.raises(BoundViolation):
            max_over_processes("gyni", *gyni_bit().instruments, backend="rational")


class TestInstrumentLP:
    def test_ocb_alice(self):
        c = ocb()
        opt = max_over_instrument("ocb", c.process, c.instruments[1], "A", backend="rational",
                                  dims=c.instruments[0].dims)
        assert opt.value == 1

    def test_ocb_bob(self):
        c = ocb()
        opt = max_over_instrument("ocb", c.process, c.instruments[0], "B", backend="rational")
        assert opt.value == 1 and opt.instrument.setting_axis.cardinality == 4

    def test_zero_objective(self):
        c = gyni_bit()
        zero = LabeledTensor.constant(coefficient_tensor("gyni").axes, 0)
        assert max_over_instrument(zero, c.process, c.instruments[1], "A", backend="rational").value == 0

    def test_not_below_incumbent(self):
        for seed in range(4):
            w = random_process("boxworld", seed=seed)
            ta = random_instrument(ALL_BIT, seed=seed, party="A")
            tb = random_instrument(ALL_BIT, seed=seed + 7, party="B")
            opt = max_over_instrument("gyni", w, tb, "A", backend="rational")
            assert opt.value >= evaluate_triple("gyni", w, ta, tb)

    def test_same_party_rejected(self):
        c = gyni_bit()
        with pytest.raises(ValueError):
            max_over_instrument("gyni", c.process, c.instruments[0], "A")

    @pytest.mark.parametrize("which", ["gyni", "lgyni"])
    def test_matches_deterministic_brute_force(self, which):
        """Over dims with trivial I', O' the optimum equals the best deterministic instrument."""
        small = OpDims(1, 2, 2, 1)
        dims = ProcessDims(small, small)
        for seed in range(3):
            w = random_process("boxworld", dims=dims, seed=seed)
            tb = random_instrument(OpDims(1, 2, 2, 1, 2, 2), seed=seed, party="B")
            opt = max_over_instrument(which, w, tb, "A", backend="rational")
            best = max(evaluate_triple(which, w, ta, tb)
                       for ta in enumerate_deterministic_instruments(OpDims(1, 2, 2, 1, 2, 2), party="A"))
            assert opt.value == best

    def test_uniform_process_product_correlation(self):
        """Against the uniform process the correlation is a product, so GYNI is at most 1/2 here."""
        w = uniform_process()
        tb = random_instrument(ALL_BIT, seed=3, party="B")
        opt = max_over_instrument("gyni", w, tb, "A", backend="rational")
        assert opt.value <= Fraction(1, 2)
