import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxworld.constructions import gyni_bit, realize_ordered, t_triangle_A, t_triangle_B, w_diamond, w_triangle
from boxworld.inequalities import Correlation, one_way_vertices
from boxworld.operations import OpDims, random_instrument
from boxworld.processes import (
    A_BEFORE_B,
    B_BEFORE_A,
    NONE_OF_ORDERED,
    NONSIGNALING,
    ProcessDims,
    ProcessError,
    ProcessTensor,
    WA,
    WB,
    affine_decompose,
    born_rule,
    ALL_BIT_PROCESS,
    causal_class,
    embed_process,
    class_report,
    is_boxworld_process,
    is_ordered,
    is_valid_process,
    mix,
    nsp_definitional_oracle,
    nsp_directional_oracle,
    nswse_definitional_oracle,
    random_process,
    satisfies_nsp,
    uniform_process,
    validate_process_tensor,
)
from boxworld.tensor_core import LabeledTensor, reduce_and_replace

OPS = OpDims(2, 2, 2, 2, 2, 2)


def signaling_diamond():
    """Joint preparation of O_A = I_B, O_B = 0."""
    return w_diamond(Correlation.from_function(lambda a, b, x, y: int(a == y and b == 0)))


def two_way_diamond():
    return w_diamond(Correlation.from_function(lambda a, b, x, y: int(a == y and b == x)))


class TestValidity:
    @pytest.mark.parametrize("make", [two_way_diamond, signaling_diamond, w_triangle, uniform_process,
                                      lambda: gyni_bit().process])
    def test_valid(self, make):
        assert validate_process_tensor(make()).ok

    def test_uniform_entries(self):
        w = uniform_process()
        assert set(w.tensor.data.reshape(-1)) == {Fraction(1, 16)}

    def test_wrong_axes(self):
        t = uniform_process().tensor.rename({WA.i: "Z"})
        with pytest.raises(ProcessError):
            ProcessTensor(t)

    def test_negative_entry(self):
        t = uniform_process().tensor
        data = t.data.copy()
        data.flat[0] = Fraction(-1, 16)
        data.flat[1] = Fraction(3, 16)
        rep = validate_process_tensor(ProcessTensor(LabeledTensor.unchecked(t.axes, data)))
        assert "nonnegative" in rep.failed

    def test_wrong_normalization(self):
        w = ProcessTensor(uniform_process().tensor.scale(2))
        assert not is_valid_process(w)

    def test_json_roundtrip(self):
        w = gyni_bit().process
        is_boxworld_process(w)
        obj = json.loads(json.dumps(w.to_json()))
        assert set(obj["wires"]) == {"A", "B"}
        back = ProcessTensor.from_json(obj)
        assert back == w and back.class_tags == {}


class TestLadder:
    def test_diamond_not_nsp(self):
        w = signaling_diamond()
        assert is_valid_process(w) and not satisfies_nsp(w)
        e = embed_process(w, ALL_BIT_PROCESS)
        assert not satisfies_nsp(e) and not nsp_definitional_oracle(e)

    def test_triangle_nsp_not_nswse(self):
        w = w_triangle()
        assert satisfies_nsp(w) and not is_boxworld_process(w)
        e = embed_process(w, ALL_BIT_PROCESS)
        assert satisfies_nsp(e) and nsp_definitional_oracle(e)
        assert not is_boxworld_process(e) and not nswse_definitional_oracle(e)
        assert "nswse_B" in class_report(w, "boxworld").failed

    def test_diamond_not_nswse(self):
        assert not is_boxworld_process(two_way_diamond())

    def test_gyni_boxworld(self):
        w = gyni_bit().process
        assert is_boxworld_process(w) and satisfies_nsp(w)

    def test_uniform_everything(self):
        w = uniform_process()
        assert satisfies_nsp(w) and is_boxworld_process(w) and nswse_definitional_oracle(w)

    def test_invalid_input_rejected(self):
        with pytest.raises(ProcessError):
            satisfies_nsp(ProcessTensor(uniform_process().tensor.scale(2)))


class TestNspDirectional:
    """A valid process can fail the NSP equations while still mapping every NS-bit vertex to an NS box:
    the 24-vertex test alone does not see one-way signaling inputs."""

    def counterexample(self):
        from boxworld.constructions import process_from_function
        return process_from_function(
            ProcessDims(),
            lambda ipA, oA, iA, opA, ipB, oB, iB, opB: int(ipA == iB and ipB == 0 and oA == opB and oB == 0))

    def test_verdicts(self):
        w = self.counterexample()
        assert is_valid_process(w)
        assert not satisfies_nsp(w)
        assert nsp_definitional_oracle(w)
        assert not nsp_directional_oracle(w)

    def test_oracles_agree_on_nsp_processes(self):
        for seed in range(15):
            w = random_process("nsp", seed=seed)
            assert satisfies_nsp(w) and nsp_definitional_oracle(w) and nsp_directional_oracle(w)


class TestCausalClass:
    def test_ordered_construction(self):
        v = one_way_vertices(A_BEFORE_B)[7]
        c = realize_ordered(v, A_BEFORE_B)
        assert causal_class(c.process) in (A_BEFORE_B, NONSIGNALING)
        assert c.check()

    def test_signaling_ordered_construction(self):
        p = Correlation.from_function(lambda a, b, x, y: int(a == 0 and b == x))
        c = realize_ordered(p, A_BEFORE_B)
        assert causal_class(c.process) == A_BEFORE_B
        c = realize_ordered(Correlation.from_function(lambda a, b, x, y: int(b == 0 and a == y)), B_BEFORE_A)
        assert causal_class(c.process) == B_BEFORE_A

    def test_gyni_none_of_ordered(self):
        assert causal_class(gyni_bit().process) == NONE_OF_ORDERED

    def test_uniform_nonsignaling(self):
        assert causal_class(uniform_process()) == NONSIGNALING

    def test_non_boxworld_rejected(self):
        with pytest.raises(ProcessError):
            causal_class(w_triangle())


class TestAffineDecompose:
    def test_uniform(self):
        d = affine_decompose(uniform_process())
        assert d.lam == 2
        assert d.w_ab == uniform_process() and d.w_ba == uniform_process()

    @pytest.mark.parametrize("pivot", ["A", "B"])
    def test_gyni(self, pivot):
        w = gyni_bit().process
        d = affine_decompose(w, pivot=pivot)
        assert d.recombine() == w.tensor
        assert is_ordered(d.w_ab, A_BEFORE_B) and is_ordered(d.w_ba, B_BEFORE_A)
        assert is_boxworld_process(d.w_ab) and is_boxworld_process(d.w_ba)
        assert d.lam == 2

    def test_degenerate(self):
        dims = ProcessDims(OpDims(1, 2, 2, 2), OpDims(1, 2, 2, 1))
        with pytest.raises(ProcessError):
            affine_decompose(uniform_process(dims))


class TestBornRule:
    def test_diamond(self):
        from boxworld.constructions import diamond_construction
        c = diamond_construction()
        assert c.correlation() == Correlation.from_function(lambda a, b, x, y: int(a == y and b == x))

    def test_triangle(self):
        p = born_rule(w_triangle(), t_triangle_A(), t_triangle_B())
        assert p == Correlation.from_function(lambda a, b, x, y: int(a == y and b == x))

    def test_gyni(self):
        h = Fraction(1, 2)
        want = Correlation.from_function(
            lambda a, b, x, y: Fraction(1, 3) * int(a == y and b == x)
            + Fraction(2, 3) * (h * int(a == y and b == x) + h * int(a ^ 1 == y and b ^ 1 == x)))
        c = gyni_bit()
        assert c.correlation() == want

    def test_party_order(self):
        with pytest.raises(ProcessError):
            born_rule(w_triangle(), t_triangle_B(), t_triangle_A())

    @given(st.integers(0, 10 ** 6))
    def test_boxworld_gives_distributions(self, seed):
        w = random_process("boxworld", seed=seed)
        ta = random_instrument(OPS, seed=seed + 1, party="A")
        tb = random_instrument(OPS, seed=seed + 2, party="B")
        p = born_rule(w, ta, tb).tensor
        assert all(v >= 0 for v in p.data.reshape(-1))
        sums = p.data.sum(axis=(0, 1))
        assert (sums == 1).all()


class TestProperties:
    @given(st.sampled_from(["general", "nsp", "boxworld"]), st.integers(0, 10 ** 6))
    def test_implication_chain(self, kind, seed):
        w = random_process(kind, seed=seed)
        assert is_valid_process(w)
        if is_boxworld_process(w):
            assert satisfies_nsp(w)

    @given(st.integers(0, 10 ** 6))
    def test_structural_identity(self, seed):
        t = random_process("boxworld", seed=seed).tensor
        rhs = reduce_and_replace(t, [WA.op]) + reduce_and_replace(t, [WB.op]) - reduce_and_replace(t, [WA.op, WB.op])
        assert rhs == t

    @given(st.lists(st.integers(0, 10 ** 6), min_size=2, max_size=3), st.lists(st.integers(1, 9), min_size=3,
                                                                              max_size=3))
    def test_mixtures_stay_boxworld(self, seeds, raw):
        ws = [random_process("boxworld", seed=s) for s in seeds]
        wts = [Fraction(r, sum(raw[:len(ws)])) for r in raw[:len(ws)]]
        assert is_boxworld_process(mix(wts, ws))

    def test_class_strictness(self):
        """Random members of the wider classes fall outside the narrower ones."""
        assert any(not satisfies_nsp(random_process("general", seed=s)) for s in range(10))
        assert any(not is_boxworld_process(random_process("nsp", seed=s)) for s in range(10))

    def test_nswse_oracle_on_random(self):
        for kind in ("nsp", "boxworld"):
            for seed in range(6):
                w = random_process(kind, seed=seed)
                assert is_boxworld_process(w) == nswse_definitional_oracle(w)
