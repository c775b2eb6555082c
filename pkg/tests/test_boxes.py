import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from boxworld.boxes import (
    Box,
    NsBox,
    UnsupportedError,
    bit_axes,
    deterministic_box,
    is_box,
    is_no_signaling_from,
    is_nonsignaling_box,
    ns_bit_vertices,
    pr_box,
    signals,
    uniform_box,
)
from boxworld.tensor_core import LabeledTensor, TensorError

ORDER = ["O_A", "O_B", "I_A", "I_B"]


def vec(t: LabeledTensor) -> np.ndarray:
    return np.array([float(v) for v in t.flat(ORDER)])


def ns_halfspace():
    """Equalities of the all-bit NS polytope in the (oa, ob, ia, ib) basis: normalization and both marginals."""
    rows, rhs = [], []
    idx = {k: n for n, k in enumerate(itertools.product(range(2), repeat=4))}
    for ia, ib in itertools.product(range(2), repeat=2):
        r = np.zeros(16)
        for oa, ob in itertools.product(range(2), repeat=2):
            r[idx[oa, ob, ia, ib]] = 1
        rows.append(r)
        rhs.append(1)
    for ia, oa in itertools.product(range(2), repeat=2):
        r = np.zeros(16)
        for ob in range(2):
            r[idx[oa, ob, ia, 0]] += 1
            r[idx[oa, ob, ia, 1]] -= 1
        rows.append(r)
        rhs.append(0)
    for ib, ob in itertools.product(range(2), repeat=2):
        r = np.zeros(16)
        for oa in range(2):
            r[idx[oa, ob, 0, ib]] += 1
            r[idx[oa, ob, 1, ib]] -= 1
        rows.append(r)
        rhs.append(0)
    return np.array(rows), np.array(rhs, dtype=float)


def test_pr_box_entries():
    t = pr_box().tensor
    assert t[{"O_A": 0, "O_B": 0, "I_A": 0, "I_B": 0}] == Fraction(1, 2)
    assert t[{"O_A": 1, "O_B": 1, "I_A": 0, "I_B": 0}] == Fraction(1, 2)
    assert t[{"O_A": 0, "O_B": 1, "I_A": 0, "I_B": 0}] == 0
    assert is_nonsignaling_box(t)


def test_signaling_box_detected():
    t = LabeledTensor.from_function(bit_axes(), lambda O_A, O_B, I_A, I_B: Fraction(int(O_B == I_A), 2))
    assert is_box(t)
    assert not is_nonsignaling_box(t)
    assert signals(t, "A", "B") and not signals(t, "B", "A")
    assert is_no_signaling_from(t, "B", "A")


def test_product_box_nonsignaling():
    t = LabeledTensor.from_function(bit_axes(), lambda O_A, O_B, I_A, I_B: Fraction(1 + O_A, 3) * Fraction(1, 2))
    assert is_nonsignaling_box(t)


def test_not_a_box():
    t = LabeledTensor.constant(bit_axes(), Fraction(1, 3))
    assert not is_box(t)
    with pytest.raises(TensorError):
        Box(t)


def test_signaling_nsbox_rejected():
    t = LabeledTensor.from_function(bit_axes(), lambda O_A, O_B, I_A, I_B: int(O_B == I_A and O_A == 0))
    with pytest.raises(TensorError):
        NsBox(Box(t))


class TestVertices:
    def test_count_and_membership(self):
        verts = ns_bit_vertices()
        assert len(verts) == 24
        assert all(is_nonsignaling_box(v.tensor) for v in verts)
        assert any(v.tensor == pr_box().tensor for v in verts)
        assert len({tuple(vec(v.tensor)) for v in verts}) == 24

    def test_each_is_extremal(self):
        """A point is a vertex iff its active constraints have full rank 16."""
        e, _ = ns_halfspace()
        for v in ns_bit_vertices():
            x = vec(v.tensor)
            active = np.vstack([e, np.eye(16)[x == 0]])
            assert np.linalg.matrix_rank(active) == 16

    def test_deterministic_members_are_products(self):
        verts = ns_bit_vertices()[:16]
        for v in verts:
            t = v.tensor
            ma = t.fix(I_B=0).data.sum(axis=1)
            mb = t.fix(I_A=0).data.sum(axis=0)
            prod = np.einsum("ai,bj->abij", ma, mb)
            assert np.array_equal(prod, t.transpose(ORDER).data)
            assert set(t.data.reshape(-1)) <= {0, 1}

    def test_lp_optima_are_listed(self):
        """Generic objectives over the half-space description are maximized at listed vertices."""
        e, f = ns_halfspace()
        listed = np.array([vec(v.tensor) for v in ns_bit_vertices()])
        rng = np.random.default_rng(7)
        for _ in range(60):
            c = rng.normal(size=16)
            res = linprog(-c, A_eq=e, b_eq=f, bounds=(0, None), method="highs")
            assert res.status == 0
            assert np.min(np.abs(listed - res.x).max(axis=1)) < 1e-7

    def test_unsupported(self):
        with pytest.raises(UnsupportedError):
            ns_bit_vertices(out_card=3)


@given(st.lists(st.integers(1, 9), min_size=24, max_size=24))
def test_mixtures_nonsignaling(raw):
    verts = ns_bit_vertices()
    total = sum(raw)
    acc = None
    for wt, v in zip(raw, verts):
        term = v.tensor.scale(Fraction(wt, total))
        acc = term if acc is None else acc + term
    assert is_nonsignaling_box(acc.as_checked())


@given(st.sampled_from(range(24)), st.tuples(*[st.integers(0, 1)] * 4))
def test_relabeling_preserves_ns(k, flips):
    """Flip outputs/inputs of either party (the flips may depend on nothing else)."""
    t = ns_bit_vertices()[k].tensor.transpose(ORDER)
    data = t.data
    for axis, flip in enumerate(flips):
        if flip:
            data = np.flip(data, axis=axis)
    assert is_nonsignaling_box(LabeledTensor(t.axes, data))


def test_uniform_box():
    assert is_nonsignaling_box(uniform_box(bit_axes()))


def test_deterministic_box_signaling_free():
    assert is_nonsignaling_box(deterministic_box((0, 1), (1, 1)))
