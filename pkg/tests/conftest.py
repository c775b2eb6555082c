from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from boxworld.tensor_core import INPUT, OUTPUT, AxisSpec, LabeledTensor

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("repo")

NAMES = ("P", "Q", "R", "S")


@st.composite
def axes_st(draw, names=NAMES, min_size=1, max_size=3):
    chosen = draw(st.lists(st.sampled_from(names), min_size=min_size, max_size=max_size, unique=True))
    return tuple(AxisSpec(n, draw(st.integers(1, 3)), draw(st.sampled_from((INPUT, OUTPUT)))) for n in chosen)


@st.composite
def tensor_st(draw, axes=None, signed=False):
    axes = draw(axes_st()) if axes is None else axes
    n = int(np.prod([a.cardinality for a in axes]))
    lo = -5 if signed else 0
    vals = draw(st.lists(st.fractions(lo, 5, max_denominator=6), min_size=n, max_size=n))
    return LabeledTensor(axes, vals, signed=signed)


def frac_array(vals, shape):
    return np.array([Fraction(v) for v in vals], dtype=object).reshape(shape)


ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: (int(k[0]), k)):
            terminalreporter.write_line(ACCEPTANCE[key])
