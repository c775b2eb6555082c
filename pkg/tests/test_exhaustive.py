from fractions import Fraction

import numpy as np
import pytest

from boxworld.constructions import instrument_from_function
from boxworld.operations import ALL_BIT, validate_instrument
from boxworld.optimizer.exhaustive import (
    ExhaustiveResult,
    LongRunRefused,
    components_per_setting,
    exhaustive_symmetric_gyni,
    instrument_array,
    solve_index,
    subsample_symmetric_gyni,
    symmetric_lp_count,
)
from boxworld.optimizer.programs import max_over_processes


def _instrument(index: int, party: str):
    t = instrument_array(index)
    return instrument_from_function(party, ALL_BIT, lambda a, x, i, op, ip, o: int(t[a, x, i, op, ip, o]))


class TestCounts:
    def test_counts(self):
        assert components_per_setting() == 1024
        assert symmetric_lp_count() == 1024 ** 2 == 1048576

    def test_instruments_valid_and_deterministic(self):
        for index in (0, 1, 1023, 1024, 777777, symmetric_lp_count() - 1):
            t = instrument_array(index)
            assert set(np.unique(t)) <= {0, 1}
            assert validate_instrument(_instrument(index, "A")).ok


class TestObjective:
    @pytest.mark.parametrize("index", [0, 5, 4097, 123456, 1048575])
    def test_matches_object_level_lp(self, index):
        want = max_over_processes("gyni", _instrument(index, "A"), _instrument(index, "B"),
                                  backend="rational").value
        assert solve_index(index, exact_above=0) == want
        assert solve_index(index) == pytest.approx(float(want), abs=1e-9)


class TestSearch:
    def test_refused_without_flag(self):
        with pytest.raises(LongRunRefused):
            exhaustive_symmetric_gyni()

    def test_checkpoint_resume(self, tmp_path):
        ck = str(tmp_path / "ck.txt")
        first = exhaustive_symmetric_gyni(long_run=True, checkpoint=ck, stop=300)
        assert first.count == 300 and not first.complete
        assert len(open(ck).read().splitlines()) == 300
        second = exhaustive_symmetric_gyni(long_run=True, checkpoint=ck, stop=600)
        lines = open(ck).read().splitlines()
        assert [int(line.split()[0]) for line in lines] == list(range(600))
        fresh = exhaustive_symmetric_gyni(long_run=True, stop=600)
        assert second.value == fresh.value and second.best_index == fresh.best_index
        assert second.value <= Fraction(2, 3)

    def test_subsample(self):
        r = subsample_symmetric_gyni(50, seed=1)
        assert isinstance(r, ExhaustiveResult) and r.count == 50 and not r.complete
        assert r.value <= Fraction(2, 3)
        assert r.to_json()["lps"] == 50
