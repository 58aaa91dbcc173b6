import numpy as np
import pytest

from acgm.verify import FAULTS, forced_schedule, run_checks


def test_clean_suite_passes():
    results = run_checks()
    assert len(results) >= 6
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_fault_is_caught():
    results = {r.name: r.passed for r in run_checks(fault="skip-vertex-update")}
    assert not results["gap sequence nonincreasing"]
    assert not results["vertices extrapolate from iterates"]


def test_unknown_fault():
    assert "skip-vertex-update" in FAULTS
    with pytest.raises(ValueError):
        run_checks(fault="flip-signs")


def test_forced_schedule_shape():
    s = forced_schedule(5, 300, 10.0)
    assert s.shape == (300,)
    assert np.all(np.diff(s) >= 0)
    assert s.max() <= 2 * 10.0
    np.testing.assert_array_equal(s, forced_schedule(5, 300, 10.0))
