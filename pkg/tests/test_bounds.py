"""
Tests for the deterministic, Hoelder and stochastic disturbance bounds.
"""

import numpy as np
import pytest

from algostab.bounds import (
    deterministic_bound,
    deterministic_bound_series,
    holder_bound,
    merge_reports,
    steady_state_bound,
    stochastic_bound,
    stochastic_bound_series,
    stochastic_steady_state_bound,
    verify_trajectory_bound,
)
from algostab.dynamics import linear_system, simulate
from algostab.errors import InputError
from algostab.metrics import constant_schedule, example25_schedule


def test_zero_disturbance_gives_nominal_decay():
    """Without disturbances only c0 P(0, k) d0 remains."""
    schedule = constant_schedule(0.5)
    assert deterministic_bound(1.0, schedule, 2.0, 1.0, 1.0, 0.0, 3) == pytest.approx(0.25)
    assert deterministic_bound(3.0, schedule, 2.0, 1.0, 1.0, 0.0, 0) == pytest.approx(6.0)


def test_constant_disturbance_accumulates():
    """0.25 + 0.5 + 1 weighted by 0.1."""
    schedule = constant_schedule(0.5)
    assert deterministic_bound(1.0, schedule, 0.0, 1.0, 1.0, 0.1, 3) == pytest.approx(0.175)
    series = deterministic_bound_series(1.0, schedule, 0.0, 1.0, 1.0, 0.1, 3)
    assert series == pytest.approx([0.0, 0.1, 0.15, 0.175])


def test_series_matches_pointwise_bound():
    """The recursive series equals the closed form for a varying schedule."""
    schedule = example25_schedule()
    e = np.linspace(0.0, 1.0, 12)
    series = deterministic_bound_series(2.0, schedule, 1.5, 3.0, 0.5, e, 12)
    for k in (0, 1, 5, 12):
        assert series[k] == pytest.approx(deterministic_bound(2.0, schedule, 1.5, 3.0, 0.5, e, k))


def test_holder_bound_dominates():
    """Every Hoelder exponent gives a bound no smaller than the deterministic one."""
    schedule = example25_schedule()
    e = np.abs(np.sin(np.arange(10)))
    exact = deterministic_bound(1.0, schedule, 1.0, 2.0, 1.0, e, 10)
    for p in (1.0, 2.0, 3.0, np.inf):
        assert holder_bound(1.0, schedule, 1.0, 2.0, 1.0, e, 10, p) >= exact - 1e-12
    with pytest.raises(InputError):
        holder_bound(1.0, schedule, 1.0, 2.0, 1.0, e, 10, 0.5)


def test_steady_state_is_series_limit():
    """L_V L_e Delta / (1 - tau) is the limit of the constant-disturbance series."""
    limit = steady_state_bound(1.0, 1.0, 0.1, 0.5)
    assert limit == pytest.approx(0.2)
    series = deterministic_bound_series(1.0, constant_schedule(0.5), 1.0, 1.0, 1.0, 0.1, 60)
    assert series[-1] == pytest.approx(limit)
    with pytest.raises(InputError):
        steady_state_bound(1.0, 1.0, 0.1, 1.0)


def test_stochastic_bound():
    """Gains enter squared with the L_H sigma2 / 2 factor."""
    schedule = constant_schedule(0.5)
    assert stochastic_bound(1.0, schedule, 1.0, 2.0, 0.1, 1.0, 1) == pytest.approx(0.6)
    series = stochastic_bound_series(1.0, schedule, 1.0, 2.0, 0.1, 1.0, 80)
    assert series[1] == pytest.approx(0.6)
    assert series[-1] == pytest.approx(stochastic_steady_state_bound(2.0, 1.0, 0.1, 0.5))


def test_sequences_must_cover_horizon():
    """A disturbance sequence shorter than k is rejected."""
    with pytest.raises(InputError):
        deterministic_bound(1.0, constant_schedule(0.5), 1.0, 1.0, 1.0, [0.1, 0.1], 3)


def test_trajectory_meets_tight_bound():
    """x' = 0.5 x + 0.1 attains the bound exactly and passes."""
    sys = linear_system([[0.5]], B=[[1.0]])
    trajectory = simulate(sys, [1.0], 20, disturbance=lambda k, z: np.array([0.1]))
    bound = deterministic_bound_series(1.0, constant_schedule(0.5), 1.0, 1.0, 1.0, 0.1, 20)
    report = verify_trajectory_bound(trajectory.metric_values, bound, constants_used={"c0": 1.0})
    assert report.passed
    assert report.constants_used == {"c0": 1.0}


def test_trajectory_violation_reported_per_step():
    """A halved bound is exceeded at every k."""
    empirical = np.array([1.0, 0.5, 0.25])
    report = verify_trajectory_bound(empirical, empirical / 2)
    assert not report.passed
    assert [v.k for v in report.violations] == [0, 1, 2]
    assert report.violations[0].check == "deterministic_bound"


def test_stochastic_check_uses_ensemble_mean():
    """An ensemble whose mean sits just below the bound passes the lower-confidence check."""
    rng = np.random.default_rng(0)
    ensemble = 1.0 + 0.1 * rng.standard_normal((500, 4))
    report = verify_trajectory_bound(ensemble, np.full(4, 1.05), stochastic=True)
    assert report.passed
    assert len(report.empirical_series) == 4


def test_merge_reports_keeps_worst():
    """Merged reports take the elementwise max and the largest excess per k."""
    bound = [1.0, 1.0]
    a = verify_trajectory_bound([1.5, 0.5], bound)
    b = verify_trajectory_bound([1.2, 2.0], bound)
    merged = merge_reports([a, b])
    assert merged.empirical_series == pytest.approx([1.5, 2.0])
    assert [(v.k, v.excess) for v in merged.violations] == [(0, pytest.approx(0.5)), (1, pytest.approx(1.0))]
    with pytest.raises(InputError):
        merge_reports([])
