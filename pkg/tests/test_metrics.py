"""
Tests for pseudometrics and rate schedules.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from algostab.errors import InputError
from algostab.metrics import (
    PseudometricSpec,
    check_pseudometric_axioms,
    constant_schedule,
    convex_slack_schedule,
    custom_table_schedule,
    euclidean,
    example25_schedule,
    loss_gap,
    phi_weight,
    phi_weight_flagged,
    phi_weights,
    pseudometric_eval,
    rate_product,
    rate_product_flagged,
    schedule_from_spec,
    strongly_convex_slack_rate,
)
from algostab.schema import Region, ScheduleSpec
from algostab.utils.numerics import HUGE, TINY


def test_euclidean_satisfies_axioms():
    """The Euclidean distance passes every sampled axiom."""
    report = check_pseudometric_axioms(euclidean(), Region.box([0.0, 0.0], 1.0), 128, seed=0)
    assert report.passed()
    assert report.failed_axioms() == []


def test_loss_gap_is_pseudometric():
    """A loss gap vanishes between distinct points with equal loss but keeps the axioms."""
    d = loss_gap(lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1), L_ell=2.0)
    assert pseudometric_eval(d, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)
    report = check_pseudometric_axioms(d, Region.box([0.0, 0.0], 1.0), 128, seed=1)
    assert report.passed()


def test_squared_distance_fails_triangle():
    """|x - y|^2 breaks the triangle inequality and is reported, not raised."""
    d = PseudometricSpec(eval=lambda x, y: float(np.sum((np.asarray(x) - np.asarray(y)) ** 2)), norm_bound_Ld=10.0)
    report = check_pseudometric_axioms(d, Region.box([0.0, 0.0], 1.0), 256, seed=0)
    assert not report.passed()
    assert any("triangle" in failure for failure in report.failed_axioms())


def test_pseudometric_dimension_mismatch():
    """Evaluating on vectors of different length raises."""
    with pytest.raises(InputError):
        pseudometric_eval(euclidean(), [1.0, 2.0], [1.0])


def test_example25_product_telescopes():
    """prod_{i=k}^{k+k'-1} (1 - 1/(i+5)) = (k+4)/(k+k'+4)."""
    schedule = example25_schedule()
    assert rate_product(schedule, 3, 5) == pytest.approx(7.0 / 12.0)
    assert rate_product(schedule, 0, 1) == pytest.approx(0.8)
    assert rate_product(schedule, 4, 0) == 1.0


def test_phi_weights_invert_products():
    """Phi(k, k') is the reciprocal of the rate product."""
    schedule = example25_schedule()
    weights = phi_weights(schedule, 2, 4)
    assert len(weights) == 5
    assert weights[0] == 1.0
    for kprime in range(5):
        assert weights[kprime] == pytest.approx(1.0 / rate_product(schedule, 2, kprime))
        assert phi_weight(schedule, 2, kprime) == pytest.approx(weights[kprime])


def test_zero_rate_clamps_with_flag():
    """tau = 0 gives an exact-one-step product, clamped to the smallest normal."""
    value, clamped = rate_product_flagged(constant_schedule(0.0), 0, 2)
    assert clamped
    assert value == TINY


def test_phi_weight_overflow_flag():
    """A tiny constant rate over many steps overflows the weight."""
    value, clamped = phi_weight_flagged(constant_schedule(1e-5), 0, 100)
    assert clamped
    assert value == HUGE


def test_schedule_rejects_increasing_or_large_rates():
    """Rates above one or decreasing over i are invalid."""
    with pytest.raises(InputError):
        constant_schedule(1.5)
    with pytest.raises(InputError):
        custom_table_schedule([0.9, 0.5])


def test_custom_table_repeats_last_value():
    """Indices beyond the table reuse its last entry."""
    schedule = custom_table_schedule([0.5, 0.75])
    assert schedule.tau(0) == 0.5
    assert schedule.tau(10) == 0.75


def test_slack_rates():
    """Slackened rates for strongly and merely convex problems."""
    assert strongly_convex_slack_rate(3.0, 1.0, 1.0) == pytest.approx(0.5)
    assert strongly_convex_slack_rate(3.0, 1.0, 0.5) == pytest.approx(0.625)
    assert convex_slack_schedule(0.5).tau(0) == pytest.approx(np.sqrt(0.5))
    with pytest.raises(InputError):
        strongly_convex_slack_rate(3.0, 1.0, 0.0)


def test_schedule_from_spec():
    """Config records build schedules with their constants."""
    schedule = schedule_from_spec(ScheduleSpec(kind="constant", tau=0.5, c0=2.0, horizon_K=3))
    assert schedule.tau(7) == 0.5
    assert schedule.c0 == 2.0
    assert schedule.horizon_K == 3
    assert schedule_from_spec(ScheduleSpec(kind="custom-table", table=[0.2, 0.4])).tau(5) == 0.4


def test_schedule_spec_requires_parameters():
    """A constant schedule without tau is a configuration error."""
    with pytest.raises(ValidationError):
        ScheduleSpec(kind="constant")
