"""
Tests for dynamical systems, flows and simulation.
"""

import numpy as np
import pytest

from algostab.dynamics import (
    DynamicalSystem,
    check_consistency,
    distance_to_equilibrium,
    estimate_lipschitz_e,
    estimate_lipschitz_f,
    flow,
    flow_path,
    linear_system,
    simulate,
    simulate_ensemble,
    step_nominal,
)
from algostab.errors import InputError
from algostab.metrics import loss_gap
from algostab.schema import Region


def test_flow_composes_updates():
    """phi(3, 0, 8) = 0.5^3 * 8 for x <- 0.5 x."""
    sys = linear_system([[0.5]])
    assert flow(sys, 3, 0, [8.0]) == pytest.approx([1.0])
    assert flow(sys, 0, 5, [2.0]) == pytest.approx([2.0])


def test_flow_path_stacks_states():
    """flow_path returns horizon + 1 states, batched over leading axes."""
    sys = linear_system(np.diag([0.5, 0.25]))
    path = flow_path(sys, 2, 0, np.array([[1.0, 1.0], [2.0, 0.0]]))
    assert path.shape == (3, 2, 2)
    assert path[2, 0] == pytest.approx([0.25, 0.0625])


def test_affine_equilibrium_is_fixed():
    """Affine systems keep x* fixed."""
    sys = linear_system([[0.5]], B=[[1.0]], equilibrium=[3.0])
    assert step_nominal(sys, 0, [3.0]) == pytest.approx([3.0])
    assert sys.gain(0) == pytest.approx(1.0)


def test_dimension_mismatch_raises():
    """A state of the wrong length is rejected."""
    sys = linear_system(np.eye(2) * 0.5)
    with pytest.raises(InputError):
        step_nominal(sys, 0, [1.0, 2.0, 3.0])
    with pytest.raises(InputError):
        flow(sys, 1, -1, [1.0, 2.0])


def test_consistency_passes_for_linear_system():
    """g(z, 0) = f(z) and f(x*) = x* hold for affine systems."""
    sys = linear_system(np.diag([0.5, 0.9]), B=np.eye(2))
    report = check_consistency(sys, Region.box([0.0, 0.0], 1.0), n_samples=64, k_range=3, seed=0)
    assert report.passed


def test_consistency_detects_offset_disturbance():
    """A disturbed map that differs from f at e = 0 fails the check."""
    sys = DynamicalSystem(
        dim_state=1,
        dim_disturbance=1,
        nominal=lambda k, x: 0.5 * x,
        disturbed=lambda k, z, e: 0.5 * z + e + 1e-3,
        equilibrium=np.zeros(1),
    )
    report = check_consistency(sys, Region.box([0.0], 1.0), n_samples=16, k_range=1, seed=0)
    assert not report.passed
    assert report.max_disturbed_gap > 1e-4


def test_lipschitz_estimates_stay_below_analytic():
    """Sampled slopes approach but never exceed the spectral norm."""
    sys = linear_system(np.diag([0.5, 0.25]), B=np.diag([2.0, 1.0]))
    region = Region.box([0.0, 0.0], 1.0)
    L_f = estimate_lipschitz_f(sys, region, 256, 1, seed=0)
    assert 0.4 < L_f <= 0.5 + 1e-9
    L_e = estimate_lipschitz_e(sys, 0, region, Region.disturbance_set(2, 0.5), 256, seed=0)
    assert 1.5 < L_e <= 2.0 + 1e-9


def test_lipschitz_estimate_is_nested():
    """More pairs with the same seed never lower the estimate."""
    sys = linear_system(np.array([[0.5, 0.3], [0.0, 0.4]]))
    region = Region.box([0.0, 0.0], 1.0)
    small = estimate_lipschitz_f(sys, region, 32, 1, seed=3)
    large = estimate_lipschitz_f(sys, region, 128, 1, seed=3)
    assert large >= small


def test_simulate_without_disturbance_decays():
    """Zero disturbance reproduces the nominal geometric decay."""
    sys = linear_system([[0.5]], B=[[1.0]])
    trajectory = simulate(sys, [1.0], 4)
    assert len(trajectory) == 5
    assert trajectory.metric_values == pytest.approx([1.0, 0.5, 0.25, 0.125, 0.0625])
    assert trajectory.disturbances.shape == (4, 1)


def test_simulate_with_constant_disturbance():
    """z' = 0.5 z + 0.1 settles at 0.2."""
    sys = linear_system([[0.5]], B=[[1.0]])
    trajectory = simulate(sys, [0.0], 60, disturbance=lambda k, z: np.array([0.1]))
    assert trajectory.states[-1] == pytest.approx([0.2])


def test_simulate_ensemble_shape_and_metric():
    """Ensembles run members in lockstep; metrics broadcast over members."""
    sys = linear_system(np.eye(2) * 0.5, B=np.eye(2))
    noise = np.zeros((3, 4, 2))
    states = simulate_ensemble(sys, [1.0, 0.0], noise)
    assert states.shape == (4, 4, 2)
    metric = loss_gap(lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1), L_ell=2.0)
    values = distance_to_equilibrium(sys, states, metric)
    assert values.shape == (4, 4)
    assert values[1, 0] == pytest.approx(0.125)
