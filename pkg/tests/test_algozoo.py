"""
Tests for the algorithm factories, problems and the stability experiment.
"""

import numpy as np
import pytest

from algostab.algozoo import (
    StepPolicy,
    factory_from_spec,
    horizon_tuned_step,
    logistic_problem,
    make_accelerated_gd,
    make_gd_convex,
    make_gd_strongly_convex,
    make_noisy_gd,
    noisy_gd_rate,
    privacy_bound_constants,
    quadratic_problem,
    ridge_problem,
    run_stability_experiment,
    stability_bound,
    step_schedule,
    synthetic_classification_dataset,
    synthetic_ridge_dataset,
)
from algostab.dynamics import simulate
from algostab.errors import InputError
from algostab.lyapunov import verify_decrease, verify_sandwich, verify_stochastic_recursion
from algostab.schema import FactorySpec
from algostab.utils.sampling import sample_region


def test_quadratic_problem_spectrum():
    """Eigenvalues spread over [gamma, beta]; the centre is the minimizer."""
    problem = quadratic_problem(gamma=1.0, beta=3.0, n=3, center=[1.0, 2.0, 3.0])
    assert np.diag(problem.hessian) == pytest.approx([1.0, 2.0, 3.0])
    assert problem.kappa == pytest.approx(3.0)
    assert problem.grad(problem.minimizer) == pytest.approx(np.zeros(3))
    assert quadratic_problem(beta=2.0).beta == 2.0


def test_strongly_convex_gd_constants_and_checks():
    """h = 2/(beta + gamma) gives tau = (beta - gamma)/(beta + gamma) and V = |x - x*|."""
    bundle = make_gd_strongly_convex(quadratic_problem(gamma=1.0, beta=3.0, n=2))
    assert bundle.step == pytest.approx(0.5)
    assert bundle.constants["tau"] == pytest.approx(0.5)
    assert bundle.constants["L_V"] == pytest.approx(1.0)
    assert bundle.system.gain(0) == pytest.approx(0.5)
    L = bundle.lyapunov("sup")
    samples = sample_region(bundle.region, 64, seed=0)
    assert verify_sandwich(L, samples, k_range=3).passed
    assert verify_decrease(L, samples, k_range=3).passed


def test_factories_reject_wrong_convexity():
    """Convex GD refuses gamma > 0; strongly convex factories refuse gamma = 0."""
    with pytest.raises(InputError):
        make_gd_convex(quadratic_problem(gamma=1.0, beta=3.0, n=2))
    with pytest.raises(InputError):
        make_gd_strongly_convex(quadratic_problem(eigenvalues=[0.0, 1.0]))
    with pytest.raises(InputError):
        make_gd_strongly_convex(quadratic_problem(gamma=1.0, beta=3.0, n=2), h=1.0)


def test_convex_gd_uses_detected_horizon():
    """The convex factory calibrates c0 and K under the loss gap."""
    bundle = factory_from_spec(FactorySpec(algo="gd_convex", gamma=0.1, beta=2.0, n=2))
    assert bundle.algo == "gd_convex"
    assert bundle.schedule.kind == "example25"
    assert bundle.schedule.horizon_K >= 1
    assert bundle.schedule.c0 >= 1.0
    assert "L_H" in bundle.constants


def test_noiseless_noisy_gd_matches_plain_gd():
    """With sigma2 = 0 the trajectories coincide bitwise."""
    problem = quadratic_problem(gamma=1.0, beta=3.0, n=2, center=[0.5, -0.5])
    plain = make_gd_strongly_convex(problem, h=0.5)
    noisy = make_noisy_gd(problem, 0.0, h=0.5)
    a = simulate(plain.system, [1.5, 0.5], 20)
    b = simulate(noisy.system, [1.5, 0.5], 20)
    assert np.array_equal(a.states, b.states)
    assert noisy.constants["tau"] == pytest.approx(noisy_gd_rate(1.0, 3.0, 0.5))
    assert noisy.schedule.c0 == pytest.approx(3.0)
    assert "L_H" in noisy.constants


def test_noisy_gd_horizon_at_boundary_step():
    """At h = 2/(beta + gamma) the loss-gap ratio never exceeds one, so K = 1 and the constants stay small."""
    problem = quadratic_problem(gamma=1.0, beta=3.0, n=2, center=[0.5, -0.5])
    bundle = make_noisy_gd(problem, 0.01, h=0.5)
    assert bundle.constants["K"] == 1
    assert bundle.constants["L_V"] < 1e3
    report = verify_stochastic_recursion(bundle.lyapunov("sum"), 0.01, [1.5, 0.5], 5, n_mc=2000, seed=0)
    assert report.passed
    assert all(step.rhs < 100.0 for step in report.steps)


def test_accelerated_gd_channel_gain():
    """The (theta, p) system doubles the dimension and has L_e = (h/beta) sqrt(1 + h^2)."""
    bundle = make_accelerated_gd(quadratic_problem(gamma=1.0, beta=4.0, n=2), h=1.0)
    assert bundle.system.dim_state == 4
    assert bundle.system.gain(0) == pytest.approx(0.25 * np.sqrt(2.0))
    assert bundle.constants["tau"] == pytest.approx(2.0 / 3.0)
    assert bundle.schedule.c0 >= 4.0


def test_step_rules():
    """Horizon-tuned and slackened step formulas."""
    assert noisy_gd_rate(1.0, 3.0, 0.5) == pytest.approx(0.25)
    assert horizon_tuned_step(1.0, 3.0, 100) == pytest.approx(4.0 / 6.0 * np.log(100) / 100)
    assert step_schedule(StepPolicy("constant"), 3, 1.0, 3.0, 10) == pytest.approx([0.5, 0.5, 0.5])
    assert step_schedule(StepPolicy("decaying", 1.0), 2, 0.0, 2.0, 10) == pytest.approx([0.5, 0.5 / np.sqrt(2)])
    with pytest.raises(InputError):
        StepPolicy("decaying", 3.0)
    with pytest.raises(InputError):
        StepPolicy("adaptive")


def test_privacy_constants_ratio():
    """Plain over accelerated noise floors is (kappa + 1)^2 / (4 (1 + sqrt(kappa))^2)."""
    equal = privacy_bound_constants(1.0, 1.0)
    assert (equal.plain, equal.accelerated, equal.ratio) == (pytest.approx(0.5), pytest.approx(2.0), pytest.approx(0.25))
    wide = privacy_bound_constants(1.0, 100.0)
    assert wide.ratio == pytest.approx(101.0 ** 2 / (4.0 * 121.0))
    assert wide.kappa / 8.0 <= wide.ratio <= 2.0 * wide.kappa


def test_synthetic_datasets_share_leading_records():
    """Growing n keeps the first records fixed."""
    small = synthetic_ridge_dataset(5, 3, seed=0)
    large = synthetic_ridge_dataset(10, 3, seed=0)
    assert np.array_equal(small.features, large.features[:5])
    assert np.all(np.linalg.norm(large.features, axis=1) <= 1.0 + 1e-12)
    assert np.all(np.abs(large.labels) <= 1.0)
    labels = synthetic_classification_dataset(20, 3, seed=0).labels
    assert set(labels.tolist()) <= {-1.0, 1.0}


def test_ridge_and_logistic_minimizers():
    """Both problems carry a minimizer with vanishing gradient."""
    ridge = ridge_problem(synthetic_ridge_dataset(30, 3, seed=1), lam=0.1)
    assert np.linalg.norm(ridge.grad(ridge.minimizer)) < 1e-9
    assert ridge.gamma >= 0.1 - 1e-12
    logistic = logistic_problem(synthetic_classification_dataset(30, 3, seed=1), lam=0.1)
    assert np.linalg.norm(logistic.grad(logistic.minimizer)) < 1e-10
    with pytest.raises(InputError):
        ridge_problem(synthetic_ridge_dataset(30, 3, seed=1), lam=0.0)


def test_stability_bound_scales_inversely_with_n():
    """The replace-one drift is proportional to 2 L / n."""
    steps = step_schedule(StepPolicy("constant"), 50, 0.1, 1.1, 50)
    at_50 = stability_bound(2.0, steps, 0.1, 1.1, 50, StepPolicy("constant"))
    at_100 = stability_bound(2.0, steps, 0.1, 1.1, 100, StepPolicy("constant"))
    assert at_50 == pytest.approx(2.0 * at_100)


def test_convex_stability_bound_sums_steps():
    """With gamma = 0 every rate is one, so the bound is L^2 sum_j h_j 2/n."""
    bound = stability_bound(1.0, np.array([0.1, 0.1]), 0.0, 1.0, 10, StepPolicy("decaying"))
    assert bound == pytest.approx(0.04)


def test_stability_experiment_within_bound():
    """The measured loss change stays below the bound."""
    result = run_stability_experiment(50, 50, StepPolicy(), seed=0, n_draws=10, n_probe=16)
    assert result.estimate > 0
    assert result.within_bound
    assert len(result.gaps) == 10
    with pytest.raises(InputError):
        run_stability_experiment(1, 10, StepPolicy(), seed=0)
