"""
Tests for disturbance generators, dissipation and the small-gain interconnection.
"""

import numpy as np
import pytest

from algostab.disturbance import (
    DissipationCertificate,
    DisturbanceSource,
    as_disturbance_fn,
    check_dissipation,
    draw,
    draw_block,
    from_spec,
    norm_storage,
    run_interconnection,
    small_gain_certificate,
)
from algostab.dynamics import linear_system, simulate
from algostab.errors import InputError
from algostab.lyapunov import sup_lyapunov
from algostab.metrics import constant_schedule, euclidean
from algostab.schema import DisturbanceSpec, FeedbackSpec


def _scalar_loop():
    sys = linear_system([[0.5]], B=[[1.0]])
    return sys, sup_lyapunov(sys, euclidean(), constant_schedule(0.5))


def test_stochastic_draws_are_keyed_by_stream_and_step():
    """Same (seed, stream, k) gives the same vector regardless of call order."""
    source = DisturbanceSource(kind="gaussian", dim=3, sigma2=0.5, seed=4)
    later = draw(source, 7)
    first = draw(source, 0)
    assert np.array_equal(draw(source, 7), later)
    assert np.array_equal(draw(source, 0), first)
    assert not np.array_equal(draw(source, 7, stream=1), later)


def test_uniform_ball_respects_bound():
    """Every draw lies inside the ball of radius Delta."""
    source = DisturbanceSource(kind="uniform_ball", dim=2, bound_Delta=0.3, seed=1)
    block = draw_block(source, 0, 200)
    assert block.shape == (200, 2)
    assert np.all(np.linalg.norm(block, axis=1) <= 0.3)


def test_constant_vector_bound():
    """The bound defaults to |vector| and may not be smaller than it."""
    source = DisturbanceSource(kind="constant_vector", dim=2, vector=[0.3, 0.4])
    assert source.bound_Delta == pytest.approx(0.5)
    assert draw(source, 3) == pytest.approx([0.3, 0.4])
    with pytest.raises(InputError):
        DisturbanceSource(kind="constant_vector", dim=2, vector=[0.3, 0.4], bound_Delta=0.1)


def test_worst_case_sign_pushes_away():
    """Subtracted worst-case disturbances point away from x* with norm Delta."""
    source = DisturbanceSource(kind="worst_case_sign", dim=2, bound_Delta=0.2, equilibrium=np.zeros(2))
    e = draw(source, 0, z=[1.0, -2.0])
    assert np.sign(e).tolist() == [-1.0, 1.0]
    assert np.linalg.norm(e) <= 0.2
    with pytest.raises(InputError):
        draw(source, 0)


def test_feedback_source_advances_state():
    """e_{k+1} = 0.5 e_k + z_k, starting from e0."""
    source = DisturbanceSource(kind="feedback", dim=1, e0=[1.0], feedback_dynamics=lambda k, e, z: 0.5 * e + z)
    assert draw(source, 0, z=[0.0]) == pytest.approx([1.0])
    assert draw(source, 1, z=[2.0]) == pytest.approx([0.5])
    assert draw(source, 2, z=[0.0]) == pytest.approx([2.25])
    source.reset()
    assert draw(source, 0, z=[0.0]) == pytest.approx([1.0])
    with pytest.raises(InputError):
        draw_block(source, 0, 4)


def test_from_spec_builds_feedback_relative_to_equilibrium():
    """Config feedback couples to z - x*."""
    spec = DisturbanceSpec(kind="feedback", feedback=FeedbackSpec(rho=0.5, gain=0.1))
    source = from_spec(spec, dim=1, equilibrium=[2.0])
    draw(source, 0, z=[3.0])
    assert source.state == pytest.approx([0.1])


def test_simulate_with_source():
    """A zero source leaves the nominal trajectory unchanged."""
    sys, _ = _scalar_loop()
    trajectory = simulate(sys, [1.0], 3, disturbance=as_disturbance_fn(DisturbanceSource(kind="zero", dim=1)))
    assert trajectory.metric_values == pytest.approx([1.0, 0.5, 0.25, 0.125])


def test_check_dissipation():
    """|0.5 e + 0.1 z| - |e| <= -0.5 |e| + 0.1 |z| holds; a larger decay does not."""
    dyn = lambda k, e, z: 0.5 * e + 0.1 * z  # noqa: E731
    rng = np.random.default_rng(0)
    samples = [(k, rng.standard_normal(1), rng.standard_normal(1)) for k in range(50)]
    assert check_dissipation(DissipationCertificate(norm_storage, a=0.5, b=0.1), dyn, samples).passed
    assert not check_dissipation(DissipationCertificate(norm_storage, a=0.9, b=0.1), dyn, samples).passed
    with pytest.raises(InputError):
        check_dissipation(DissipationCertificate(norm_storage, a=0.5, b=0.1), dyn, [])


def test_small_gain_certificate():
    """Midpoint of [L_V L_e / a, (1 - tau) / b), or None when empty."""
    assert small_gain_certificate(1.0, 1.0, 0.5, 0.5, 0.01) == pytest.approx(26.0)
    assert small_gain_certificate(1.0, 1.0, 0.5, 0.5, 0.3) is None
    assert small_gain_certificate(1.0, 0.0, 0.5, 0.5, 0.01) == 1.0
    with pytest.raises(InputError):
        small_gain_certificate(1.0, 1.0, 1.0, 0.5, 0.01)


def test_certified_interconnection_decreases():
    """W = V + m |e| strictly decreases along the coupled loop."""
    sys, L = _scalar_loop()
    source = DisturbanceSource(kind="feedback", dim=1, feedback_dynamics=lambda k, e, z: 0.5 * e + 0.01 * z)
    cert = DissipationCertificate(norm_storage, a=0.5, b=0.01)
    m = small_gain_certificate(1.0, 1.0, 0.5, cert.a, cert.b)
    result = run_interconnection(sys, source, cert, [1.0], [0.0], 60, L, m=m)
    assert result.certified
    assert result.strictly_decreasing
    assert result.violations == []
    assert result.joint_norm[-1] < 1e-8
    assert len(result.W) == 61


def test_uncertified_interconnection_makes_no_claim():
    """Without m the run is reported but not judged."""
    sys, L = _scalar_loop()
    source = DisturbanceSource(kind="static_map", dim=1, gain=0.1, equilibrium=np.zeros(1))
    result = run_interconnection(sys, source, DissipationCertificate(norm_storage, 0.5, 0.1), [1.0], None, 10, L)
    assert not result.certified
    assert result.m is None
    assert result.strictly_decreasing is None
    with pytest.raises(InputError):
        run_interconnection(sys, DisturbanceSource(kind="zero", dim=1), DissipationCertificate(norm_storage, 0.5, 0.1), [1.0], None, 5, L)
