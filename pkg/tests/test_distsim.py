"""
Tests for event-triggered relaxed consensus ADMM.
"""

import numpy as np
import pytest

from algostab import distsim
from algostab.algozoo import logistic_problem, synthetic_classification_dataset
from algostab.distsim import (
    AdmmState,
    AgentNetwork,
    EventTrigger,
    admm_linearization,
    admm_rate,
    admm_step,
    admm_system,
    network_certificate,
    quadratic_network,
    run_event_based,
    steady_state_bound_for,
    tradeoff_sweep,
)
from algostab.errors import ContractViolationError, InputError


@pytest.fixture
def network():
    return quadratic_network(3, 2, gamma=1.0, beta=10.0, seed=0)


def test_admm_rate():
    """tau~ = 1 - alpha / (4 sqrt(kappa)) without tuning."""
    assert admm_rate(1.0, 4.0) == pytest.approx(0.875)
    assert admm_rate(1.0, 4.0, 0.5) == pytest.approx(1.0 - 1.0 / 16.0)
    with pytest.raises(InputError):
        admm_rate(2.0, 4.0)


def test_network_parameters(network):
    """Equal Hessians put the global minimizer at the mean centre."""
    assert network.n_agents == 3
    assert network.step == pytest.approx(np.sqrt(10.0))
    centres = np.mean([p.minimizer for p in network.local_losses], axis=0)
    assert network.global_minimizer() == pytest.approx(centres)
    with pytest.raises(InputError):
        AgentNetwork(network.local_losses, alpha=2.5)


def test_linearization_fixed_point_is_consensus(network):
    """The (z, u) fixed point has z = x* and the map contracts."""
    J, b, x_star = admm_linearization(network)
    assert J.shape == (8, 8)
    assert x_star[:2] == pytest.approx(network.global_minimizer())
    assert np.max(np.abs(np.linalg.eigvals(J))) < 1.0
    assert J @ x_star + b == pytest.approx(x_star)


def test_admm_system_gain(network):
    """Stale messages enter with gain sqrt((N + 1)/N)."""
    system = admm_system(network)
    assert system.dim_state == 8
    assert system.dim_disturbance == 6
    assert system.gain(0) == pytest.approx(np.sqrt(4.0 / 3.0))


def test_zero_threshold_reproduces_exact_admm(network):
    """Delta = 0 transmits every round and follows exact relaxed ADMM."""
    start = np.concatenate([[3.0, -2.0], np.zeros(6)])
    result = run_event_based(network, 0.0, 30, z0=start)
    state = AdmmState.from_flat(start, 3, 2)
    zs = [state.z]
    for k in range(30):
        state, sent = admm_step(network, None, state, k)
        assert sent == 3
        zs.append(state.z)
    assert np.array_equal(result.trajectory.states, np.stack(zs))
    assert result.total_comms == 90
    assert result.max_deviation == 0.0


def test_infinite_threshold_freezes_consensus(network):
    """Only the first round transmits when Delta is infinite."""
    result = run_event_based(network, np.inf, 20, seed=0)
    assert result.total_comms == 3
    assert result.comms_per_round[1:] == [0] * 19


def test_trigger_bounds_deviation(network):
    """Stale messages never deviate by more than Delta."""
    trigger = EventTrigger(0.1)
    state = AdmmState(np.array([2.0, 2.0]), np.zeros((3, 2)))
    for k in range(20):
        state, _ = admm_step(network, trigger, state, k)
    assert trigger.deviation.shape == (3, 2)
    assert np.linalg.norm(trigger.deviation, axis=1).max() <= trigger.max_deviation
    assert trigger.max_deviation <= 0.1
    with pytest.raises(InputError):
        EventTrigger(-1.0)


def test_event_run_records_stale_deviations(network):
    """Each recorded disturbance is the stacked per-agent deviation of that round."""
    result = run_event_based(network, 0.05, 25, seed=3)
    disturbances = result.trajectory.disturbances
    assert disturbances.shape == (25, 6)
    per_agent = np.linalg.norm(disturbances.reshape(25, 3, 2), axis=2)
    assert per_agent.max() <= 0.05
    assert per_agent.max() == pytest.approx(result.max_deviation)
    assert np.all(per_agent[np.array(result.comms_per_round) == 3] == 0.0)


def test_event_run_meets_bound(network):
    """The full-state error stays under the perturbed-convergence bound."""
    result = run_event_based(network, 0.05, 150, seed=1, jitter=0.05)
    assert result.report.passed
    assert len(result.bound_series) == 151
    assert result.total_comms < 3 * 150
    assert result.steady_state_error <= result.bound_series[-15:].mean()


def test_steady_state_bound_linear_in_delta(network):
    """L_V L_e sqrt(N) Delta / (1 - tau~) doubles with Delta."""
    cert = network_certificate(network)
    assert steady_state_bound_for(network, 0.2, cert) == pytest.approx(2.0 * steady_state_bound_for(network, 0.1, cert))
    assert steady_state_bound_for(network, 0.0, cert) == 0.0


def test_calibration_failure_is_reported(network, monkeypatch):
    """A rate faster than the simulated decay cannot be certified."""
    monkeypatch.setattr(distsim, "admm_rate", lambda alpha, kappa, epsilon=0.0: 0.01)
    with pytest.raises(ContractViolationError, match="calibration failure"):
        network_certificate(network)


def test_tradeoff_sweep_table(network):
    """One row per Delta, with the averaged bound above the error."""
    table, reports = tradeoff_sweep(network, [0.01, 0.1], 100, seed=0, n_starts=2, jobs=2)
    assert list(table) == ["delta", "steady_state_error", "total_comms", "bound_value"]
    assert table["delta"] == [0.01, 0.1]
    assert len(reports) == 4
    assert all(r.passed for r in reports)
    for err, bound in zip(table["steady_state_error"], table["bound_value"]):
        assert err <= bound
    with pytest.raises(InputError):
        tradeoff_sweep(network, [], 10, seed=0)


def test_linearization_needs_quadratics():
    """Non-quadratic agents cannot be linearized."""
    problem = logistic_problem(synthetic_classification_dataset(20, 2, seed=0), lam=0.1)
    net = AgentNetwork((problem,), gamma=0.1, beta=0.35)
    with pytest.raises(InputError):
        admm_linearization(net)
