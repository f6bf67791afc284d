"""
Event-Triggered Relaxed Consensus ADMM

N agents minimize sum_i l_i(x) through a coordinator. Each round:

    x_i  = argmin_x l_i(x) + (rho/2) |x - z + u_i|^2
    xh_i = alpha x_i + (1 - alpha) z
    s_i  = xh_i + u_i                       (message)
    z'   = mean_i last_sent_i
    u_i' = u_i + xh_i - z'

An agent transmits s_i (refreshing last_sent_i) only when
|s_i - last_sent_i| > Delta, so the coordinator consumes stale messages whose
deviation never exceeds Delta. The stacked deviations are the disturbance of
the (z, u) dynamics.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from algostab.algozoo import ProblemSpec, quadratic_problem
from algostab.bounds import deterministic_bound_series, steady_state_bound, verify_trajectory_bound
from algostab.dynamics import DynamicalSystem, Trajectory
from algostab.errors import ContractViolationError, HorizonNotFoundError, InputError
from algostab.lyapunov import LinearCertificate, linear_certificate
from algostab.metrics import constant_schedule
from algostab.schema import BoundReport
from algostab.utils.sampling import rng_stream

logger = logging.getLogger(__name__)

PROX_TOLERANCE = 1e-10
PROX_MAX_ITERS = 10_000
STEADY_FRACTION = 0.1


@dataclass(frozen=True)
class AgentNetwork:
    """
    Agents with local losses l_i and the relaxed ADMM parameters.

    Attributes:
        local_losses: One ProblemSpec per agent
        alpha: Relaxation parameter in (0, 2)
        epsilon_tuning: Step exponent eps >= 0
        gamma: Strong-convexity modulus shared by the local losses
        beta: Smoothness modulus shared by the local losses
    """

    local_losses: Tuple[ProblemSpec, ...]
    alpha: float = 1.0
    epsilon_tuning: float = 0.0
    gamma: float = 1.0
    beta: float = 10.0

    def __post_init__(self):
        if not self.local_losses:
            raise InputError("a network needs at least one agent")
        if not 0 < self.alpha < 2:
            raise InputError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.epsilon_tuning < 0:
            raise InputError(f"epsilon_tuning must be nonnegative, got {self.epsilon_tuning}")
        if not 0 < self.gamma <= self.beta:
            raise InputError(f"need 0 < gamma <= beta, got gamma={self.gamma}, beta={self.beta}")
        dims = {p.dim for p in self.local_losses}
        if len(dims) != 1:
            raise InputError(f"local losses disagree on dimension: {sorted(dims)}")

    @property
    def n_agents(self) -> int:
        return len(self.local_losses)

    @property
    def dim(self) -> int:
        return self.local_losses[0].dim

    @property
    def kappa(self) -> float:
        return self.beta / self.gamma

    @property
    def step(self) -> float:
        """rho = kappa^eps sqrt(gamma beta)."""
        return self.kappa ** self.epsilon_tuning * np.sqrt(self.gamma * self.beta)

    @property
    def quadratic(self) -> bool:
        return all(p.hessian is not None for p in self.local_losses)

    def global_minimizer(self) -> np.ndarray:
        """argmin of sum_i l_i."""
        if self.quadratic:
            H = sum(p.hessian for p in self.local_losses)
            rhs = sum(p.hessian @ p.minimizer for p in self.local_losses)
            return np.linalg.solve(H, rhs)
        result = minimize(
            lambda x: sum(float(p.loss(x)) for p in self.local_losses),
            np.zeros(self.dim),
            jac=lambda x: sum(p.grad(x) for p in self.local_losses),
            method="L-BFGS-B",
            options={"gtol": PROX_TOLERANCE},
        )
        return np.asarray(result.x, dtype=float)


def quadratic_network(
    n_agents: int,
    dim: int,
    gamma: float,
    beta: float,
    seed: int,
    alpha: float = 1.0,
    epsilon_tuning: float = 0.0,
) -> AgentNetwork:
    """N quadratic agents sharing the spectrum over [gamma, beta] with seeded centres."""
    if n_agents < 1:
        raise InputError(f"n_agents must be positive, got {n_agents}")
    losses = tuple(
        quadratic_problem(gamma=gamma, beta=beta, n=dim, center=rng_stream(seed, 31, i).standard_normal(dim))
        for i in range(n_agents)
    )
    return AgentNetwork(losses, alpha, epsilon_tuning, gamma, beta)


def admm_rate(alpha: float, kappa: float, epsilon: float = 0.0) -> float:
    """tau~ = 1 - alpha / (4 kappa^(eps + 1/2))."""
    if not 0 < alpha < 2:
        raise InputError(f"alpha must lie in (0, 2), got {alpha}")
    if kappa < 1:
        raise InputError(f"kappa must be >= 1, got {kappa}")
    return 1.0 - alpha / (4.0 * kappa ** (epsilon + 0.5))


@dataclass
class EventTrigger:
    """Per-agent last transmitted message; Delta = 0 means every agent transmits every round."""

    delta: float
    last_sent: Optional[np.ndarray] = None
    # latest round, s_i - last_sent_i per agent
    deviation: Optional[np.ndarray] = None
    max_deviation: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise InputError(f"delta must be nonnegative, got {self.delta}")


@dataclass
class AdmmState:
    z: np.ndarray
    u: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.z, self.u.reshape(-1)])

    @classmethod
    def from_flat(cls, v: np.ndarray, n_agents: int, dim: int) -> "AdmmState":
        v = np.asarray(v, dtype=float)
        return cls(v[:dim].copy(), v[dim:].reshape(n_agents, dim).copy())


def _prox(problem: ProblemSpec, v: np.ndarray, rho: float) -> np.ndarray:
    """argmin_x l(x) + (rho/2)|x - v|^2: closed form for quadratics, gradient loop otherwise."""
    if problem.hessian is not None:
        H = problem.hessian
        return np.linalg.solve(H + rho * np.eye(len(v)), H @ problem.minimizer + rho * v)
    x = v.copy()
    step = 1.0 / (problem.beta + rho)
    for _ in range(PROX_MAX_ITERS):
        g = problem.grad(x) + rho * (x - v)
        if np.linalg.norm(g) <= PROX_TOLERANCE:
            break
        x = x - step * g
    return x


def _messages(net: AgentNetwork, state: AdmmState) -> Tuple[np.ndarray, np.ndarray]:
    rho = net.step
    x = np.stack([_prox(p, state.z - state.u[i], rho) for i, p in enumerate(net.local_losses)])
    relaxed = net.alpha * x + (1.0 - net.alpha) * state.z
    return relaxed, relaxed + state.u


def admm_step(net: AgentNetwork, trigger: Optional[EventTrigger], state: AdmmState, k: int) -> Tuple[AdmmState, int]:
    """
    One round of event-triggered relaxed ADMM.

    Without a trigger every agent transmits (exact relaxed ADMM). The first
    round with a trigger always transmits.

    Returns:
        (next state, number of transmissions)
    """
    if not 0 < net.alpha < 2:
        raise InputError(f"alpha must lie in (0, 2), got {net.alpha}")
    if state.u.shape != (net.n_agents, net.dim) or state.z.shape != (net.dim,):
        raise InputError("ADMM state does not match the network")
    relaxed, messages = _messages(net, state)
    if trigger is None:
        consumed, comms = messages, net.n_agents
    else:
        if trigger.last_sent is None:
            send = np.ones(net.n_agents, dtype=bool)
            trigger.last_sent = np.zeros_like(messages)
        else:
            gaps = np.linalg.norm(messages - trigger.last_sent, axis=1)
            send = np.ones(net.n_agents, dtype=bool) if trigger.delta == 0 else gaps > trigger.delta
        trigger.last_sent[send] = messages[send]
        trigger.deviation = messages - trigger.last_sent
        stale = np.linalg.norm(trigger.deviation, axis=1)
        trigger.max_deviation = max(trigger.max_deviation, float(stale.max()))
        consumed, comms = trigger.last_sent.copy(), int(send.sum())
    z_next = consumed.mean(axis=0)
    u_next = state.u + relaxed - z_next
    logger.debug("ADMM round %d: %d transmissions", k, comms)
    return AdmmState(z_next, u_next), comms


def admm_linearization(net: AgentNetwork) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Affine form x' = J x + b of exact relaxed ADMM on the stacked (z, u) state, and its fixed point.

    Raises:
        InputError: A local loss is not quadratic
    """
    if not net.quadratic:
        raise InputError("the ADMM linearization needs quadratic local losses")
    n, dim = net.n_agents, net.dim
    size = (n + 1) * dim

    def f(v):
        return admm_step(net, None, AdmmState.from_flat(v, n, dim), 0)[0].flat()

    b = f(np.zeros(size))
    J = np.column_stack([f(col) - b for col in np.eye(size)])
    x_star = np.linalg.solve(np.eye(size) - J, b)
    return J, b, x_star


def admm_system(net: AgentNetwork) -> DynamicalSystem:
    """
    Exact relaxed ADMM on (z, u) with the consumed-message deviation as disturbance.

    A deviation e = (e_1 .. e_N) shifts z' by -mean(e) and every u_i' by
    +mean(e), so the channel gain is sqrt((N + 1)/N) and |e| <= sqrt(N) Delta.
    """
    J, b, x_star = admm_linearization(net)
    n, dim = net.n_agents, net.dim
    B = np.vstack([-np.tile(np.eye(dim), n) / n] + [np.tile(np.eye(dim), n) / n for _ in range(n)])

    def nominal(k, x):
        return x @ J.T + b

    def disturbed(k, x, e):
        return x @ J.T + b + e @ B.T

    return DynamicalSystem(
        dim_state=(n + 1) * dim,
        dim_disturbance=n * dim,
        nominal=nominal,
        disturbed=disturbed,
        equilibrium=x_star,
        disturbance_gain=float(np.sqrt((n + 1) / n)),
        affine_channel=lambda k: B,
        lipschitz_f=float(np.linalg.norm(J, 2)),
        flow_hessian_bound=0.0,
        name=f"admm_N{n}",
    )


def network_certificate(net: AgentNetwork, K_max: int = 500) -> LinearCertificate:
    """
    (c0, K, L_V) of the (z, u) dynamics at the rate tau~ = admm_rate(alpha, kappa, eps).

    Raises:
        ContractViolationError: The simulated decay is slower than tau~ (calibration failure)
    """
    J, _, _ = admm_linearization(net)
    tau = admm_rate(net.alpha, net.kappa, net.epsilon_tuning)
    try:
        return linear_certificate(J, tau, K_max)
    except HorizonNotFoundError as exc:
        raise ContractViolationError(
            f"calibration failure: ADMM decays slower than tau~={tau:.6g} "
            f"(ratio {exc.worst_ratio:.3g} at {exc.K_max} steps)"
        ) from exc


@dataclass
class EventRunResult:
    """
    One event-triggered run.

    trajectory holds the global iterate z_k with distances |z_k - z*|;
    full_error is the (z, u) distance the bound series controls.
    """

    trajectory: Trajectory
    full_error: np.ndarray
    comms_per_round: List[int]
    total_comms: int
    steady_state_error: float
    bound_series: np.ndarray
    report: BoundReport
    max_deviation: float
    certificate: LinearCertificate = field(repr=False, default=None)


def _initial_state(net: AgentNetwork, x_star: np.ndarray, seed: int, start_scale, jitter: float) -> np.ndarray:
    n, dim = net.n_agents, net.dim
    rng = rng_stream(seed, 41)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    lo, hi = start_scale
    scale = float(np.exp(rng.uniform(np.log(lo), np.log(hi)))) if hi > lo else float(lo)
    z0 = x_star[:dim] + scale * direction
    u0 = x_star[dim:] + jitter * scale * rng.standard_normal(n * dim)
    return np.concatenate([z0, u0])


def _steady_window(n_iters: int) -> int:
    return max(1, int(np.ceil(STEADY_FRACTION * n_iters)))


def run_event_based(
    net: AgentNetwork,
    delta: float,
    n_iters: int,
    z0=None,
    seed: int = 0,
    start_scale: Sequence[float] = (1.0, 10.0),
    jitter: float = 0.0,
    certificate: Optional[LinearCertificate] = None,
) -> EventRunResult:
    """
    Simulate event-triggered ADMM and check the perturbed-convergence bound.

    Args:
        net: Quadratic agent network
        delta: Trigger threshold Delta
        n_iters: Rounds
        z0: Initial (z, u) stacked state, or a z alone (duals start at their
            fixed point); drawn from the seed when absent
        seed: Seed for the random start
        start_scale: Range of |z0 - z*| for random starts (log-uniform)
        jitter: Relative dual perturbation of random starts
        certificate: Precomputed network_certificate

    Returns:
        EventRunResult; steady_state_error is the mean |z - z*| over the last
        10% of rounds
    """
    if n_iters < 1:
        raise InputError(f"n_iters must be >= 1, got {n_iters}")
    system = admm_system(net)
    cert = network_certificate(net) if certificate is None else certificate
    n, dim = net.n_agents, net.dim
    x_star = system.equilibrium
    if z0 is None:
        start = _initial_state(net, x_star, seed, start_scale, jitter)
    else:
        z0 = np.asarray(z0, dtype=float).reshape(-1)
        start = np.concatenate([z0, x_star[dim:]]) if z0.shape == (dim,) else z0
        if start.shape != x_star.shape:
            raise InputError(f"z0 must have {dim} or {len(x_star)} entries")

    trigger = EventTrigger(delta)
    state = AdmmState.from_flat(start, n, dim)
    states, deviations, comms = [state.flat()], [], []
    for k in range(n_iters):
        state, sent = admm_step(net, trigger, state, k)
        deviations.append(trigger.deviation.reshape(-1))
        states.append(state.flat())
        comms.append(sent)
    states = np.stack(states)
    z_error = np.linalg.norm(states[:, :dim] - x_star[:dim], axis=1)
    full_error = np.linalg.norm(states - x_star, axis=1)

    tau = admm_rate(net.alpha, net.kappa, net.epsilon_tuning)

    bound = deterministic_bound_series(
        cert.c0,
        constant_schedule(tau, c0=cert.c0, horizon_K=cert.K),
        float(full_error[0]),
        cert.L_V,
        system.gain(0),
        np.sqrt(n) * delta,
        n_iters,
    )
    constants = {"c0": cert.c0, "K": cert.K, "L_V": cert.L_V, "L_e": system.gain(0), "Delta": delta, "tau": tau}
    report = verify_trajectory_bound(full_error, bound, constants_used=constants)
    window = _steady_window(n_iters)
    trajectory = Trajectory(0, states[:, :dim], np.stack(deviations), z_error)
    return EventRunResult(
        trajectory=trajectory,
        full_error=full_error,
        comms_per_round=comms,
        total_comms=int(sum(comms)),
        steady_state_error=float(z_error[-window:].mean()),
        bound_series=bound,
        report=report,
        max_deviation=trigger.max_deviation,
        certificate=cert,
    )


def tradeoff_sweep(
    net: AgentNetwork,
    delta_list: Sequence[float],
    n_iters: int,
    seed: int,
    n_starts: int = 1,
    start_scale: Sequence[float] = (1.0, 10.0),
    jitter: float = 0.0,
    jobs: int = 1,
) -> Tuple[Dict[str, List[float]], List[BoundReport]]:
    """
    One averaged run_event_based per Delta.

    Every Delta uses the same n_starts seeded starts. bound_value is the bound
    series averaged over the steady-state window, which tends to
    steady_state_bound(L_V, L_e, sqrt(N) Delta, tau~).

    Returns:
        (table with columns delta, steady_state_error, total_comms, bound_value,
        bound reports of every run)
    """
    if not delta_list:
        raise InputError("delta_list must be nonempty")
    cert = network_certificate(net)
    window = _steady_window(n_iters)

    def run(delta: float):
        runs = [
            run_event_based(net, delta, n_iters, seed=seed + s, start_scale=start_scale, jitter=jitter, certificate=cert)
            for s in range(n_starts)
        ]
        return (
            float(np.mean([r.steady_state_error for r in runs])),
            float(np.mean([r.total_comms for r in runs])),
            float(np.mean([r.bound_series[-window:].mean() for r in runs])),
            [r.report for r in runs],
        )

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(run, delta_list))
    table = {
        "delta": [float(d) for d in delta_list],
        "steady_state_error": [r[0] for r in results],
        "total_comms": [r[1] for r in results],
        "bound_value": [r[2] for r in results],
    }
    reports = [rep for r in results for rep in r[3]]
    logger.info("Swept %d thresholds over %d starts", len(delta_list), n_starts)
    return table, reports


def steady_state_bound_for(net: AgentNetwork, delta: float, certificate: Optional[LinearCertificate] = None) -> float:
    """steady_state_bound with the network's certificate, channel gain and |e| <= sqrt(N) Delta."""
    cert = network_certificate(net) if certificate is None else certificate
    tau = admm_rate(net.alpha, net.kappa, net.epsilon_tuning)
    gain = float(np.sqrt((net.n_agents + 1) / net.n_agents))
    return steady_state_bound(cert.L_V, gain, np.sqrt(net.n_agents) * delta, tau)
