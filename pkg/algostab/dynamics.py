"""
Discrete-Time Dynamics

Nominal updates x_{k+1} = f_k(x_k), disturbed updates z_{k+1} = g_k(z_k, e_k)
with g_k(z, 0) = f_k(z), flow maps, sampled Lipschitz estimates and trajectory
simulation.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from algostab.errors import InputError
from algostab.metrics import PseudometricSpec
from algostab.schema import ConsistencyReport, Region
from algostab.utils.sampling import FD_SCALE, max_slope, sample_pairs, sample_region

logger = logging.getLogger(__name__)

GainBound = Union[float, Callable[[int], float]]
DisturbanceFn = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DynamicalSystem:
    """
    A nominal update family and its disturbed counterpart.

    Attributes:
        dim_state: State dimension d
        dim_disturbance: Disturbance dimension
        nominal: f(k, x) -> x'
        disturbed: g(k, z, e) -> z', with g(k, z, 0) = f(k, z)
        equilibrium: Fixed point x* of the nominal dynamics
        disturbance_gain: L_ek as a constant or a function of k
        affine_channel: A(k) with g(k, z, e) = f(k, z) + A(k) e, when the
            disturbance enters affinely
        lipschitz_f: Analytic Lipschitz constant of f_k, if known
        flow_hessian_bound: Bound on second derivatives of the flow, if known
        norm_ord: Norm on states and disturbances
        name: Label used in logs and reports
    """

    dim_state: int
    dim_disturbance: int
    nominal: Callable[[int, np.ndarray], np.ndarray]
    disturbed: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    equilibrium: np.ndarray
    disturbance_gain: GainBound = 0.0
    affine_channel: Optional[Callable[[int], np.ndarray]] = None
    lipschitz_f: Optional[float] = None
    flow_hessian_bound: Optional[float] = None
    norm_ord: Union[int, float] = 2
    name: str = "system"

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_disturbance < 1:
            raise InputError("state and disturbance dimensions must be positive")
        eq = np.asarray(self.equilibrium, dtype=float).reshape(-1)
        if eq.shape != (self.dim_state,):
            raise InputError(f"equilibrium has shape {eq.shape}, expected ({self.dim_state},)")
        object.__setattr__(self, "equilibrium", eq)

    def gain(self, k: int) -> float:
        """L_ek for step k."""
        g = self.disturbance_gain
        return float(g(k)) if callable(g) else float(g)

    def gains(self, n: int, start: int = 0) -> np.ndarray:
        return np.array([self.gain(k) for k in range(start, start + n)], dtype=float)

    def norm(self, v) -> np.ndarray:
        return np.linalg.norm(np.asarray(v, dtype=float), ord=self.norm_ord, axis=-1)


@dataclass
class Trajectory:
    """States z_k, disturbances e_k and metric values d(z_k, x*) of one run."""

    start_index: int
    states: np.ndarray
    disturbances: np.ndarray
    metric_values: np.ndarray

    def __post_init__(self):
        if len(self.disturbances) != len(self.states) - 1:
            raise InputError("a trajectory needs exactly one disturbance per transition")
        if np.any(self.metric_values < 0):
            raise InputError("metric values must be nonnegative")

    def __len__(self) -> int:
        return len(self.states)


def _as_state(sys: DynamicalSystem, x, what: str = "state") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != sys.dim_state:
        raise InputError(f"{what} has shape {x.shape}; {sys.name} expects last dimension {sys.dim_state}")
    return x


def _as_disturbance(sys: DynamicalSystem, e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.ndim == 0 or e.shape[-1] != sys.dim_disturbance:
        raise InputError(f"disturbance has shape {e.shape}; {sys.name} expects last dimension {sys.dim_disturbance}")
    return e


def _check_index(k: int) -> None:
    if k < 0:
        raise InputError(f"iteration index must be nonnegative, got {k}")


def step_nominal(sys: DynamicalSystem, k: int, x) -> np.ndarray:
    """f_k(x)."""
    _check_index(k)
    return np.asarray(sys.nominal(k, _as_state(sys, x)), dtype=float)


def step_disturbed(sys: DynamicalSystem, k: int, z, e) -> np.ndarray:
    """g_k(z, e)."""
    _check_index(k)
    return np.asarray(sys.disturbed(k, _as_state(sys, z), _as_disturbance(sys, e)), dtype=float)


def flow(sys: DynamicalSystem, kprime: int, k: int, xi) -> np.ndarray:
    """phi(k', k, xi) = f_{k+k'-1} o ... o f_k (xi); phi(0, k, xi) = xi."""
    if kprime < 0:
        raise InputError(f"kprime must be nonnegative, got {kprime}")
    _check_index(k)
    x = _as_state(sys, xi).copy()
    for j in range(kprime):
        x = np.asarray(sys.nominal(k + j, x), dtype=float)
    return x


def flow_path(sys: DynamicalSystem, horizon: int, k: int, xi) -> np.ndarray:
    """phi(j, k, xi) for j = 0 .. horizon, stacked along a new first axis."""
    x = _as_state(sys, xi).copy()
    path = [x]
    for j in range(horizon):
        x = np.asarray(sys.nominal(k + j, x), dtype=float)
        path.append(x)
    return np.stack(path)


def _k_values(k_range: Union[int, Iterable[int]]) -> np.ndarray:
    ks = np.arange(k_range) if isinstance(k_range, (int, np.integer)) else np.asarray(list(k_range), dtype=int)
    if ks.size == 0 or np.any(ks < 0):
        raise InputError("k_range must contain nonnegative indices")
    return ks


def estimate_lipschitz_f(
    sys: DynamicalSystem,
    region: Region,
    n_pairs: int,
    k_range: Union[int, Iterable[int]],
    seed: int,
) -> float:
    """
    Sampled lower estimate of the Lipschitz constant of f_k on a box.

    Pairs are quasi-random and nested in n_pairs for a fixed seed, so the
    estimate never decreases as n_pairs grows. Each pair also contributes a
    finite-difference probe at scale 1e-4 * box diameter.
    """
    if n_pairs < 1:
        raise InputError(f"n_pairs must be >= 1, got {n_pairs}")
    if region.dim != sys.dim_state:
        raise InputError(f"region dimension {region.dim} does not match state dimension {sys.dim_state}")
    ks = _k_values(k_range)
    a, b = sample_pairs(region, n_pairs, seed)
    estimate = max_slope(
        lambda i, x: sys.nominal(int(ks[i % len(ks)]), x),
        a,
        b,
        fd_step=FD_SCALE * region.diameter,
        norm_in=sys.norm_ord,
        norm_out=sys.norm_ord,
    )
    logger.debug("Estimated L_f=%.6g for %s from %d pairs", estimate, sys.name, n_pairs)
    return estimate


def estimate_lipschitz_e(
    sys: DynamicalSystem,
    k: int,
    region_x: Region,
    region_e: Region,
    n_pairs: int,
    seed: int,
) -> float:
    """Sampled lower estimate of L_ek: slopes of g_k(z, .) over pairs in Omega at sampled states z."""
    _check_index(k)
    if n_pairs < 1:
        raise InputError(f"n_pairs must be >= 1, got {n_pairs}")
    if region_x.dim != sys.dim_state or region_e.dim != sys.dim_disturbance:
        raise InputError("region dimensions do not match the system")
    region_e.require_origin()
    zs = sample_region(region_x, n_pairs, seed + 1) if region_x.diameter > 0 else np.tile(region_x.as_arrays()[0], (n_pairs, 1))
    a, b = sample_pairs(region_e, n_pairs, seed)
    return max_slope(
        lambda i, e: sys.disturbed(k, zs[i], e),
        a,
        b,
        fd_step=FD_SCALE * region_e.diameter,
        norm_in=sys.norm_ord,
        norm_out=sys.norm_ord,
    )


def simulate(
    sys: DynamicalSystem,
    z0,
    n_steps: int,
    disturbance: Optional[DisturbanceFn] = None,
    metric: Optional[PseudometricSpec] = None,
    start_index: int = 0,
) -> Trajectory:
    """
    Run the disturbed dynamics for n_steps.

    Args:
        sys: The system
        z0: Initial state
        n_steps: Number of transitions
        disturbance: disturbance(k, z_k) -> e_k; zero when absent
        metric: Metric for d(z_k, x*); the system norm when absent
        start_index: k0

    Returns:
        Trajectory with n_steps + 1 states
    """
    if n_steps < 0:
        raise InputError(f"n_steps must be nonnegative, got {n_steps}")
    z = _as_state(sys, z0).astype(float).copy()
    states = [z]
    noise = []
    zero = np.zeros(sys.dim_disturbance)
    for j in range(n_steps):
        k = start_index + j
        e = zero if disturbance is None else _as_disturbance(sys, disturbance(k, z))
        z = np.asarray(sys.disturbed(k, z, e), dtype=float)
        states.append(z)
        noise.append(np.array(e, dtype=float))
    states = np.stack(states)
    disturbances = np.stack(noise) if noise else np.zeros((0, sys.dim_disturbance))
    return Trajectory(start_index, states, disturbances, distance_to_equilibrium(sys, states, metric))


def simulate_ensemble(sys: DynamicalSystem, z0, noise: np.ndarray, start_index: int = 0) -> np.ndarray:
    """
    Run many disturbed trajectories at once.

    The system maps must broadcast over a leading member axis.

    Args:
        sys: The system
        z0: Initial states, shape (n_members, d) or (d,) for a common start
        noise: Disturbances, shape (n_steps, n_members, dim_disturbance)
        start_index: k0

    Returns:
        States of shape (n_steps + 1, n_members, d)
    """
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 3 or noise.shape[2] != sys.dim_disturbance:
        raise InputError(f"noise must have shape (n_steps, n_members, {sys.dim_disturbance})")
    n_steps, n_members, _ = noise.shape
    z = np.broadcast_to(_as_state(sys, z0), (n_members, sys.dim_state)).astype(float)
    out = np.empty((n_steps + 1, n_members, sys.dim_state))
    out[0] = z
    for j in range(n_steps):
        z = np.asarray(sys.disturbed(start_index + j, z, noise[j]), dtype=float)
        out[j + 1] = z
    return out


def distance_to_equilibrium(sys: DynamicalSystem, states, metric: Optional[PseudometricSpec] = None) -> np.ndarray:
    """d(z, x*) for a stack of states (system norm when no metric is given)."""
    states = np.asarray(states, dtype=float)
    if metric is None:
        return sys.norm(states - sys.equilibrium)
    values = np.asarray(metric.eval(states, sys.equilibrium), dtype=float)
    if values.shape != states.shape[:-1]:
        # custom metrics may only accept single vectors
        values = np.apply_along_axis(lambda s: float(metric.eval(s, sys.equilibrium)), -1, states)
    return values


def check_consistency(
    sys: DynamicalSystem,
    region: Region,
    n_samples: int = 1000,
    k_range: Union[int, Sequence[int]] = 10,
    seed: int = 0,
) -> ConsistencyReport:
    """
    Sampled check that g_k(z, 0) = f_k(z) and f_k(x*) = x*.

    Gaps are relative: |g - f| / (1 + |z|) and |f(x*) - x*| / (1 + |x*|),
    passing at 1e-12 and 1e-9 respectively.
    """
    ks = _k_values(k_range)
    zs = sample_region(region, n_samples, seed)
    zero = np.zeros(sys.dim_disturbance)
    disturbed_gap = 0.0
    for i, z in enumerate(zs):
        k = int(ks[i % len(ks)])
        gap = float(sys.norm(step_disturbed(sys, k, z, zero) - step_nominal(sys, k, z)))
        disturbed_gap = max(disturbed_gap, gap / (1.0 + float(sys.norm(z))))
    eq = sys.equilibrium
    scale = 1.0 + float(sys.norm(eq))
    fixed_gap = max(float(sys.norm(step_nominal(sys, int(k), eq) - eq)) / scale for k in ks)
    return ConsistencyReport(
        max_disturbed_gap=disturbed_gap,
        max_fixed_point_gap=fixed_gap,
        n_samples=n_samples,
        passed=disturbed_gap <= 1e-12 and fixed_gap <= 1e-9,
    )


def linear_system(
    A,
    B=None,
    equilibrium=None,
    name: str = "linear",
    norm_ord=2,
) -> DynamicalSystem:
    """
    Time-invariant affine system x' = x* + A (x - x*), z' = x* + A (z - x*) + B e.

    B defaults to a zero gain on a scalar disturbance.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    B = np.zeros((d, 1)) if B is None else np.asarray(B, dtype=float).reshape(d, -1)
    x_star = np.zeros(d) if equilibrium is None else np.asarray(equilibrium, dtype=float).reshape(d)

    def nominal(k, x):
        return x_star + (x - x_star) @ A.T

    def disturbed(k, z, e):
        return x_star + (z - x_star) @ A.T + e @ B.T

    return DynamicalSystem(
        dim_state=d,
        dim_disturbance=B.shape[1],
        nominal=nominal,
        disturbed=disturbed,
        equilibrium=x_star,
        disturbance_gain=float(np.linalg.norm(B, 2)),
        affine_channel=lambda k: B,
        lipschitz_f=float(np.linalg.norm(A, 2)),
        flow_hessian_bound=0.0,
        norm_ord=norm_ord,
        name=name,
    )
