"""
Disturbance Generators and Small-Gain Interconnection

Bounded deterministic, zero-mean stochastic and state-dependent disturbances
e_k, the dissipation inequality for disturbance dynamics
e_{k+1} = Delta_k(e_k, z_k), and the small-gain composition
W = V(k, z) + m V_Delta(k, e) that certifies the closed loop.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

from algostab.dynamics import DynamicalSystem
from algostab.errors import InputError
from algostab.lyapunov import LyapunovEstimate, eval_lyapunov
from algostab.schema import DisturbanceSpec, DissipationReport
from algostab.utils.sampling import gaussian_draws, rng_stream

logger = logging.getLogger(__name__)

DISTURBANCE_KINDS = ("zero", "constant_vector", "worst_case_sign", "uniform_ball", "gaussian", "feedback", "static_map")
BOUNDED_KINDS = ("zero", "constant_vector", "worst_case_sign", "uniform_ball")
DECREASE_FLOOR = 1e-10

FeedbackMap = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


def _clip_to_ball(e: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(e))
    if norm > radius:
        e = e * (radius / norm) * (1.0 - 4.0 * np.finfo(float).eps)
    return e


@dataclass
class DisturbanceSource:
    """
    A generator of disturbances e_k.

    Stochastic kinds are stateless functions of (seed, stream, k). The feedback
    kind owns one e-state and must not be shared between trajectories.

    Attributes:
        kind: One of DISTURBANCE_KINDS
        dim: Disturbance dimension
        bound_Delta: Bound on |e_k| for bounded kinds
        sigma2: E|n|^2 for the gaussian kind
        seed: Seed of the counter-based streams
        feedback_dynamics: Delta_k(e, z) for the feedback kind
        e0: Initial e-state of the feedback kind
        vector: Emitted vector of the constant_vector kind
        equilibrium: x*, used by worst_case_sign and state-dependent kinds
        sign_gain: -1 pushes away from x* when the disturbance is subtracted
        gain: Coefficient of the static map e = gain (z - x*)
    """

    kind: str
    dim: int
    bound_Delta: float = 0.0
    sigma2: float = 0.0
    seed: int = 0
    feedback_dynamics: Optional[FeedbackMap] = None
    e0: Optional[np.ndarray] = None
    vector: Optional[np.ndarray] = None
    equilibrium: Optional[np.ndarray] = None
    sign_gain: float = -1.0
    gain: float = 0.0
    state: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise InputError(f"unknown disturbance kind '{self.kind}'")
        if self.dim < 1:
            raise InputError(f"disturbance dimension must be positive, got {self.dim}")
        if self.bound_Delta < 0 or self.sigma2 < 0:
            raise InputError("bound_Delta and sigma2 must be nonnegative")
        if self.kind == "constant_vector":
            if self.vector is None:
                raise InputError("constant_vector needs a vector")
            self.vector = np.asarray(self.vector, dtype=float).reshape(self.dim)
            size = float(np.linalg.norm(self.vector))
            if self.bound_Delta == 0.0:
                self.bound_Delta = size
            elif size > self.bound_Delta:
                raise InputError(f"|vector|={size:.6g} exceeds bound_Delta={self.bound_Delta}")
        if self.kind == "feedback" and self.feedback_dynamics is None:
            raise InputError("feedback kind needs feedback_dynamics")
        self.reset()

    @property
    def bounded(self) -> bool:
        return self.kind in BOUNDED_KINDS

    def reset(self, e0=None) -> None:
        """Restore the feedback e-state to e0."""
        if e0 is not None:
            self.e0 = e0
        self.state = np.zeros(self.dim) if self.e0 is None else np.asarray(self.e0, dtype=float).reshape(self.dim).copy()

    def _offset(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z if self.equilibrium is None else z - self.equilibrium


def draw(source: DisturbanceSource, k: int, z=None, stream: int = 0) -> np.ndarray:
    """
    e_k for the source's kind.

    Stochastic kinds are keyed by (seed, stream, k), so repeated calls give
    identical draws regardless of order. The feedback kind returns its current
    e-state and then advances it with Delta_k(e_k, z_k).

    Raises:
        InputError: A state-dependent kind was called without z
    """
    if k < 0:
        raise InputError(f"iteration index must be nonnegative, got {k}")
    kind = source.kind
    if kind == "zero":
        return np.zeros(source.dim)
    if kind == "constant_vector":
        return source.vector.copy()
    if kind == "gaussian":
        return gaussian_draws(source.sigma2, (source.dim,), source.seed, stream, k)
    if kind == "uniform_ball":
        rng = rng_stream(source.seed, stream, k)
        direction = rng.standard_normal(source.dim)
        direction /= max(float(np.linalg.norm(direction)), np.finfo(float).tiny)
        radius = source.bound_Delta * rng.uniform() ** (1.0 / source.dim)
        return _clip_to_ball(radius * direction, source.bound_Delta)
    if z is None:
        raise InputError(f"{kind} disturbance needs the current state z")
    z = np.asarray(z, dtype=float)
    if kind == "worst_case_sign":
        signs = np.sign(source._offset(z)).reshape(source.dim)
        signs[signs == 0] = 1.0
        e = source.sign_gain * source.bound_Delta * signs / np.sqrt(source.dim)
        return _clip_to_ball(e, source.bound_Delta)
    if kind == "static_map":
        return source.gain * source._offset(z).reshape(source.dim)
    current = source.state.copy()
    source.state = np.asarray(source.feedback_dynamics(k, current, z), dtype=float).reshape(source.dim)
    return current


def draw_block(source: DisturbanceSource, k: int, n_members: int, stream_base: int = 0) -> np.ndarray:
    """Draws for ensemble members stream_base .. stream_base + n_members - 1 at step k."""
    if source.kind not in ("zero", "constant_vector", "gaussian", "uniform_ball"):
        raise InputError(f"{source.kind} disturbances depend on the state and cannot be drawn in blocks")
    return np.stack([draw(source, k, stream=stream_base + i) for i in range(n_members)])


def as_disturbance_fn(source: DisturbanceSource, stream: int = 0) -> Callable[[int, np.ndarray], np.ndarray]:
    """Adapt a source to the disturbance(k, z) callable used by simulate."""
    return lambda k, z: draw(source, k, z, stream=stream)


def from_spec(spec: DisturbanceSpec, dim: int, equilibrium=None) -> DisturbanceSource:
    """Build a source from its config record."""
    eq = None if equilibrium is None else np.asarray(equilibrium, dtype=float)
    dynamics = None
    if spec.kind == "feedback":
        rho, coupling = spec.feedback.rho, spec.feedback.gain
        dynamics = lambda k, e, z: rho * e + coupling * (z if eq is None else z - eq)  # noqa: E731
    return DisturbanceSource(
        kind=spec.kind,
        dim=dim,
        bound_Delta=spec.delta,
        sigma2=spec.sigma2,
        seed=spec.seed,
        feedback_dynamics=dynamics,
        vector=spec.vector,
        equilibrium=eq,
        gain=spec.static_map.gain if spec.static_map is not None else 0.0,
    )


# ---------------------------------------------------------------------------
# Dissipation and small gain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DissipationCertificate:
    """
    Storage function of the disturbance dynamics with decay a and supply b.

    V_Delta(k+1, Delta_k(e, z)) - V_Delta(k, e) <= -a |e| + b |z|
    """

    V_delta: Callable[[int, np.ndarray], float]
    a: float
    b: float
    m: float = 1.0

    def __post_init__(self):
        if min(self.a, self.b, self.m) <= 0:
            raise InputError(f"a, b and m must be positive, got a={self.a}, b={self.b}, m={self.m}")

    def with_weight(self, m: float) -> "DissipationCertificate":
        return DissipationCertificate(self.V_delta, self.a, self.b, m)


def norm_storage(k: int, e) -> float:
    """V_Delta(k, e) = |e|."""
    return float(np.linalg.norm(e))


def check_dissipation(
    cert: DissipationCertificate,
    dyn: FeedbackMap,
    samples: Iterable[Tuple[int, np.ndarray, np.ndarray]],
    tolerance: float = 1e-9,
    equilibrium=None,
) -> DissipationReport:
    """
    Largest sampled value of V_Delta(k+1, Delta_k(e, z)) - V_Delta(k, e) + a|e| - b|z|.

    Also reports |V_Delta(k, 0)| over the sampled k. |z| is measured from
    `equilibrium` when one is given.
    """
    worst, worst_k, zero_gap, count = -np.inf, None, 0.0, 0
    for k, e, z in samples:
        e = np.asarray(e, dtype=float)
        z = np.asarray(z, dtype=float)
        offset = z if equilibrium is None else z - np.asarray(equilibrium, dtype=float)
        gap = (
            cert.V_delta(k + 1, np.asarray(dyn(k, e, z), dtype=float))
            - cert.V_delta(k, e)
            + cert.a * float(np.linalg.norm(e))
            - cert.b * float(np.linalg.norm(offset))
        )
        if gap > worst:
            worst, worst_k = float(gap), int(k)
        zero_gap = max(zero_gap, abs(float(cert.V_delta(k, np.zeros_like(e)))))
        count += 1
    if count == 0:
        raise InputError("check_dissipation needs at least one sample")
    return DissipationReport(
        max_violation=worst,
        zero_storage_violation=zero_gap,
        n_samples=count,
        witness_k=worst_k,
        tolerance=tolerance,
    )


def small_gain_certificate(
    L_V: float,
    L_e_sup: float,
    tau_sup: float,
    a: float,
    b: float,
    metric_lower_bound: float = 1.0,
) -> Optional[float]:
    """
    Composition weight m for W = V + m V_Delta, or None when infeasible.

    Feasible m satisfy L_V L_e_sup / a <= m < (1 - tau_sup) metric_lower_bound / b;
    the midpoint is returned. Without coupling (L_e_sup = 0) the answer is 1
    whenever 1 is feasible.
    """
    if not 0 <= tau_sup < 1:
        raise InputError(f"tau_sup must lie in [0, 1), got {tau_sup}")
    if min(a, b, metric_lower_bound) <= 0 or L_V < 0 or L_e_sup < 0:
        raise InputError("a, b and metric_lower_bound must be positive; L_V and L_e_sup nonnegative")
    upper = (1.0 - tau_sup) * metric_lower_bound / b
    if L_e_sup == 0.0:
        return 1.0 if 1.0 < upper else upper / 2.0
    lower = L_V * L_e_sup / a
    if lower >= upper:
        logger.info("Small-gain interval empty: %.6g >= %.6g", lower, upper)
        return None
    return 0.5 * (lower + upper)


@dataclass
class InterconnectionResult:
    """Closed-loop run of an algorithm and its state-dependent disturbance."""

    states: np.ndarray
    disturbances: np.ndarray
    W: np.ndarray
    joint_norm: np.ndarray
    certified: bool
    m: Optional[float]
    strictly_decreasing: Optional[bool] = None
    violations: List[int] = field(default_factory=list)


def run_interconnection(
    sys: DynamicalSystem,
    source: DisturbanceSource,
    cert: DissipationCertificate,
    z0,
    e0,
    n_steps: int,
    lyapunov: LyapunovEstimate,
    m: Optional[float] = None,
) -> InterconnectionResult:
    """
    Simulate z_{k+1} = g_k(z_k, e_k) with e_k from a feedback or static-map source.

    W_k = V(k, z_k) + m V_Delta(k, e_k). When m comes from
    small_gain_certificate the result records whether W strictly decreased at every step
    where |(z_k - x*, e_k)| > 1e-10; without one it still simulates but makes
    no claim.
    """
    if source.kind not in ("feedback", "static_map"):
        raise InputError(f"interconnection needs a feedback or static_map source, got {source.kind}")
    weight = cert.m if m is None else m
    certified = m is not None
    if source.kind == "feedback":
        source.reset(e0)
    z = np.asarray(z0, dtype=float).reshape(sys.dim_state)
    states, noise = [z], []
    for k in range(n_steps + 1):
        e = draw(source, k, z)
        noise.append(e)
        if k == n_steps:
            break
        z = np.asarray(sys.disturbed(k, z, e), dtype=float)
        states.append(z)
    states = np.stack(states)
    noise = np.stack(noise)
    V = np.array([eval_lyapunov(lyapunov, k, states[k]) for k in range(n_steps + 1)], dtype=float)
    storage = np.array([cert.V_delta(k, noise[k]) for k in range(n_steps + 1)], dtype=float)
    W = V + weight * storage
    joint = np.sqrt(np.sum((states - sys.equilibrium) ** 2, axis=1) + np.sum(noise ** 2, axis=1))
    result = InterconnectionResult(states, noise, W, joint, certified, weight if certified else None)
    if not certified:
        logger.warning("No small-gain certificate for %s; W reported without a decrease claim", sys.name)
        return result
    active = joint[:-1] > DECREASE_FLOOR
    failing = np.nonzero(active & (W[1:] >= W[:-1]))[0]
    result.violations = [int(k) for k in failing]
    result.strictly_decreasing = len(failing) == 0
    return result
