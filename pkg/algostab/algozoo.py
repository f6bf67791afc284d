"""
Algorithm Zoo

Factories turning an optimization problem into a (system, metric, schedule)
triple with analytic constants: gradient descent on convex and strongly convex
losses, noisy gradient descent and the accelerated (heavy-ball style) method on
(theta, p) pairs. Also provides the ridge and logistic problems, synthetic
datasets, and the algorithmic-stability experiment built on them.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from algostab.disturbance import DisturbanceSource
from algostab.dynamics import DynamicalSystem
from algostab.errors import InputError
from algostab.lyapunov import (
    LyapunovEstimate,
    calibrate_c0,
    certified_hessian_bound,
    detect_horizon_K,
    lipschitz_LV_analytic,
    sum_lyapunov,
    sup_lyapunov,
)
from algostab.metrics import (
    PseudometricSpec,
    RateSchedule,
    constant_schedule,
    custom_table_schedule,
    euclidean,
    example25_schedule,
    loss_gap,
    shifted_loss_gap,
    strongly_convex_slack_rate,
)
from algostab.bounds import deterministic_bound
from algostab.schema import FactorySpec, Region
from algostab.utils.sampling import rng_stream, sample_region

logger = logging.getLogger(__name__)

PROBLEM_KINDS = ("quadratic", "ridge", "logistic_regression", "custom")
MINIMIZER_TOLERANCE = 1e-10
NEWTON_POLISH_STEPS = 3
DEFAULT_K_MAX = 200
N_CALIBRATION_PROBES = 100
REPLACEMENT_OFFSET = 1_000_000
PROBE_OFFSET = 2_000_000


# ---------------------------------------------------------------------------
# Problems and datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Feature/label records with clipped features (|x| <= clip) and |y| <= label_bound."""

    features: np.ndarray
    labels: np.ndarray
    clip: float = 1.0
    label_bound: float = 1.0
    kind: str = "regression"

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise InputError("features must be (n, dim) with one label per row")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def replace(self, index: int, x, y: float) -> "Dataset":
        """Copy with record `index` replaced by (x, y)."""
        features = self.features.copy()
        labels = self.labels.copy()
        features[index] = x
        labels[index] = y
        return Dataset(features, labels, self.clip, self.label_bound, self.kind)


def _clip_rows(x: np.ndarray, clip: float) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x * np.minimum(1.0, clip / np.maximum(norms, np.finfo(float).tiny))


def synthetic_records(
    indices: Sequence[int],
    dim: int,
    seed: int,
    kind: str = "regression",
    clip: float = 1.0,
    label_bound: float = 1.0,
    noise: float = 0.1,
):
    """
    Records with the given pool indices.

    Record i depends only on (seed, i), so datasets of different sizes share
    their leading records and replacement records never collide with them.
    """
    w = rng_stream(seed, 3).standard_normal(dim) / np.sqrt(dim)
    xs, ys = [], []
    for i in indices:
        rng = rng_stream(seed, 4, int(i))
        x = _clip_rows(rng.standard_normal(dim), clip)
        score = float(x @ w) + noise * float(rng.standard_normal())
        if kind == "classification":
            y = 1.0 if score >= 0 else -1.0
        else:
            y = float(np.clip(score, -label_bound, label_bound))
        xs.append(x)
        ys.append(y)
    return np.array(xs, dtype=float).reshape(len(xs), dim), np.array(ys, dtype=float)


def synthetic_ridge_dataset(
    n: int,
    dim: int,
    seed: int,
    clip: float = 1.0,
    label_bound: float = 1.0,
    noise: float = 0.1,
) -> Dataset:
    """Linear-model regression data with seeded standard normal features, clipped rows and clipped labels."""
    if n < 1 or dim < 1:
        raise InputError("dataset size and dimension must be positive")
    x, y = synthetic_records(range(n), dim, seed, "regression", clip, label_bound, noise)
    return Dataset(x, y, clip, label_bound, "regression")


def synthetic_classification_dataset(n: int, dim: int, seed: int, clip: float = 1.0, noise: float = 0.1) -> Dataset:
    """Same features as the ridge data with labels in {-1, +1}."""
    if n < 1 or dim < 1:
        raise InputError("dataset size and dimension must be positive")
    x, y = synthetic_records(range(n), dim, seed, "classification", clip, 1.0, noise)
    return Dataset(x, y, clip, 1.0, "classification")


@dataclass(frozen=True)
class ProblemSpec:
    """
    A smooth loss with its moduli.

    Attributes:
        kind: quadratic, ridge, logistic_regression or custom
        gamma: Strong-convexity modulus (0 for merely convex)
        beta: Smoothness modulus
        loss: l(x), broadcasting over leading axes
        grad: grad l(x), broadcasting over leading axes
        minimizer: x*, if known
        L_ell: Lipschitz constant of l on the working region, if known
        hessian: Constant Hessian of quadratic losses
        dataset: Training records of empirical-risk problems
        record_loss: l(theta; x, y) per record, shape (..., n_records)
        record_grad: grad l(theta; x, y) for paired rows of theta and records
        lam: Ridge/logistic regularization
    """

    kind: str
    gamma: float
    beta: float
    loss: Callable[[np.ndarray], Any]
    grad: Callable[[np.ndarray], np.ndarray]
    minimizer: Optional[np.ndarray] = None
    L_ell: Optional[float] = None
    hessian: Optional[np.ndarray] = None
    dataset: Optional[Dataset] = None
    record_loss: Optional[Callable] = None
    record_grad: Optional[Callable] = None
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise InputError(f"unknown problem kind '{self.kind}'")
        if self.gamma < 0 or not self.beta > 0:
            raise InputError(f"need gamma >= 0 and beta > 0, got gamma={self.gamma}, beta={self.beta}")
        if self.gamma > self.beta * (1.0 + 1e-12):
            raise InputError(f"gamma={self.gamma} exceeds beta={self.beta}")
        if self.minimizer is not None and self.kind in ("quadratic", "ridge"):
            residual = float(np.linalg.norm(self.grad(self.minimizer)))
            if residual > MINIMIZER_TOLERANCE * (1.0 + float(np.linalg.norm(self.minimizer))):
                raise InputError(f"minimizer has gradient norm {residual:.3g}")

    @property
    def dim(self) -> int:
        if self.minimizer is not None:
            return len(self.minimizer)
        return self.dataset.dim

    @property
    def kappa(self) -> float:
        return self.beta / self.gamma if self.gamma > 0 else np.inf


def quadratic_problem(
    eigenvalues: Optional[Sequence[float]] = None,
    gamma: Optional[float] = None,
    beta: Optional[float] = None,
    n: int = 1,
    center=None,
) -> ProblemSpec:
    """
    l(x) = (x - c)^T H (x - c) / 2 with diagonal H.

    Either give the eigenvalues, or gamma and beta (eigenvalues evenly spaced
    over [gamma, beta] in dimension n; a scalar problem uses beta). A declared
    gamma below the smallest eigenvalue is kept, so gamma=0 treats the
    problem as merely convex.
    """
    if eigenvalues is None:
        if beta is None:
            raise InputError("quadratic_problem needs eigenvalues or beta")
        low = beta if gamma is None else gamma
        eigenvalues = np.linspace(low, beta, n) if n > 1 else np.array([beta])
    eig = np.asarray(eigenvalues, dtype=float)
    if np.any(eig < 0):
        raise InputError("a convex quadratic needs nonnegative eigenvalues")
    H = np.diag(eig)
    c = np.zeros(len(eig)) if center is None else np.asarray(center, dtype=float).reshape(len(eig))
    declared = float(eig.min()) if gamma is None else float(gamma)
    if declared > eig.min() + 1e-12:
        raise InputError(f"declared gamma={declared} exceeds the smallest eigenvalue {eig.min()}")

    def loss(x):
        u = np.asarray(x, dtype=float) - c
        return 0.5 * np.sum((u @ H) * u, axis=-1)

    def grad(x):
        return (np.asarray(x, dtype=float) - c) @ H

    return ProblemSpec(
        kind="quadratic",
        gamma=declared,
        beta=float(eig.max()),
        loss=loss,
        grad=grad,
        minimizer=c,
        hessian=H,
    )


def _ridge_record_loss(lam: float):
    def record_loss(theta, X, y):
        theta = np.asarray(theta, dtype=float)
        residual = theta @ X.T - y
        return 0.5 * residual ** 2 + 0.5 * lam * np.sum(theta * theta, axis=-1, keepdims=True)

    return record_loss


def _ridge_record_grad(lam: float):
    def record_grad(theta, x, y):
        residual = np.sum(theta * x, axis=-1) - y
        return residual[..., None] * x + lam * theta

    return record_grad


def ridge_problem(dataset: Dataset, lam: float) -> ProblemSpec:
    """
    Regularized least squares mean((x^T theta - y)^2) / 2 + lam |theta|^2 / 2.

    L_ell bounds the per-record gradient on |theta| <= 2 clip yb / lam, the
    ball that gradient descent from zero never leaves.
    """
    if lam <= 0:
        raise InputError(f"ridge regularization must be positive, got {lam}")
    X, y, n = dataset.features, dataset.labels, dataset.n
    H = X.T @ X / n + lam * np.eye(dataset.dim)
    minimizer = np.linalg.solve(H, X.T @ y / n)
    eig = np.linalg.eigvalsh(H)
    radius = 2.0 * dataset.clip * dataset.label_bound / lam

    def loss(theta):
        theta = np.asarray(theta, dtype=float)
        residual = theta @ X.T - y
        return 0.5 * np.mean(residual ** 2, axis=-1) + 0.5 * lam * np.sum(theta * theta, axis=-1)

    def grad(theta):
        theta = np.asarray(theta, dtype=float)
        return (theta @ X.T - y) @ X / n + lam * theta

    return ProblemSpec(
        kind="ridge",
        gamma=float(eig[0]),
        beta=float(eig[-1]),
        loss=loss,
        grad=grad,
        minimizer=minimizer,
        L_ell=dataset.clip * (dataset.clip * radius + dataset.label_bound) + lam * radius,
        hessian=H,
        dataset=dataset,
        record_loss=_ridge_record_loss(lam),
        record_grad=_ridge_record_grad(lam),
        lam=lam,
    )


def logistic_problem(dataset: Dataset, lam: float = 0.0) -> ProblemSpec:
    """
    Regularized logistic regression mean(log(1 + exp(-y x^T theta))) + lam |theta|^2 / 2.

    gamma = lam and beta = clip^2 / 4 + lam hold for every dataset with
    clipped rows. The minimizer is computed with L-BFGS-B when lam > 0.
    """
    if lam < 0:
        raise InputError(f"regularization must be nonnegative, got {lam}")
    X, y, n = dataset.features, dataset.labels, dataset.n

    def record_loss(theta, Xr, yr):
        theta = np.asarray(theta, dtype=float)
        margins = (theta @ Xr.T) * yr
        return np.logaddexp(0.0, -margins) + 0.5 * lam * np.sum(theta * theta, axis=-1, keepdims=True)

    def record_grad(theta, x, yr):
        margin = np.sum(theta * x, axis=-1) * yr
        return (-yr * expit(-margin))[..., None] * x + lam * theta

    def loss(theta):
        return np.mean(record_loss(theta, X, y), axis=-1)

    def grad(theta):
        theta = np.asarray(theta, dtype=float)
        weights = -y * expit(-(theta @ X.T) * y)
        return weights @ X / n + lam * theta

    minimizer = None
    if lam > 0:
        result = minimize(
            loss, np.zeros(dataset.dim), jac=grad, method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 1e-15}
        )
        if not result.success:
            logger.warning("Logistic minimizer did not converge: %s", result.message)
        minimizer = np.asarray(result.x, dtype=float)
        # L-BFGS-B leaves |grad| near 1e-6
        for _ in range(NEWTON_POLISH_STEPS):
            margins = (X @ minimizer) * y
            curvature = expit(margins) * expit(-margins)
            hessian = (X.T * curvature) @ X / n + lam * np.eye(dataset.dim)
            minimizer = minimizer - np.linalg.solve(hessian, grad(minimizer))
    radius = 2.0 * dataset.clip / lam if lam > 0 else 0.0
    return ProblemSpec(
        kind="logistic_regression",
        gamma=lam,
        beta=dataset.clip ** 2 / 4.0 + lam,
        loss=loss,
        grad=grad,
        minimizer=minimizer,
        L_ell=dataset.clip + lam * radius,
        dataset=dataset,
        record_loss=record_loss,
        record_grad=record_grad,
        lam=lam,
    )


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------


@dataclass
class AlgorithmBundle:
    """A factory's output: the triple plus its problem, sample box and constants."""

    system: DynamicalSystem
    metric: PseudometricSpec
    schedule: RateSchedule
    problem: ProblemSpec
    region: Region
    step: float
    constants: Dict[str, Any] = field(default_factory=dict)
    noise: Optional[DisturbanceSource] = None
    algo: str = ""

    def lyapunov(self, form: str = "sup") -> LyapunovEstimate:
        """The converse Lyapunov estimate with the factory's certificates."""
        if form == "sup":
            return sup_lyapunov(self.system, self.metric, self.schedule, L_V=self.constants.get("L_V"))
        return sum_lyapunov(
            self.system, self.metric, self.schedule, L_V=self.constants.get("L_V"), L_H=self.constants.get("L_H")
        )


def _working_radius(region: Region, x_star, L_f: float, K: int, L_e: float, disturbance_radius: float) -> float:
    """Radius around x* containing every state V and its checks evaluate from the box."""
    grow = max(1.0, L_f)
    return (region.max_distance_from(x_star) * grow + L_e * disturbance_radius) * grow ** (K + 1)


def _gradient_step(problem: ProblemSpec, h: float):
    def nominal(k, x):
        return x - h * problem.grad(x)

    def disturbed(k, z, e):
        return z - h * (problem.grad(z) + e)

    return nominal, disturbed


def _flow_hessian(problem: ProblemSpec) -> Optional[float]:
    return 0.0 if problem.kind in ("quadratic", "ridge") else None


def _probe_starts(problem: ProblemSpec, region: Region, seed: int, n_probe: int = N_CALIBRATION_PROBES) -> np.ndarray:
    """Seeded starts in the box plus x* +/- radius along each Hessian eigenvector."""
    starts = [sample_region(region, n_probe, seed)]
    if problem.hessian is not None:
        _, vecs = np.linalg.eigh(problem.hessian)
        lo, hi = region.as_arrays()
        radius = float(np.min(hi - lo)) / 2.0
        x_star = problem.minimizer
        starts.append(x_star + radius * vecs.T)
        starts.append(x_star - radius * vecs.T)
    return np.vstack(starts)


def _state_region(problem: ProblemSpec, region_radius: float) -> Region:
    if problem.minimizer is None:
        raise InputError("factories need a problem with a known minimizer")
    return Region.box(problem.minimizer, region_radius)


def make_gd_convex(
    problem: ProblemSpec,
    h: Optional[float] = None,
    region_radius: float = 1.0,
    disturbance_radius: float = 0.1,
    K_max: int = DEFAULT_K_MAX,
    seed: int = 0,
) -> AlgorithmBundle:
    """
    Gradient descent x' = x - h grad l(x) on a beta-smooth convex loss with h = 1/beta.

    Metric: loss gap. Schedule: tau(i) = 1 - 1/(i + 5). K is detected and c0
    calibrated over seeded probes (plus eigenvector probes for quadratics),
    with a 5% margin.

    Raises:
        InputError: The problem declares gamma > 0 (use make_gd_strongly_convex)
    """
    if problem.gamma > 0:
        raise InputError(
            f"problem declares gamma={problem.gamma} > 0; use make_gd_strongly_convex for strongly convex losses"
        )
    h = 1.0 / problem.beta if h is None else h
    if not 0 < h <= 1.0 / problem.beta * (1.0 + 1e-12):
        raise InputError(f"convex gradient descent needs 0 < h <= 1/beta = {1.0 / problem.beta:.6g}, got {h}")
    region = _state_region(problem, region_radius)
    nominal, disturbed = _gradient_step(problem, h)
    d = problem.dim
    channel = -h * np.eye(d)
    system = DynamicalSystem(
        dim_state=d,
        dim_disturbance=d,
        nominal=nominal,
        disturbed=disturbed,
        equilibrium=problem.minimizer,
        disturbance_gain=h,
        affine_channel=lambda k: channel,
        lipschitz_f=1.0,
        flow_hessian_bound=_flow_hessian(problem),
        name="gd_convex",
    )
    probes = _probe_starts(problem, region, seed)
    provisional = loss_gap(problem.loss, 1.0, problem.beta)
    K = detect_horizon_K(system, provisional, example25_schedule(), probes, K_max)
    c0 = calibrate_c0(system, provisional, example25_schedule(), probes, K_max)
    schedule = example25_schedule(c0=c0, horizon_K=K)
    L_ell = problem.beta * _working_radius(region, problem.minimizer, 1.0, K, h, disturbance_radius)
    metric = loss_gap(problem.loss, L_ell, problem.beta)
    L_V = lipschitz_LV_analytic(L_ell, 1.0, K, schedule.tau(0))
    constants = {"h": h, "L_f": 1.0, "L_e": h, "L_d": L_ell, "c0": c0, "K": K, "L_V": L_V, "tau0": schedule.tau(0)}
    _add_hessian_constant(constants, system, metric, schedule)
    logger.info("gd_convex: K=%d c0=%.4g L_V=%.4g", K, c0, L_V)
    return AlgorithmBundle(system, metric, schedule, problem, region, h, constants, algo="gd_convex")


def _add_hessian_constant(constants: Dict[str, Any], system: DynamicalSystem, metric: PseudometricSpec, schedule) -> None:
    if metric.hessian_bound_LHd is None or system.flow_hessian_bound is None:
        return
    constants["L_H"] = certified_hessian_bound(
        schedule.horizon_K,
        schedule.tau(0),
        constants["L_f"],
        metric.norm_bound_Ld,
        metric.hessian_bound_LHd,
        system.flow_hessian_bound,
    )


def _require_strongly_convex(problem: ProblemSpec, what: str) -> None:
    if problem.gamma <= 0:
        raise InputError(f"{what} needs gamma > 0; use make_gd_convex for merely convex losses")


def make_gd_strongly_convex(
    problem: ProblemSpec,
    h: Optional[float] = None,
    region_radius: float = 1.0,
) -> AlgorithmBundle:
    """
    Gradient descent with h = 2/(beta + gamma) under the Euclidean metric.

    tau = max(|1 - h gamma|, |1 - h beta|), which is (beta - gamma)/(beta + gamma)
    at the default step; c0 = 1, K = 1, L_e = h.
    """
    _require_strongly_convex(problem, "make_gd_strongly_convex")
    g, b = problem.gamma, problem.beta
    h = 2.0 / (b + g) if h is None else h
    if not 0 < h <= 2.0 / (b + g) * (1.0 + 1e-12):
        raise InputError(f"need 0 < h <= 2/(beta + gamma) = {2.0 / (b + g):.6g}, got {h}")
    tau = (b - g) / (b + g) if h == 2.0 / (b + g) else max(abs(1.0 - h * g), abs(1.0 - h * b))
    nominal, disturbed = _gradient_step(problem, h)
    d = problem.dim
    channel = -h * np.eye(d)
    system = DynamicalSystem(
        dim_state=d,
        dim_disturbance=d,
        nominal=nominal,
        disturbed=disturbed,
        equilibrium=problem.minimizer,
        disturbance_gain=h,
        affine_channel=lambda k: channel,
        lipschitz_f=tau,
        flow_hessian_bound=_flow_hessian(problem),
        name="gd_strongly_convex",
    )
    schedule = constant_schedule(tau, c0=1.0, horizon_K=1)
    metric = euclidean()
    # the k'=1 term never exceeds the k'=0 term, so V is the plain distance
    L_V = lipschitz_LV_analytic(1.0, tau, 1, tau) if tau > 0 else 1.0
    constants = {"h": h, "tau": tau, "L_f": tau, "L_e": h, "L_d": 1.0, "c0": 1.0, "K": 1, "L_V": L_V, "tau0": tau}
    return AlgorithmBundle(
        system, metric, schedule, problem, _state_region(problem, region_radius), h, constants, algo="gd_strongly_convex"
    )


def horizon_tuned_step(gamma: float, beta: float, N: int) -> float:
    """h = (beta + gamma)/(2 gamma beta) * log(N)/N, balancing the rate term against the noise floor after N steps."""
    if gamma <= 0 or N < 2:
        raise InputError("horizon-tuned steps need gamma > 0 and N >= 2")
    return (beta + gamma) / (2.0 * gamma * beta) * np.log(N) / N


def noisy_gd_rate(gamma: float, beta: float, h: float) -> float:
    """Loss-gap rate 1 - 2 h gamma beta / (beta + gamma)."""
    return 1.0 - 2.0 * h * gamma * beta / (beta + gamma)


def make_noisy_gd(
    problem: ProblemSpec,
    sigma2: float,
    h: Optional[float] = None,
    region_radius: float = 1.0,
    disturbance_radius: float = 0.1,
    K_max: int = DEFAULT_K_MAX,
    seed: int = 0,
) -> AlgorithmBundle:
    """
    Gradient descent with injected noise, z' = z - h (grad l(z) + n), under the loss-gap metric.

    tau = 1 - 2 h gamma beta / (beta + gamma) and c0 = beta/gamma; the noise
    enters through the affine channel A = -h I. With sigma2 = 0 trajectories
    coincide bitwise with make_gd_strongly_convex at the same h.
    """
    _require_strongly_convex(problem, "make_noisy_gd")
    if sigma2 < 0:
        raise InputError(f"sigma2 must be nonnegative, got {sigma2}")
    g, b = problem.gamma, problem.beta
    h = 2.0 / (b + g) if h is None else h
    if not 0 < h <= 2.0 / (b + g) * (1.0 + 1e-12):
        raise InputError(f"noisy gradient descent needs 0 < h <= 2/(beta + gamma) = {2.0 / (b + g):.6g}, got {h}")
    tau = noisy_gd_rate(g, b, h)
    L_f = max(abs(1.0 - h * g), abs(1.0 - h * b))
    nominal, disturbed = _gradient_step(problem, h)
    d = problem.dim
    channel = -h * np.eye(d)
    system = DynamicalSystem(
        dim_state=d,
        dim_disturbance=d,
        nominal=nominal,
        disturbed=disturbed,
        equilibrium=problem.minimizer,
        disturbance_gain=h,
        affine_channel=lambda k: channel,
        lipschitz_f=L_f,
        flow_hessian_bound=_flow_hessian(problem),
        name="noisy_gd",
    )
    region = _state_region(problem, region_radius)
    c0 = b / g
    provisional = loss_gap(problem.loss, 1.0, b)
    K = detect_horizon_K(system, provisional, constant_schedule(tau), _probe_starts(problem, region, seed), K_max)
    schedule = constant_schedule(tau, c0=c0, horizon_K=K)
    L_ell = b * _working_radius(region, problem.minimizer, L_f, K, h, disturbance_radius)
    metric = loss_gap(problem.loss, L_ell, b)
    L_V = lipschitz_LV_analytic(L_ell, L_f, K, tau)
    constants = {"h": h, "tau": tau, "L_f": L_f, "L_e": h, "L_d": L_ell, "c0": c0, "K": K, "L_V": L_V, "tau0": tau}
    _add_hessian_constant(constants, system, metric, schedule)
    noise = DisturbanceSource(kind="gaussian", dim=d, sigma2=sigma2, seed=seed)
    return AlgorithmBundle(system, metric, schedule, problem, region, h, constants, noise, algo="noisy_gd")


class AcceleratedParameters(NamedTuple):
    d_bar: float
    beta_bar: float
    c1: float
    tau: float


def accelerated_parameters(gamma: float, beta: float, h: float) -> AcceleratedParameters:
    """d = 1/(1 + sqrt(beta/gamma)), beta_bar = 1 - 2d, c1 = beta_bar/(1 - 2 d h) - h, tau = 1 - d h."""
    d_bar = 1.0 / (1.0 + np.sqrt(beta / gamma))
    beta_bar = 1.0 - 2.0 * d_bar
    denom = 1.0 - 2.0 * d_bar * h
    c1 = -h if beta_bar == 0.0 or denom == 0.0 else beta_bar / denom - h
    return AcceleratedParameters(float(d_bar), float(beta_bar), float(c1), float(1.0 - d_bar * h))


def _accelerated_lipschitz(problem: ProblemSpec, params: AcceleratedParameters, h: float) -> float:
    """Largest spectral norm of the per-eigenvalue (theta, p) update matrix over the Hessian spectrum."""
    if problem.hessian is not None:
        spectrum = np.linalg.eigvalsh(problem.hessian)
    else:
        spectrum = np.linspace(problem.gamma, problem.beta, 51)
    decay = 1.0 - 2.0 * params.d_bar * h
    worst = 0.0
    for lam in spectrum:
        pu = -h * lam / problem.beta
        pp = decay - h * lam * params.beta_bar / problem.beta
        block = np.array([[1.0 + h * pu, h * pp], [pu, pp]])
        worst = max(worst, float(np.linalg.norm(block, 2)))
    return worst


def make_accelerated_gd(
    problem: ProblemSpec,
    h: float = 1.0,
    sigma2: float = 0.0,
    region_radius: float = 1.0,
    disturbance_radius: float = 0.1,
    K_max: int = DEFAULT_K_MAX,
    seed: int = 0,
) -> AlgorithmBundle:
    """
    Accelerated method on (theta, p):

        p'     = (1 - 2 d h) p - h (grad l(theta + beta_bar p) + n) / beta
        theta' = theta + h p'

    Metric: |l(theta + c1 p) - l(theta*)|. Schedule: tau = 1 - d h with
    c0 = max(beta/gamma, calibrated). Starts are sampled with p = 0. The noise
    channel is [-h^2/beta I; -h/beta I], so L_e = (h/beta) sqrt(1 + h^2).
    """
    _require_strongly_convex(problem, "make_accelerated_gd")
    if not 0 < h <= 1:
        raise InputError(f"accelerated method needs h in (0, 1], got {h}")
    if sigma2 < 0:
        raise InputError(f"sigma2 must be nonnegative, got {sigma2}")
    params = accelerated_parameters(problem.gamma, problem.beta, h)
    b, d = problem.beta, problem.dim
    decay = 1.0 - 2.0 * params.d_bar * h

    def split(s):
        s = np.asarray(s, dtype=float)
        return s[..., :d], s[..., d:]

    def disturbed(k, z, e):
        theta, p = split(z)
        p_next = decay * p - h * (problem.grad(theta + params.beta_bar * p) + e) / b
        return np.concatenate([theta + h * p_next, p_next], axis=-1)

    def nominal(k, x):
        theta, p = split(x)
        p_next = decay * p - h * problem.grad(theta + params.beta_bar * p) / b
        return np.concatenate([theta + h * p_next, p_next], axis=-1)

    channel = np.vstack([-(h * h / b) * np.eye(d), -(h / b) * np.eye(d)])
    L_e = (h / b) * np.sqrt(1.0 + h * h)
    L_f = _accelerated_lipschitz(problem, params, h)
    x_star = np.concatenate([problem.minimizer, np.zeros(d)])
    system = DynamicalSystem(
        dim_state=2 * d,
        dim_disturbance=d,
        nominal=nominal,
        disturbed=disturbed,
        equilibrium=x_star,
        disturbance_gain=L_e,
        affine_channel=lambda k: channel,
        lipschitz_f=L_f,
        flow_hessian_bound=_flow_hessian(problem),
        name="accelerated_gd",
    )
    region = Region(
        lower=list(problem.minimizer - region_radius) + [0.0] * d,
        upper=list(problem.minimizer + region_radius) + [0.0] * d,
    )
    theta_probes = _probe_starts(problem, _state_region(problem, region_radius), seed)
    probes = np.hstack([theta_probes, np.zeros_like(theta_probes)])
    provisional = shifted_loss_gap(problem.loss, d, params.c1, 1.0, b)
    base = constant_schedule(params.tau)
    K = detect_horizon_K(system, provisional, base, probes, K_max)
    c0 = max(b / problem.gamma, calibrate_c0(system, provisional, base, probes, K_max))
    schedule = constant_schedule(params.tau, c0=c0, horizon_K=K)
    stretch = np.sqrt(1.0 + params.c1 ** 2)
    L_ell = b * stretch * _working_radius(region, x_star, L_f, K, L_e, disturbance_radius)
    metric = shifted_loss_gap(problem.loss, d, params.c1, L_ell, b)
    L_V = lipschitz_LV_analytic(metric.norm_bound_Ld, L_f, K, params.tau)
    constants = {
        "h": h,
        "d_bar": params.d_bar,
        "beta_bar": params.beta_bar,
        "c1": params.c1,
        "tau": params.tau,
        "L_f": L_f,
        "L_e": L_e,
        "L_d": metric.norm_bound_Ld,
        "c0": c0,
        "K": K,
        "L_V": L_V,
        "tau0": params.tau,
    }
    _add_hessian_constant(constants, system, metric, schedule)
    noise = DisturbanceSource(kind="gaussian", dim=d, sigma2=sigma2, seed=seed)
    return AlgorithmBundle(system, metric, schedule, problem, region, h, constants, noise, algo="accelerated_gd")


def factory_from_spec(spec: FactorySpec, disturbance_radius: float = 0.1) -> AlgorithmBundle:
    """Build the configured factory on a quadratic with spectrum over [gamma, beta] and a seeded minimizer."""
    center = rng_stream(spec.seed, 9).uniform(-1.0, 1.0, spec.n)
    if spec.algo == "gd_convex":
        eig = np.linspace(max(spec.gamma, 0.0), spec.beta, spec.n) if spec.n > 1 else [spec.beta]
        problem = quadratic_problem(eigenvalues=eig, gamma=0.0, center=center)
        return make_gd_convex(problem, spec.h, spec.region_radius, disturbance_radius, seed=spec.seed)
    problem = quadratic_problem(gamma=spec.gamma, beta=spec.beta, n=spec.n, center=center)
    if spec.algo == "gd_strongly_convex":
        return make_gd_strongly_convex(problem, spec.h, spec.region_radius)
    if spec.algo == "noisy_gd":
        return make_noisy_gd(problem, spec.sigma2, spec.h, spec.region_radius, disturbance_radius, seed=spec.seed)
    return make_accelerated_gd(
        problem, 1.0 if spec.h is None else spec.h, spec.sigma2, spec.region_radius, disturbance_radius, seed=spec.seed
    )


# ---------------------------------------------------------------------------
# Noise-floor constants
# ---------------------------------------------------------------------------


class PrivacyConstants(NamedTuple):
    kappa: float
    plain: float
    accelerated: float
    ratio: float


def privacy_bound_constants(gamma: float, beta: float) -> PrivacyConstants:
    """
    Coefficients of sigma2 log(N)/N in the asymptotic noise floors.

    Plain noisy GD with the horizon-tuned step gives (beta + gamma)^2/(8 gamma^2 beta);
    the accelerated method with h = log(N)/(d N) gives 1/(2 beta d^2). Their ratio
    (kappa + 1)^2 / (4 (1 + sqrt(kappa))^2) grows linearly in kappa.
    """
    if gamma <= 0 or beta < gamma:
        raise InputError(f"need 0 < gamma <= beta, got gamma={gamma}, beta={beta}")
    d_bar = 1.0 / (1.0 + np.sqrt(beta / gamma))
    plain = (beta + gamma) ** 2 / (8.0 * gamma ** 2 * beta)
    accelerated = 1.0 / (2.0 * beta * d_bar ** 2)
    return PrivacyConstants(beta / gamma, plain, accelerated, plain / accelerated)


# ---------------------------------------------------------------------------
# Algorithmic stability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepPolicy:
    """
    Step-size rule for training runs.

    constant: h = scale * 2/(beta + gamma); horizon_tuned: (beta + gamma)/(2 gamma beta)
    log(n)/n; decaying: h_j = (scale/beta)/sqrt(j + 1), requiring scale <= 2.
    """

    kind: str = "constant"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "horizon_tuned", "decaying"):
            raise InputError(f"unknown step policy '{self.kind}'")
        if not self.scale > 0:
            raise InputError("step scale must be positive")
        if self.kind == "decaying" and self.scale > 2:
            raise InputError("decaying steps need scale <= 2 to stay nonexpansive")
        if self.kind == "constant" and self.scale > 1:
            raise InputError("constant steps need scale <= 1")


def step_schedule(policy: StepPolicy, iters: int, gamma: float, beta: float, n: int) -> np.ndarray:
    """Step sizes h_0 .. h_{iters-1}."""
    if policy.kind == "constant":
        if gamma + beta <= 0:
            raise InputError("constant steps need beta > 0")
        return np.full(iters, policy.scale * 2.0 / (beta + gamma))
    if policy.kind == "horizon_tuned":
        return np.full(iters, horizon_tuned_step(gamma, beta, n))
    return (policy.scale / beta) / np.sqrt(np.arange(iters) + 1.0)


def stability_bound(
    L_ell: float,
    steps: np.ndarray,
    gamma: float,
    beta: float,
    n: int,
    policy: StepPolicy,
    slack_delta: float = 0.5,
) -> float:
    """
    Bound on the loss change from replacing one of n records.

    The replaced record perturbs the averaged gradient by |e_j| <= 2 L_ell / n
    through the channel -h_j, so the iterates differ by at most the
    deterministic bound from a common start, and the loss by L_ell times that.
    Default constant steps on strongly convex losses use the slackened rate
    (beta - delta gamma)/(beta + gamma); other policies use the per-step
    contraction max(|1 - h_j gamma|, |1 - h_j beta|) (all ones when gamma = 0).
    """
    iters = len(steps)
    if policy.kind == "constant" and policy.scale == 1.0 and gamma > 0:
        schedule = constant_schedule(strongly_convex_slack_rate(beta, gamma, slack_delta))
    else:
        rates = np.maximum(np.abs(1.0 - steps * gamma), np.abs(1.0 - steps * beta))
        schedule = custom_table_schedule(np.maximum.accumulate(np.minimum(rates, 1.0)))
    drift = deterministic_bound(1.0, schedule, 0.0, 1.0, steps, 2.0 * L_ell / n, iters)
    return L_ell * drift


def _train(problem: ProblemSpec, steps: np.ndarray, theta0: np.ndarray, extra=None) -> np.ndarray:
    theta = np.array(theta0, dtype=float)
    for h in steps:
        g = problem.grad(theta)
        if extra is not None:
            g = g + extra(theta)
        theta = theta - h * g
    return theta


def _build_problem(kind: str, dataset: Dataset, lam: float) -> ProblemSpec:
    if kind == "ridge":
        return ridge_problem(dataset, lam)
    if kind == "logistic":
        return logistic_problem(dataset, lam)
    raise InputError(f"unknown stability problem '{kind}'")


def _uniform_moduli(kind: str, dataset: Dataset, lam: float):
    """gamma and beta valid for every dataset with the same clipping."""
    if kind == "ridge":
        return lam, dataset.clip ** 2 + lam
    return lam, dataset.clip ** 2 / 4.0 + lam


def stability_gap(
    dataset: Dataset,
    dataset_prime: Dataset,
    kind: str,
    lam: float,
    steps: np.ndarray,
    probes,
) -> float:
    """max over probe records of |l(theta_T^D'; z) - l(theta_T^D; z)| for runs from theta_0 = 0."""
    px, py = probes
    theta0 = np.zeros(dataset.dim)
    a = _build_problem(kind, dataset, lam)
    b = a if dataset_prime is dataset else _build_problem(kind, dataset_prime, lam)
    theta = _train(a, steps, theta0)
    theta_prime = _train(b, steps, theta0)
    return float(np.max(np.abs(a.record_loss(theta_prime, px, py) - a.record_loss(theta, px, py))))


@dataclass
class StabilityResult:
    n: int
    iters: int
    estimate: float
    bound: float
    L_ell: float
    gamma: float
    beta: float
    gaps: List[float] = field(default_factory=list)

    @property
    def within_bound(self) -> bool:
        return self.estimate <= self.bound


def run_stability_experiment(
    n: int,
    iters: int,
    policy: StepPolicy,
    seed: int,
    kind: str = "ridge",
    dim: int = 5,
    lam: float = 0.1,
    n_draws: int = 100,
    n_probe: int = 64,
    slack_delta: float = 0.5,
    clip: float = 1.0,
) -> StabilityResult:
    """
    Estimate the algorithmic stability of gradient descent on n records.

    Trains from theta_0 = 0 on D and, for each of n_draws seeded replacements,
    on D' with one record swapped for a fresh one. All replacements run as one
    batch: their gradients are the D gradient plus (grad l(.; new) - grad l(.; old))/n.
    The estimate is the mean over draws of the largest loss change on a fixed
    probe set.

    Returns:
        StabilityResult with the estimate and the theoretical bound
    """
    if n < 2:
        raise InputError(f"stability needs at least 2 records, got {n}")
    if iters < 1 or n_draws < 1 or n_probe < 1:
        raise InputError("iters, n_draws and n_probe must be positive")
    record_kind = "regression" if kind == "ridge" else "classification"
    dataset = (
        synthetic_ridge_dataset(n, dim, seed, clip)
        if kind == "ridge"
        else synthetic_classification_dataset(n, dim, seed, clip)
    )
    problem = _build_problem(kind, dataset, lam)
    gamma, beta = _uniform_moduli(kind, dataset, lam)
    steps = step_schedule(policy, iters, gamma, beta, n)

    replaced = rng_stream(seed, 5).integers(0, n, size=n_draws)
    new_x, new_y = synthetic_records(REPLACEMENT_OFFSET + np.arange(n_draws), dim, seed, record_kind, clip)
    old_x, old_y = dataset.features[replaced], dataset.labels[replaced]
    probes = synthetic_records(PROBE_OFFSET + np.arange(n_probe), dim, seed, record_kind, clip)

    theta0 = np.zeros(dim)
    theta = _train(problem, steps, theta0)

    def swap(th):
        return (problem.record_grad(th, new_x, new_y) - problem.record_grad(th, old_x, old_y)) / n

    theta_prime = _train(problem, steps, np.tile(theta0, (n_draws, 1)), swap)
    losses = problem.record_loss(theta_prime, *probes)
    gaps = np.max(np.abs(losses - problem.record_loss(theta, *probes)[None, :]), axis=1)
    bound = stability_bound(problem.L_ell, steps, gamma, beta, n, policy, slack_delta)
    estimate = float(gaps.mean())
    logger.info("stability n=%d iters=%d: estimate=%.4g bound=%.4g", n, iters, estimate, bound)
    return StabilityResult(n, iters, estimate, bound, problem.L_ell, gamma, beta, gaps.tolist())
