"""
Pseudometrics and Rate Schedules

Distance-like functions d with a norm bound d(x, y) <= L_d |x - y|, the
nondecreasing contraction schedule tau(i) with its constant c0 and attainment
horizon K, and the weight Phi(k, k') = 1 / prod_{i=k}^{k+k'-1} tau(i).
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from algostab.errors import InputError
from algostab.schema import AxiomReport, Region, ScheduleSpec
from algostab.utils.numerics import exp_clamped, exp_clamped_array, safe_log, vector_norm
from algostab.utils.sampling import sobol_unit, scale_to_region

logger = logging.getLogger(__name__)

PSEUDOMETRIC_KINDS = {"euclidean", "loss_gap", "shifted_loss_gap", "custom"}
MONOTONE_CHECK_HORIZON = 10_000


@dataclass(frozen=True)
class PseudometricSpec:
    """
    A pseudometric d with norm-bound constant L_d.

    Attributes:
        eval: d(x, y); built-in kinds broadcast over leading axes
        norm_bound_Ld: Constant in d(x, y) <= L_d |x - y| on the working region
        hessian_bound_LHd: Bound on the Hessian of d(., x*), if d is smooth
        kind: euclidean, loss_gap, shifted_loss_gap or custom
        norm_ord: Norm used for |x - y|
    """

    eval: Callable[[np.ndarray, np.ndarray], Any]
    norm_bound_Ld: float
    hessian_bound_LHd: Optional[float] = None
    kind: str = "custom"
    norm_ord: Any = 2
    name: str = ""

    def __post_init__(self):
        if self.kind not in PSEUDOMETRIC_KINDS:
            raise InputError(f"unknown pseudometric kind '{self.kind}'")
        if not self.norm_bound_Ld > 0:
            raise InputError(f"norm_bound_Ld must be positive, got {self.norm_bound_Ld}")
        if self.hessian_bound_LHd is not None and self.hessian_bound_LHd < 0:
            raise InputError("hessian_bound_LHd must be nonnegative")


def euclidean(norm_ord=2, scale: float = 1.0) -> PseudometricSpec:
    """d(x, y) = scale * |x - y|."""
    return PseudometricSpec(
        eval=lambda x, y: scale * vector_norm(np.asarray(x) - np.asarray(y), ord=norm_ord),
        norm_bound_Ld=scale,
        kind="euclidean",
        norm_ord=norm_ord,
        name="euclidean" if scale == 1.0 else f"{scale:g}*euclidean",
    )


def loss_gap(loss: Callable[[np.ndarray], Any], L_ell: float, L_Hd: Optional[float] = None) -> PseudometricSpec:
    """
    d(x, y) = |loss(x) - loss(y)|.

    Symmetric by construction; against a minimizer it equals loss(x) - loss(x*).
    L_ell must bound the gradient of `loss` where the metric is evaluated.
    """
    return PseudometricSpec(
        eval=lambda x, y: np.abs(loss(x) - loss(y)),
        norm_bound_Ld=L_ell,
        hessian_bound_LHd=L_Hd,
        kind="loss_gap",
        name="loss_gap",
    )


def shifted_loss_gap(
    loss: Callable[[np.ndarray], Any],
    dim: int,
    c1: float,
    L_ell: float,
    L_Hd: Optional[float] = None,
) -> PseudometricSpec:
    """
    d((theta, p), (theta', p')) = |loss(theta + c1 p) - loss(theta' + c1 p')|.

    States are concatenations (theta, p) of length 2 * dim.
    """

    def shifted(s):
        s = np.asarray(s, dtype=float)
        return s[..., :dim] + c1 * s[..., dim:]

    stretch = float(np.sqrt(1.0 + c1 * c1))
    return PseudometricSpec(
        eval=lambda x, y: np.abs(loss(shifted(x)) - loss(shifted(y))),
        norm_bound_Ld=L_ell * stretch,
        hessian_bound_LHd=None if L_Hd is None else L_Hd * stretch ** 2,
        kind="shifted_loss_gap",
        name="shifted_loss_gap",
    )


def pseudometric_eval(d: PseudometricSpec, x, y) -> float:
    """Evaluate d(x, y) after checking the dimensions agree."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1:] != y.shape[-1:]:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    value = d.eval(x, y)
    return float(value) if np.ndim(value) == 0 else np.asarray(value, dtype=float)


def check_pseudometric_axioms(d: PseudometricSpec, region: Region, n_samples: int, seed: int) -> AxiomReport:
    """
    Sample triples from the box and report the worst violation of each axiom.

    Violations are measured as: |d(x, x)| for identity, |d(x, y) - d(y, x)|
    for symmetry, d(x, z) - d(x, y) - d(y, z) for the triangle inequality,
    d(x, y) - L_d |x - y| for the norm bound, and -d(x, y) for nonnegativity.
    """
    if n_samples < 1:
        raise InputError(f"n_samples must be >= 1, got {n_samples}")
    dim = region.dim
    unit = sobol_unit(3 * dim, n_samples, seed)
    xs = scale_to_region(unit[:, :dim], region)
    ys = scale_to_region(unit[:, dim : 2 * dim], region)
    zs = scale_to_region(unit[:, 2 * dim :], region)

    report = dict(identity=0.0, symmetry=0.0, triangle=0.0, norm_bound=0.0, nonnegativity=0.0)
    for x, y, z in zip(xs, ys, zs):
        dxx = pseudometric_eval(d, x, x)
        dxy = pseudometric_eval(d, x, y)
        dyx = pseudometric_eval(d, y, x)
        dyz = pseudometric_eval(d, y, z)
        dxz = pseudometric_eval(d, x, z)
        report["identity"] = max(report["identity"], abs(dxx))
        report["symmetry"] = max(report["symmetry"], abs(dxy - dyx))
        report["triangle"] = max(report["triangle"], dxz - dxy - dyz)
        bound = d.norm_bound_Ld * float(np.linalg.norm(x - y, ord=d.norm_ord))
        report["norm_bound"] = max(report["norm_bound"], dxy - bound)
        report["nonnegativity"] = max(report["nonnegativity"], -dxy, -dxx)
    return AxiomReport(n_samples=n_samples, **report)


# ---------------------------------------------------------------------------
# Rate schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateSchedule:
    """
    Nondecreasing contraction schedule with constant c0 and horizon K.

    d(phi(k', k, xi), x*) <= c0 prod tau(i) d(xi, x*) for all k', and without c0
    once k' >= K.
    """

    tau: Callable[[int], float]
    c0: float
    horizon_K: int
    kind: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)
    monotone_nondecreasing: bool = True

    def __post_init__(self):
        if not self.c0 > 0:
            raise InputError(f"c0 must be positive, got {self.c0}")
        if self.horizon_K < 0:
            raise InputError(f"horizon_K must be nonnegative, got {self.horizon_K}")
        values = self.tau_values(0, MONOTONE_CHECK_HORIZON + 1)
        if np.any(values < 0) or np.any(values > 1):
            raise InputError(f"tau must lie in [0, 1]; found values in [{values.min()}, {values.max()}]")
        if np.any(np.diff(values) < -1e-15):
            raise InputError("tau must be nondecreasing")
        if values[0] == 0.0:
            logger.debug("Schedule %s has tau(0) = 0 (one-step convergence)", self.kind)

    def tau_values(self, start: int, count: int) -> np.ndarray:
        return np.array([self.tau(i) for i in range(start, start + count)], dtype=float)

    def with_constants(self, c0: Optional[float] = None, horizon_K: Optional[int] = None) -> "RateSchedule":
        return dataclasses.replace(
            self,
            c0=self.c0 if c0 is None else c0,
            horizon_K=self.horizon_K if horizon_K is None else horizon_K,
        )

    def summary(self) -> Dict[str, Any]:
        return {"kind": self.kind, "tau0": float(self.tau(0)), "c0": self.c0, "K": self.horizon_K, **self.params}


def constant_schedule(tau: float, c0: float = 1.0, horizon_K: int = 1) -> RateSchedule:
    tau = float(tau)
    return RateSchedule(tau=lambda i: tau, c0=c0, horizon_K=horizon_K, kind="constant", params={"tau": tau})


def example25_schedule(c0: float = 1.0, horizon_K: int = 1) -> RateSchedule:
    """tau(i) = 1 - 1/(i + 5), whose products telescope to (k + 4)/(k + k' + 4)."""
    return RateSchedule(tau=lambda i: 1.0 - 1.0 / (i + 5), c0=c0, horizon_K=horizon_K, kind="example25")


def custom_table_schedule(table: Sequence[float], c0: float = 1.0, horizon_K: int = 1) -> RateSchedule:
    """tau(i) = table[i], with the last entry repeated beyond the table."""
    values = tuple(float(v) for v in table)
    if not values:
        raise InputError("custom table must be nonempty")
    last = len(values) - 1
    return RateSchedule(
        tau=lambda i: values[min(i, last)],
        c0=c0,
        horizon_K=horizon_K,
        kind="custom-table",
        params={"table": list(values)},
    )


def convex_slack_schedule(exponent: float = 0.5, c0: float = 1.0, horizon_K: int = 1) -> RateSchedule:
    """tau(j) = (1 - 1/(j + 2))^c, the slackened rate for merely convex losses."""
    if exponent <= 0:
        raise InputError(f"exponent must be positive, got {exponent}")
    return RateSchedule(
        tau=lambda j: (1.0 - 1.0 / (j + 2)) ** exponent,
        c0=c0,
        horizon_K=horizon_K,
        kind="convex_slack",
        params={"exponent": exponent},
    )


def strongly_convex_slack_rate(beta: float, gamma: float, delta: float) -> float:
    """Slackened strongly convex rate (beta - delta*gamma)/(beta + gamma), delta in (0, 1]."""
    if not 0 < delta <= 1:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    if gamma < 0 or beta <= 0 or gamma > beta:
        raise InputError(f"need 0 <= gamma <= beta with beta > 0, got gamma={gamma}, beta={beta}")
    return (beta - delta * gamma) / (beta + gamma)


def schedule_from_spec(spec: ScheduleSpec) -> RateSchedule:
    """Build a schedule from its config record."""
    if spec.kind == "constant":
        return constant_schedule(spec.tau, spec.c0, spec.horizon_K)
    if spec.kind == "example25":
        return example25_schedule(spec.c0, spec.horizon_K)
    if spec.kind == "custom-table":
        return custom_table_schedule(spec.table, spec.c0, spec.horizon_K)
    return convex_slack_schedule(spec.exponent, spec.c0, spec.horizon_K)


def _check_indices(k: int, kprime: int) -> None:
    if k < 0 or kprime < 0:
        raise InputError(f"indices must be nonnegative, got k={k}, kprime={kprime}")


def log_rate_product(schedule: RateSchedule, k: int, kprime: int) -> float:
    """Sum of log tau(i) for i = k .. k + kprime - 1 (may be -inf)."""
    _check_indices(k, kprime)
    if kprime == 0:
        return 0.0
    return float(np.sum(safe_log(schedule.tau_values(k, kprime))))


def rate_product_flagged(schedule: RateSchedule, k: int, kprime: int) -> Tuple[float, bool]:
    """prod_{i=k}^{k+k'-1} tau(i), clamped to the smallest positive normal on underflow."""
    return exp_clamped(log_rate_product(schedule, k, kprime))


def rate_product(schedule: RateSchedule, k: int, kprime: int) -> float:
    value, clamped = rate_product_flagged(schedule, k, kprime)
    if clamped:
        logger.warning("rate_product(k=%d, kprime=%d) underflowed; clamped to %g", k, kprime, value)
    return value


def phi_weight_flagged(schedule: RateSchedule, k: int, kprime: int) -> Tuple[float, bool]:
    """Phi(k, k') = 1 / rate_product, clamped to the largest finite float on overflow."""
    return exp_clamped(-log_rate_product(schedule, k, kprime))


def phi_weight(schedule: RateSchedule, k: int, kprime: int) -> float:
    value, clamped = phi_weight_flagged(schedule, k, kprime)
    if clamped:
        logger.warning("phi_weight(k=%d, kprime=%d) overflowed; clamped to %g", k, kprime, value)
    return value


def phi_weights(schedule: RateSchedule, k: int, horizon: int) -> np.ndarray:
    """Phi(k, k') for k' = 0 .. horizon as one array."""
    _check_indices(k, horizon)
    logs = safe_log(schedule.tau_values(k, horizon))
    cumulative = np.concatenate([[0.0], np.cumsum(logs)])
    weights, clamped = exp_clamped_array(-cumulative)
    if clamped:
        logger.warning("phi_weights(k=%d, horizon=%d) overflowed and were clamped", k, horizon)
    return weights
