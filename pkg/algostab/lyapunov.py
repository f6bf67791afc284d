"""
Converse Lyapunov Functions

Executable constructions of the sup form

    V(k, xi) = max_{0 <= k' <= K} d(phi(k', k, xi), x*) Phi(k, k')

and the sum form

    V~(k, xi) = sum_{k'=0}^{M} Phi(k, k') d(phi(k', k, xi), x*),

their certified constants L_V and L_H, and sampled verification of the
sandwich and decrease inequalities they satisfy.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Tuple, Union

import numpy as np

from algostab.dynamics import DynamicalSystem, distance_to_equilibrium, flow_path, simulate_ensemble, step_nominal
from algostab.errors import ContractViolationError, HorizonNotFoundError, InputError
from algostab.metrics import PseudometricSpec, RateSchedule, phi_weights
from algostab.schema import (
    DecreaseReport,
    Region,
    SandwichReport,
    StochasticDecreaseReport,
    StochasticRecursionReport,
)
from algostab.utils.numerics import HUGE, TINY, exp_clamped, exp_clamped_array, safe_log
from algostab.utils.sampling import FD_SCALE, gaussian_draws, max_slope, sample_pairs, sample_region
from algostab.utils.stats import ci_half_width

logger = logging.getLogger(__name__)

RATIO_TOLERANCE = 1e-9
CALIBRATION_MARGIN = 1.05
# below this the metric is rounding noise
RESOLVED_DISTANCE = 1e-5
# one-sided 99% bound
STOCHASTIC_CONFIDENCE = 0.98


@dataclass(frozen=True)
class LyapunovEstimate:
    """
    A converse Lyapunov function bound to its system, metric and schedule.

    Attributes:
        form: "sup" or "sum"
        horizon: K for the sup form, M for the sum form
        system: The nominal dynamics
        metric: Pseudometric d
        schedule: Rate schedule tau with constants c0 and K
        L_V: Lipschitz certificate, if computed
        L_H: Hessian-bound certificate (sum form only), if computed
    """

    form: str
    horizon: int
    system: DynamicalSystem
    metric: PseudometricSpec
    schedule: RateSchedule
    L_V: Optional[float] = None
    L_H: Optional[float] = None

    def __post_init__(self):
        if self.form not in ("sup", "sum"):
            raise InputError(f"form must be 'sup' or 'sum', got '{self.form}'")
        if self.horizon < 0:
            raise InputError(f"horizon must be nonnegative, got {self.horizon}")
        if self.form == "sum" and self.horizon < self.schedule.horizon_K:
            raise InputError(f"sum form needs M >= K; got M={self.horizon}, K={self.schedule.horizon_K}")
        if self.L_V is not None and not self.L_V > 0:
            raise InputError(f"L_V must be positive, got {self.L_V}")
        if self.L_H is not None and self.L_H < 0:
            raise InputError(f"L_H must be nonnegative, got {self.L_H}")

    @property
    def c_upper(self) -> float:
        """Certified sandwich constant: c0 for the sup form, (M + 1) c0 for the sum form."""
        if self.form == "sup":
            return self.schedule.c0
        return (self.horizon + 1) * self.schedule.c0


def sup_lyapunov(
    system: DynamicalSystem,
    metric: PseudometricSpec,
    schedule: RateSchedule,
    horizon: Optional[int] = None,
    L_V: Optional[float] = None,
) -> LyapunovEstimate:
    """Sup-form estimate; the horizon defaults to the schedule's K."""
    return LyapunovEstimate("sup", schedule.horizon_K if horizon is None else horizon, system, metric, schedule, L_V)


def sum_lyapunov(
    system: DynamicalSystem,
    metric: PseudometricSpec,
    schedule: RateSchedule,
    M: Optional[int] = None,
    L_V: Optional[float] = None,
    L_H: Optional[float] = None,
) -> LyapunovEstimate:
    """Sum-form estimate; M defaults to the schedule's K."""
    return LyapunovEstimate("sum", schedule.horizon_K if M is None else M, system, metric, schedule, L_V, L_H)


def _terms(L: LyapunovEstimate, k: int, xi, horizon: int) -> np.ndarray:
    """Phi(k, k') d(phi(k', k, xi), x*) for k' = 0 .. horizon along axis 0."""
    if k < 0:
        raise InputError(f"iteration index must be nonnegative, got {k}")
    path = flow_path(L.system, horizon, k, xi)
    dists = distance_to_equilibrium(L.system, path, L.metric)
    weights = phi_weights(L.schedule, k, horizon).reshape((-1,) + (1,) * (dists.ndim - 1))
    with np.errstate(over="ignore", invalid="ignore"):
        terms = dists * weights
    # a zero distance stays zero even against a clamped weight
    return np.where(dists == 0.0, 0.0, np.minimum(terms, HUGE))


def _scalar_or_array(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def eval_sup_lyapunov(L: LyapunovEstimate, k: int, xi):
    """
    V(k, xi) as a finite max over k' in [0, K].

    xi may be a single state or a stack of states (leading axes); the result
    is a float or an array over the leading axes.
    """
    if L.form != "sup":
        raise InputError("eval_sup_lyapunov needs a sup-form estimate")
    return _scalar_or_array(_terms(L, k, xi, L.horizon).max(axis=0))


def eval_sum_lyapunov(L: LyapunovEstimate, k: int, xi):
    """V~(k, xi) as the finite sum over k' in [0, M]."""
    if L.form != "sum":
        raise InputError("eval_sum_lyapunov needs a sum-form estimate")
    return _scalar_or_array(_terms(L, k, xi, L.horizon).sum(axis=0))


def eval_lyapunov(L: LyapunovEstimate, k: int, xi):
    """Evaluate whichever form L carries."""
    return eval_sup_lyapunov(L, k, xi) if L.form == "sup" else eval_sum_lyapunov(L, k, xi)


def sup_lyapunov_argmax(L: LyapunovEstimate, k: int, xi, horizon: Optional[int] = None):
    """Index k' attaining the sup-form max over an (optionally extended) horizon; first index on ties."""
    horizon = L.horizon if horizon is None else horizon
    terms = _terms(L, k, xi, horizon)
    top = terms.max(axis=0)
    # ties within relative rounding count as attained at the earliest index
    attained = terms >= top * (1.0 - RATIO_TOLERANCE)
    idx = np.argmax(attained, axis=0)
    return int(idx) if np.ndim(idx) == 0 else idx


# ---------------------------------------------------------------------------
# Horizon and c0
# ---------------------------------------------------------------------------


def _ratio_table(
    sys: DynamicalSystem,
    metric: PseudometricSpec,
    schedule: RateSchedule,
    sample_set,
    horizon: int,
) -> np.ndarray:
    """
    d(phi(j, 0, xi), x*) / (P(0, j) d(xi, x*)) for j = 0 .. horizon.

    Rows are samples; samples at x* give all-zero rows. States within
    RESOLVED_DISTANCE of x* (relative to max(1, |x*|)) also give zero.
    """
    samples = np.atleast_2d(np.asarray(sample_set, dtype=float))
    if samples.shape[0] == 0:
        raise InputError("sample_set must be nonempty")
    path = flow_path(sys, horizon, 0, samples)
    dists = distance_to_equilibrium(sys, path, metric).T
    logs = np.concatenate([[0.0], np.cumsum(safe_log(schedule.tau_values(0, horizon)))])
    products, _ = exp_clamped_array(logs)
    d0 = dists[:, :1]
    denom = products[None, :] * d0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(d0 > 0, dists / np.maximum(denom, TINY), 0.0)
    x_star = np.asarray(sys.equilibrium, dtype=float)
    floor = RESOLVED_DISTANCE * max(1.0, float(np.linalg.norm(x_star)))
    resolved = np.linalg.norm(path - x_star, axis=-1).T > floor
    return np.where(resolved, ratios, 0.0)


def detect_horizon_K(
    sys: DynamicalSystem,
    metric: PseudometricSpec,
    schedule: RateSchedule,
    sample_set,
    K_max: int,
) -> int:
    """
    Smallest K <= K_max with d(phi(k', 0, xi), x*) <= P(0, k') d(xi, x*) (1 + 1e-9)
    for every sampled xi and every k' in [K, K_max].

    Raises:
        HorizonNotFoundError: The inequality still fails at k' = K_max
    """
    if K_max < 1:
        raise InputError(f"K_max must be >= 1, got {K_max}")
    ratios = _ratio_table(sys, metric, schedule, sample_set, K_max)
    bad = ratios > 1.0 + RATIO_TOLERANCE
    bad[:, 0] = False
    if np.any(bad[:, -1]):
        worst = float(ratios[:, -1].max())
        raise HorizonNotFoundError(
            f"no horizon K <= {K_max} for {sys.name}: ratio {worst:.6g} at k'={K_max}",
            worst_ratio=worst,
            K_max=K_max,
        )
    if not bad.any():
        return 1
    last_bad = int(np.max(np.nonzero(bad.any(axis=0))[0]))
    K = max(1, last_bad + 1)
    logger.debug("Detected K=%d for %s (K_max=%d)", K, sys.name, K_max)
    return K


def calibrate_c0(
    sys: DynamicalSystem,
    metric: PseudometricSpec,
    schedule: RateSchedule,
    sample_set,
    horizon: int,
    margin: float = CALIBRATION_MARGIN,
) -> float:
    """
    Trajectory-ratio calibration of c0 over k' in [0, horizon] starting at k = 0.

    Returns 1 when no ratio exceeds 1 (up to rounding), otherwise the largest
    observed ratio times `margin`.
    """
    ratios = _ratio_table(sys, metric, schedule, sample_set, horizon)
    worst = float(ratios.max()) if ratios.size else 0.0
    if worst <= 1.0 + RATIO_TOLERANCE:
        return 1.0
    c0 = worst * margin
    logger.info("Calibrated c0=%.6g for %s (largest ratio %.6g)", c0, sys.name, worst)
    return c0


class LinearCertificate(NamedTuple):
    c0: float
    K: int
    L_V: float


def linear_certificate(J, tau: float, K_max: int = 200, norm_ord=2) -> LinearCertificate:
    """
    Exact schedule constants for a linear time-invariant error map e' = J e.

    With r_j = |J^j| / tau^j: c0 = max_{j <= K_max} r_j, K is the first index
    after which every r_j <= 1, and L_V = max_{j <= K} r_j is the Lipschitz
    constant of the sup-form V under the plain norm.
    """
    if not 0 < tau <= 1:
        raise InputError(f"tau must lie in (0, 1], got {tau}")
    if K_max < 1:
        raise InputError(f"K_max must be >= 1, got {K_max}")
    J = np.atleast_2d(np.asarray(J, dtype=float))
    power = np.eye(J.shape[0])
    ratios = np.empty(K_max + 1)
    log_tau = np.log(tau)
    for j in range(K_max + 1):
        norm = float(np.linalg.norm(power, norm_ord))
        ratios[j] = 0.0 if norm == 0.0 else exp_clamped(np.log(norm) - j * log_tau)[0]
        power = power @ J
    above = np.nonzero(ratios > 1.0 + RATIO_TOLERANCE)[0]
    if len(above) and above[-1] == K_max:
        raise HorizonNotFoundError(
            f"|J^j| / tau^j still exceeds 1 at j={K_max}", worst_ratio=float(ratios[-1]), K_max=K_max
        )
    K = 1 if len(above) == 0 else max(1, int(above[-1]) + 1)
    return LinearCertificate(c0=max(1.0, float(ratios.max())), K=K, L_V=max(1.0, float(ratios[: K + 1].max())))


# ---------------------------------------------------------------------------
# Certified constants
# ---------------------------------------------------------------------------


def lipschitz_LV_analytic_flagged(L_d: float, L_f: float, K: int, tau0: float) -> Tuple[float, bool]:
    """L_d max(1, (L_f / tau0)^K) with an overflow flag."""
    if not L_d > 0:
        raise InputError(f"L_d must be positive, got {L_d}")
    if L_f < 0:
        raise InputError(f"L_f must be nonnegative, got {L_f}")
    if K < 0:
        raise InputError(f"K must be nonnegative, got {K}")
    if not 0 < tau0 <= 1:
        raise InputError(f"tau0 must lie in (0, 1], got {tau0}")
    if K == 0 or L_f == 0:
        return float(L_d), False
    growth = K * (np.log(L_f) - np.log(tau0))
    if growth <= 0:
        return float(L_d), False
    return exp_clamped(np.log(L_d) + growth)


def lipschitz_LV_analytic(L_d: float, L_f: float, K: int, tau0: float) -> float:
    """
    Lipschitz certificate of the sup-form V.

    Equals L_d L_f^K tau0^-K whenever L_f >= tau0; below that the k' = 0 term
    keeps the slope at L_d.
    """
    value, overflow = lipschitz_LV_analytic_flagged(L_d, L_f, K, tau0)
    if overflow:
        logger.warning("L_V overflowed (L_f=%g, K=%d, tau0=%g); clamped to %g", L_f, K, tau0, value)
    return value


def _k_list(k_range: Union[int, Iterable[int]]) -> np.ndarray:
    ks = np.arange(k_range) if isinstance(k_range, (int, np.integer)) else np.asarray(list(k_range), dtype=int)
    if ks.size == 0 or np.any(ks < 0):
        raise InputError("k_range must contain nonnegative indices")
    return ks


def lipschitz_LV_empirical(
    L: LyapunovEstimate,
    region: Region,
    n_pairs: int,
    k_range: Union[int, Iterable[int]],
    seed: int,
) -> float:
    """Largest sampled secant slope of V(k, .) over nested quasi-random pairs of the box."""
    ks = _k_list(k_range)
    a, b = sample_pairs(region, n_pairs, seed)
    return max_slope(
        lambda i, x: eval_lyapunov(L, int(ks[i % len(ks)]), x),
        a,
        b,
        fd_step=FD_SCALE * region.diameter,
        norm_in=L.metric.norm_ord,
        norm_out=2,
    )


def hessian_bound_LH_flagged(
    M: int, tau0: float, L_f: float, L_d: float, L_Hd: float, L_Hphi: float
) -> Tuple[float, bool]:
    """M tau0^-M (L_Hd L_f^2M + L_d L_Hphi L_f^M (L_f + M)) with an overflow flag."""
    if M < 0:
        raise InputError(f"M must be nonnegative, got {M}")
    if min(L_f, L_d, L_Hd, L_Hphi) < 0:
        raise InputError("Lipschitz and Hessian constants must be nonnegative")
    if M == 0:
        return 0.0, False
    if not 0 < tau0 <= 1:
        raise InputError(f"tau0 must lie in (0, 1], got {tau0}")
    with np.errstate(over="ignore", invalid="ignore"):
        lf = np.float64(L_f)
        value = M * np.float64(tau0) ** (-M) * (L_Hd * lf ** (2 * M) + L_d * L_Hphi * lf ** M * (lf + M))
    if not np.isfinite(value):
        return HUGE, True
    return float(value), False


def hessian_bound_LH(M: int, tau0: float, L_f: float, L_d: float, L_Hd: float, L_Hphi: float) -> float:
    """
    Hessian constant of the sum-form V~.

    Args:
        M: Sum horizon
        tau0: tau(0)
        L_f: Lipschitz constant of f_k
        L_d: Norm bound of the metric
        L_Hd: Hessian bound of d(., x*)
        L_Hphi: Bound on second derivatives of the flow
    """
    value, overflow = hessian_bound_LH_flagged(M, tau0, L_f, L_d, L_Hd, L_Hphi)
    if overflow:
        logger.warning("L_H overflowed (M=%d, tau0=%g, L_f=%g); clamped", M, tau0, L_f)
    return value


def certified_hessian_bound(M: int, tau0: float, L_f: float, L_d: float, L_Hd: float, L_Hphi: float) -> float:
    """
    Hessian bound dominating all M + 1 terms of V~.

    Evaluates hessian_bound_LH with M + 1 and max(L_f, 1), which covers the
    k' = 0 term and maps with L_f < 1.
    """
    return hessian_bound_LH(M + 1, tau0, max(L_f, 1.0), L_d, L_Hd, L_Hphi)


# ---------------------------------------------------------------------------
# Sampled verification
# ---------------------------------------------------------------------------


def _samples(sample_set) -> np.ndarray:
    samples = np.atleast_2d(np.asarray(sample_set, dtype=float))
    if samples.shape[0] == 0:
        raise InputError("sample_set must be nonempty")
    return samples


def verify_sandwich(
    L: LyapunovEstimate,
    sample_set,
    k_range: Union[int, Iterable[int]] = (0,),
    tolerance: float = RATIO_TOLERANCE,
) -> SandwichReport:
    """
    Check d(xi, x*) <= V(k, xi) <= c d(xi, x*) on the samples.

    Violations are relative to d (lower) and c d (upper). For the sup form the
    report also carries the largest argmax index seen with the horizon
    extended to 4K.
    """
    samples = _samples(sample_set)
    c = L.c_upper
    lower = upper = 0.0
    witness_k, witness_xi, worst = None, None, 0.0
    argmax_index = None
    for k in _k_list(k_range):
        k = int(k)
        values = np.atleast_1d(eval_lyapunov(L, k, samples))
        d = np.atleast_1d(distance_to_equilibrium(L.system, samples, L.metric))
        low = (d - values) / np.maximum(d, TINY)
        high = (values - c * d) / np.maximum(c * d, TINY)
        lower = max(lower, float(low.max()))
        upper = max(upper, float(high.max()))
        combined = np.maximum(low, high)
        i = int(np.argmax(combined))
        if combined[i] > worst:
            worst, witness_k, witness_xi = float(combined[i]), k, samples[i].tolist()
        if L.form == "sup":
            idx = np.atleast_1d(sup_lyapunov_argmax(L, k, samples, horizon=4 * max(L.horizon, 1)))
            argmax_index = max(argmax_index or 0, int(idx.max()))
    report = SandwichReport(
        lower_max_violation=lower,
        upper_max_violation=upper,
        c_upper=c,
        n_samples=len(samples),
        max_argmax_index=argmax_index,
        witness_k=witness_k,
        witness_xi=witness_xi,
        tolerance=tolerance,
    )
    if not report.passed:
        logger.warning("Sandwich violated for %s: %.3g at k=%s", L.system.name, report.max_violation, witness_k)
    return report


def _decrease(
    L: LyapunovEstimate,
    samples: np.ndarray,
    k_range,
    next_state,
    extra_rhs,
    tolerance: float,
) -> DecreaseReport:
    raw_worst = rel_worst = -np.inf
    witness_k = witness_xi = None
    for k in _k_list(k_range):
        k = int(k)
        current = np.atleast_1d(eval_lyapunov(L, k, samples))
        following = np.atleast_1d(eval_lyapunov(L, k + 1, next_state(k, samples)))
        raw = following - L.schedule.tau(k) * current - extra_rhs(k)
        rel = raw / (1.0 + current)
        i = int(np.argmax(rel))
        raw_worst = max(raw_worst, float(raw.max()))
        if rel[i] > rel_worst:
            rel_worst, witness_k, witness_xi = float(rel[i]), k, samples[i].tolist()
    return DecreaseReport(
        max_violation=raw_worst,
        max_relative_violation=rel_worst,
        n_samples=len(samples),
        witness_k=witness_k,
        witness_xi=witness_xi,
        tolerance=tolerance,
    )


def verify_decrease(
    L: LyapunovEstimate,
    sample_set,
    k_range: Union[int, Iterable[int]] = (0,),
    tolerance: float = RATIO_TOLERANCE,
) -> DecreaseReport:
    """
    Check V(k+1, f_k(xi)) <= tau(k) V(k, xi) on the samples.

    Failures are reported (with the witnessing k and xi), never raised.
    """
    samples = _samples(sample_set)
    report = _decrease(L, samples, k_range, lambda k, x: step_nominal(L.system, k, x), lambda k: 0.0, tolerance)
    if not report.passed:
        logger.warning("Decrease violated for %s: %.3g at k=%s", L.system.name, report.max_violation, report.witness_k)
    return report


def verify_perturbed_decrease(
    L: LyapunovEstimate,
    sample_set,
    region_e: Region,
    k_range: Union[int, Iterable[int]] = (0,),
    seed: int = 0,
    tolerance: float = RATIO_TOLERANCE,
) -> DecreaseReport:
    """Check V(k+1, g_k(xi, e)) <= tau(k) V(k, xi) + L_V L_ek |e| with one sampled e per xi."""
    if L.L_V is None:
        raise ContractViolationError("perturbed decrease needs an L_V certificate")
    samples = _samples(sample_set)
    region_e.require_origin()
    disturbances = sample_region(region_e, len(samples), seed)
    sizes = np.linalg.norm(disturbances, ord=L.system.norm_ord, axis=1)
    report = _decrease(
        L,
        samples,
        k_range,
        lambda k, x: np.asarray(L.system.disturbed(k, x, disturbances), dtype=float),
        lambda k: L.L_V * L.system.gain(k) * sizes,
        tolerance,
    )
    if not report.passed:
        logger.warning("Perturbed decrease violated for %s: %.3g", L.system.name, report.max_violation)
    return report


def _noise_term(L: LyapunovEstimate, sigma2: float, L_ek: float) -> float:
    return 0.5 * L.L_H * L_ek * L_ek * sigma2


def _require_stochastic(L: LyapunovEstimate) -> None:
    if L.form != "sum":
        raise InputError("stochastic decrease is stated for the sum-form V~")
    if L.system.affine_channel is None:
        raise ContractViolationError(f"{L.system.name} has no affine disturbance channel g = f + A e")
    if L.L_H is None:
        raise ContractViolationError("stochastic decrease needs an L_H certificate")


def verify_stochastic_decrease(
    L: LyapunovEstimate,
    sigma2: float,
    L_ek: Optional[float] = None,
    n_mc: int = 10_000,
    seed: int = 0,
    sample_set=None,
    k_range: Union[int, Iterable[int]] = (0,),
    tolerance: float = RATIO_TOLERANCE,
) -> StochasticDecreaseReport:
    """
    Monte Carlo check of E V~(k+1, g_k(z, n)) <= tau(k) V~(k, z) + L_H L_ek^2 sigma2 / 2.

    Noise is isotropic Gaussian with E|n|^2 = sigma2. The check passes when the
    lower one-sided 99% confidence bound of the mean stays below the
    right-hand side; the report describes the (k, z) with the least slack.

    Args:
        L: Sum-form estimate with L_H
        sigma2: Noise power
        L_ek: Gain used on the right-hand side; the system's gain when absent
        n_mc: Draws per point
        seed: Master seed
        sample_set: Points z (defaults to the origin-offset unit point)
        k_range: Iteration indices

    Raises:
        ContractViolationError: The disturbance does not enter affinely
    """
    _require_stochastic(L)
    if n_mc < 2:
        raise InputError(f"n_mc must be >= 2, got {n_mc}")
    sys = L.system
    samples = _samples(sys.equilibrium + 1.0 if sample_set is None else sample_set)
    worst: Optional[StochasticDecreaseReport] = None
    for k in _k_list(k_range):
        k = int(k)
        gain = sys.gain(k) if L_ek is None else L_ek
        for i, z in enumerate(samples):
            noise = gaussian_draws(sigma2, (n_mc, sys.dim_disturbance), seed, k, i)
            following = np.atleast_1d(eval_sum_lyapunov(L, k + 1, sys.disturbed(k, np.repeat(z[None, :], n_mc, axis=0), noise)))
            mean = float(following.mean())
            half = float(ci_half_width(following, STOCHASTIC_CONFIDENCE))
            rhs = L.schedule.tau(k) * float(eval_sum_lyapunov(L, k, z)) + _noise_term(L, sigma2, gain)
            report = StochasticDecreaseReport(
                k=k,
                lhs_mean=mean,
                half_width=half,
                rhs=rhs,
                slack=rhs - (mean - half),
                n_mc=n_mc,
                n_points=len(samples),
                tolerance=tolerance,
            )
            if worst is None or report.slack < worst.slack:
                worst = report
    if not worst.passed:
        logger.warning("Stochastic decrease violated at k=%d (slack %.3g)", worst.k, worst.slack)
    return worst


def verify_stochastic_recursion(
    L: LyapunovEstimate,
    sigma2: float,
    z0,
    n_steps: int,
    n_mc: int = 10_000,
    seed: int = 0,
    L_ek: Optional[float] = None,
    tolerance: float = RATIO_TOLERANCE,
) -> StochasticRecursionReport:
    """
    The expected decrease checked step by step along a noisy ensemble.

    For each k, the paired differences V~(k+1, z_{k+1}) - tau(k) V~(k, z_k)
    over n_mc paths must have a lower 99% confidence bound below the noise
    term L_H L_ek^2 sigma2 / 2.
    """
    _require_stochastic(L)
    sys = L.system
    noise = gaussian_draws(sigma2, (n_steps, n_mc, sys.dim_disturbance), seed, 0)
    states = simulate_ensemble(sys, z0, noise)
    values = np.stack([np.atleast_1d(eval_sum_lyapunov(L, k, states[k])) for k in range(n_steps + 1)])
    steps = []
    for k in range(n_steps):
        tau = L.schedule.tau(k)
        diff = values[k + 1] - tau * values[k]
        half = float(ci_half_width(diff, STOCHASTIC_CONFIDENCE))
        term = _noise_term(L, sigma2, sys.gain(k) if L_ek is None else L_ek)
        steps.append(
            StochasticDecreaseReport(
                k=k,
                lhs_mean=float(values[k + 1].mean()),
                half_width=half,
                rhs=tau * float(values[k].mean()) + term,
                slack=term - (float(diff.mean()) - half),
                n_mc=n_mc,
                n_points=1,
                tolerance=tolerance,
            )
        )
    report = StochasticRecursionReport(steps=steps)
    logger.info("Stochastic recursion over %d steps: %s", n_steps, "passed" if report.passed else "violated")
    return report
