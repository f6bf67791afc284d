"""
Disturbance Bounds

Evaluates the perturbed-convergence bounds as explicit series:

    deterministic:  d(z_k, x*) <= c0 P(0, k) d0 + L_V sum_j w_j L_ej |e_j|
    stochastic:     E d(z_k, x*) <= cbar0 P(0, k) d0 + (L_H sigma2 / 2) sum_j w_j L_ej^2

with w_j = prod_{i=j+1}^{k-1} tau(i), and checks them against simulated
trajectories and Monte Carlo ensembles.
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from algostab.errors import InputError
from algostab.metrics import RateSchedule, log_rate_product
from algostab.schema import BoundReport, Violation
from algostab.utils.numerics import exp_clamped, exp_clamped_array, safe_log
from algostab.utils.stats import ci_half_width

logger = logging.getLogger(__name__)

DETERMINISTIC_TOLERANCE = 1e-6
# one-sided 99% lower bound on a Monte Carlo mean
LOWER_CONFIDENCE = 0.98

SeqLike = Union[float, Sequence[float], np.ndarray]


def _sequence(values: SeqLike, k: int, name: str) -> np.ndarray:
    """First k entries of a sequence; scalars broadcast."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(k, float(arr))
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    if len(arr) < k:
        raise InputError(f"{name} has length {len(arr)} but k={k}")
    if np.any(arr[:k] < 0):
        raise InputError(f"{name} must be nonnegative")
    return arr[:k]


def _check_common(c0: float, d0: float, k: int) -> None:
    if k < 0:
        raise InputError(f"k must be nonnegative, got {k}")
    if c0 <= 0:
        raise InputError(f"c0 must be positive, got {c0}")
    if d0 < 0:
        raise InputError(f"d0 must be nonnegative, got {d0}")


def _nominal(c0: float, schedule: RateSchedule, d0: float, k: int) -> float:
    product, _ = exp_clamped(log_rate_product(schedule, 0, k))
    return c0 * product * d0 if d0 > 0 else 0.0


def _tail_weights(schedule: RateSchedule, k: int) -> np.ndarray:
    """w_j = prod_{i=j+1}^{k-1} tau(i) for j = 0 .. k-1."""
    if k == 0:
        return np.zeros(0)
    tail = schedule.tau_values(1, k - 1)
    return np.concatenate([np.cumprod(tail[::-1])[::-1], [1.0]])


def deterministic_bound(
    c0: float,
    schedule: RateSchedule,
    d0: float,
    L_V: float,
    L_e_seq: SeqLike,
    e_norm_seq: SeqLike,
    k: int,
) -> float:
    """
    Deterministic bound on d(z_k, x*).

    Args:
        c0: Schedule constant
        schedule: Rate schedule tau
        d0: d(z_0, x*)
        L_V: Lipschitz constant of V
        L_e_seq: Disturbance gains L_ej (scalar broadcasts)
        e_norm_seq: Disturbance magnitudes |e_j| (scalar broadcasts)
        k: Iteration index

    Returns:
        c0 P(0, k) d0 + L_V sum_{j<k} w_j L_ej |e_j|
    """
    _check_common(c0, d0, k)
    terms = _sequence(L_e_seq, k, "L_e_seq") * _sequence(e_norm_seq, k, "e_norm_seq")
    return _nominal(c0, schedule, d0, k) + L_V * float(np.dot(_tail_weights(schedule, k), terms))


def deterministic_bound_series(
    c0: float,
    schedule: RateSchedule,
    d0: float,
    L_V: float,
    L_e_seq: SeqLike,
    e_norm_seq: SeqLike,
    n_steps: int,
) -> np.ndarray:
    """deterministic_bound for k = 0 .. n_steps, accumulated by S_{k+1} = tau(k) S_k + L_V L_ek |e_k|."""
    _check_common(c0, d0, n_steps)
    drive = L_V * _sequence(L_e_seq, n_steps, "L_e_seq") * _sequence(e_norm_seq, n_steps, "e_norm_seq")
    return _series(c0, schedule, d0, drive, n_steps)


def _series(c0: float, schedule: RateSchedule, d0: float, drive: np.ndarray, n_steps: int) -> np.ndarray:
    taus = schedule.tau_values(0, n_steps)
    logs = np.concatenate([[0.0], np.cumsum(safe_log(taus))])
    products, clamped = exp_clamped_array(logs)
    if clamped:
        logger.debug("Rate products clamped over %d steps", n_steps)
    nominal = c0 * d0 * products if d0 > 0 else np.zeros(n_steps + 1)
    accumulated = np.zeros(n_steps + 1)
    for k in range(n_steps):
        accumulated[k + 1] = taus[k] * accumulated[k] + drive[k]
    return nominal + accumulated


def holder_bound(
    c0: float,
    schedule: RateSchedule,
    d0: float,
    L_V: float,
    L_e_seq: SeqLike,
    e_norm_seq: SeqLike,
    k: int,
    p: float,
) -> float:
    """
    Hoelder relaxation of the deterministic bound.

    Returns c0 P(0, k) d0 + L_V |(L_ej |e_j|)|_p |(w_j)|_q with 1/p + 1/q = 1;
    p = inf pairs with q = 1. Never smaller than deterministic_bound.
    """
    if not p >= 1:
        raise InputError(f"p must be >= 1, got {p}")
    _check_common(c0, d0, k)
    nominal = _nominal(c0, schedule, d0, k)
    if k == 0:
        return nominal
    q = np.inf if p == 1 else (1.0 if np.isinf(p) else p / (p - 1.0))
    terms = _sequence(L_e_seq, k, "L_e_seq") * _sequence(e_norm_seq, k, "e_norm_seq")
    weights = _tail_weights(schedule, k)
    return nominal + L_V * float(np.linalg.norm(terms, ord=p)) * float(np.linalg.norm(weights, ord=q))


def stochastic_bound(
    cbar0: float,
    schedule: RateSchedule,
    d0: float,
    L_H: float,
    sigma2: float,
    L_e_seq: SeqLike,
    k: int,
) -> float:
    """Bound on E d(z_k, x*) under zero-mean noise with E|n|^2 = sigma2; the gains enter squared."""
    _check_common(cbar0, d0, k)
    if sigma2 < 0 or L_H < 0:
        raise InputError("sigma2 and L_H must be nonnegative")
    gains = _sequence(L_e_seq, k, "L_e_seq")
    noise = 0.5 * L_H * sigma2 * float(np.dot(_tail_weights(schedule, k), gains * gains))
    return _nominal(cbar0, schedule, d0, k) + noise


def stochastic_bound_series(
    cbar0: float,
    schedule: RateSchedule,
    d0: float,
    L_H: float,
    sigma2: float,
    L_e_seq: SeqLike,
    n_steps: int,
) -> np.ndarray:
    """stochastic_bound for k = 0 .. n_steps."""
    _check_common(cbar0, d0, n_steps)
    if sigma2 < 0 or L_H < 0:
        raise InputError("sigma2 and L_H must be nonnegative")
    gains = _sequence(L_e_seq, n_steps, "L_e_seq")
    return _series(cbar0, schedule, d0, 0.5 * L_H * sigma2 * gains * gains, n_steps)


def _check_rate(tau: float) -> None:
    if not 0 <= tau < 1:
        raise InputError(f"steady state needs 0 <= tau < 1, got {tau}")


def steady_state_bound(L_V: float, L_e: float, Delta: float, tau: float) -> float:
    """L_V L_e Delta / (1 - tau), the limit of the deterministic bound under |e| <= Delta."""
    _check_rate(tau)
    if Delta < 0:
        raise InputError(f"Delta must be nonnegative, got {Delta}")
    return L_V * L_e * Delta / (1.0 - tau)


def stochastic_steady_state_bound(L_H: float, L_e: float, sigma2: float, tau: float) -> float:
    """L_H L_e^2 sigma2 / (2 (1 - tau)), the noise floor of the stochastic bound."""
    _check_rate(tau)
    return 0.5 * L_H * L_e * L_e * sigma2 / (1.0 - tau)


def verify_trajectory_bound(
    empirical,
    bound_series,
    stochastic: bool = False,
    tolerance: float = DETERMINISTIC_TOLERANCE,
    constants_used: Optional[Dict[str, Any]] = None,
    constants_source: str = "analytic",
) -> BoundReport:
    """
    Compare an empirical series with a theoretical bound series.

    Args:
        empirical: d(z_k, x*) of one trajectory (1-D) or of an ensemble
            (2-D, members x steps)
        bound_series: Bound at each k, same number of steps
        stochastic: Compare the lower one-sided 99% confidence bound of the
            ensemble mean instead of the worst member
        tolerance: Relative slack for deterministic checks
        constants_used: Recorded in the report
        constants_source: "analytic" or "empirical"

    Returns:
        BoundReport with one violation per offending k
    """
    bound = np.asarray(bound_series, dtype=float)
    emp = np.atleast_2d(np.asarray(empirical, dtype=float))
    if emp.shape[1] != len(bound):
        raise InputError(f"empirical series has {emp.shape[1]} steps but the bound has {len(bound)}")
    if stochastic:
        shown = emp.mean(axis=0)
        tested = shown - ci_half_width(emp, LOWER_CONFIDENCE, axis=0)
        limit = bound
        check = "stochastic_bound"
    else:
        shown = emp.max(axis=0)
        tested = shown
        limit = bound * (1.0 + tolerance)
        check = "deterministic_bound"
    violations = [
        Violation(check=check, k=int(k), excess=float(tested[k] - bound[k]))
        for k in np.nonzero(tested > limit)[0]
    ]
    if violations:
        logger.warning("%d %s violations (first at k=%d)", len(violations), check, violations[0].k)
    if constants_source == "empirical":
        logger.warning("Bound evaluated with empirical (inflated) constants")
    return BoundReport(
        bound_series=bound.tolist(),
        empirical_series=np.asarray(shown, dtype=float).tolist(),
        violations=violations,
        constants_used=dict(constants_used or {}),
        constants_source=constants_source,
    )


def merge_reports(reports: List[BoundReport]) -> BoundReport:
    """
    Deterministic reduction of reports over the same bound series.

    The empirical series is the elementwise max; violations keep the largest
    excess per k, ordered by k.
    """
    if not reports:
        raise InputError("nothing to merge")
    first = reports[0]
    if any(len(r.bound_series) != len(first.bound_series) for r in reports):
        raise InputError("reports cover different horizons")
    empirical = np.max(np.array([r.empirical_series for r in reports], dtype=float), axis=0)
    worst: Dict[int, Violation] = {}
    for report in reports:
        for v in report.violations:
            if v.k not in worst or v.excess > worst[v.k].excess:
                worst[v.k] = v
    source = "empirical" if any(r.constants_source == "empirical" for r in reports) else "analytic"
    return BoundReport(
        bound_series=list(first.bound_series),
        empirical_series=empirical.tolist(),
        violations=[worst[k] for k in sorted(worst)],
        constants_used=dict(first.constants_used),
        constants_source=source,
    )
