"""
Statistics helpers for scaling checks and Monte Carlo confidence intervals.
"""

from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from algostab.errors import InputError


class PowerLawFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def fit_powerlaw(xs: Sequence[float], ys: Sequence[float]) -> PowerLawFit:
    """
    Least-squares fit of log(y) = slope * log(x) + intercept.

    Args:
        xs: Positive abscissae, at least three
        ys: Positive ordinates, same length

    Returns:
        PowerLawFit(slope, intercept, r2)
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("xs and ys must be one-dimensional and of equal length")
    if len(x) < 3:
        raise InputError(f"power-law fit needs at least 3 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InputError("power-law fit requires positive values")
    result = stats.linregress(np.log(x), np.log(y))
    return PowerLawFit(float(result.slope), float(result.intercept), float(result.rvalue ** 2))


def linear_fit_r2(xs: Sequence[float], ys: Sequence[float]) -> PowerLawFit:
    """Ordinary least squares y = slope * x + intercept."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or len(x) < 3:
        raise InputError("linear fit needs at least 3 paired points")
    result = stats.linregress(x, y)
    return PowerLawFit(float(result.slope), float(result.intercept), float(result.rvalue ** 2))


def ci_half_width(samples, confidence: float = 0.99, axis: int = 0) -> np.ndarray:
    """
    Half-width of the two-sided normal confidence interval of the sample mean.

    A one-sided 99% bound uses the same quantile as the two-sided 98% interval;
    callers pass the confidence they need.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[axis]
    if n < 2:
        return np.zeros(np.delete(samples.shape, axis)) if samples.ndim > 1 else np.float64(0.0)
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    return z * samples.std(axis=axis, ddof=1) / np.sqrt(n)
