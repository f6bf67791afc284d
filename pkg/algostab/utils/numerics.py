"""
Log-space helpers for long rate products.

Products of contraction factors underflow long before the horizons the bounds
use, so they are summed as logarithms and exponentiated with explicit clamping.
"""

import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

TINY = float(np.finfo(float).tiny)
HUGE = float(np.finfo(float).max)
LOG_TINY = float(np.log(TINY))
LOG_HUGE = float(np.log(HUGE))


def safe_log(values) -> np.ndarray:
    """Elementwise log with log(0) = -inf and no runtime warnings."""
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(values, dtype=float))


def exp_clamped(log_value: float) -> Tuple[float, bool]:
    """
    Exponentiate a log-value into the normal float range.

    Returns:
        (value, clamped) where clamped is True if the result was raised to the
        smallest positive normal or lowered to the largest finite float
    """
    if log_value < LOG_TINY:
        return TINY, True
    if log_value > LOG_HUGE:
        return HUGE, True
    return float(np.exp(log_value)), False


def exp_clamped_array(log_values) -> Tuple[np.ndarray, bool]:
    """Vectorized exp_clamped; the flag reports whether any entry was clamped."""
    log_values = np.asarray(log_values, dtype=float)
    clamped = bool(np.any(log_values < LOG_TINY) or np.any(log_values > LOG_HUGE))
    with np.errstate(over="ignore", under="ignore"):
        out = np.exp(np.clip(log_values, LOG_TINY, LOG_HUGE))
    return out, clamped


def vector_norm(x, ord=2, axis: int = -1) -> np.ndarray:
    """Norm over the last axis (Euclidean by default, np.inf for the max-norm)."""
    return np.linalg.norm(np.asarray(x, dtype=float), ord=ord, axis=axis)
