"""
Seeded sampling of boxes and secant-slope estimation.

Points come from a scrambled Sobol sequence, so a larger sample with the same
seed always extends a smaller one. Every stochastic stream is keyed by
(seed, stream, index) through numpy's SeedSequence, which makes draws
independent of call order.
"""

import logging
import warnings
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.stats import qmc

from algostab.errors import InputError
from algostab.schema import Region

logger = logging.getLogger(__name__)

FD_SCALE = 1e-4


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for (seed, *keys)."""
    return np.random.default_rng([int(seed), *(int(k) for k in keys)])


def sobol_unit(dim: int, n: int, seed: int) -> np.ndarray:
    """First `n` points of the scrambled Sobol sequence in [0, 1)^dim."""
    if n < 1:
        raise InputError(f"need at least one sample, got {n}")
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # Sobol balance is only exact at powers of two; prefixes are still nested.
        warnings.simplefilter("ignore", UserWarning)
        return sampler.random(n)


def scale_to_region(unit: np.ndarray, region: Region) -> np.ndarray:
    lo, hi = region.as_arrays()
    return lo + unit * (hi - lo)


def sample_region(region: Region, n: int, seed: int) -> np.ndarray:
    """`n` quasi-random points of the box, shape (n, dim)."""
    return scale_to_region(sobol_unit(region.dim, n, seed), region)


def sample_pairs(region: Region, n_pairs: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nested quasi-random pairs (a_i, b_i) of the box.

    Degenerate pairs are redrawn from a per-index stream so that pair i does not
    depend on n_pairs.
    """
    if region.diameter == 0.0:
        raise InputError("cannot sample distinct pairs from a degenerate region")
    unit = sobol_unit(2 * region.dim, n_pairs, seed)
    a = scale_to_region(unit[:, : region.dim], region)
    b = scale_to_region(unit[:, region.dim :], region)
    floor = 1e-12 * region.diameter
    lo, hi = region.as_arrays()
    for i in np.flatnonzero(np.linalg.norm(a - b, axis=1) <= floor):
        rng = rng_stream(seed, 7, int(i))
        while np.linalg.norm(a[i] - b[i]) <= floor:
            b[i] = rng.uniform(lo, hi)
        logger.debug("Resampled degenerate pair %d", i)
    return a, b


def max_slope(
    evaluate: Callable[[int, np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
    fd_step: Optional[float] = None,
    norm_in=2,
    norm_out=2,
) -> float:
    """
    Largest sampled slope |F(a_i) - F(b_i)| / |a_i - b_i|.

    Args:
        evaluate: evaluate(i, x) gives F for pair i (pairs may bind their own index k)
        a: First points, shape (n, dim)
        b: Second points, shape (n, dim)
        fd_step: If given, also probe the finite-difference slope from a_i
            along (b_i - a_i) with this step length
        norm_in: Norm on inputs
        norm_out: Norm on outputs

    Returns:
        The maximum slope, a lower estimate of the Lipschitz constant
    """
    best = 0.0
    for i in range(len(a)):
        gap = float(np.linalg.norm(a[i] - b[i], ord=norm_in))
        if gap == 0.0:
            continue
        fa = np.atleast_1d(evaluate(i, a[i]))
        fb = np.atleast_1d(evaluate(i, b[i]))
        best = max(best, float(np.linalg.norm(fa - fb, ord=norm_out)) / gap)
        if fd_step:
            probe = a[i] + fd_step * (b[i] - a[i]) / gap
            step = float(np.linalg.norm(probe - a[i], ord=norm_in))
            if step > 0.0:
                fp = np.atleast_1d(evaluate(i, probe))
                best = max(best, float(np.linalg.norm(fp - fa, ord=norm_out)) / step)
    return best


def gaussian_draws(sigma2: float, shape: Tuple[int, ...], seed: int, *keys: int) -> np.ndarray:
    """
    Isotropic Gaussian vectors with E|n|^2 = sigma2.

    The last axis of `shape` is the vector dimension; each coordinate has
    variance sigma2 / dim.
    """
    if sigma2 < 0:
        raise InputError(f"sigma2 must be nonnegative, got {sigma2}")
    if sigma2 == 0:
        return np.zeros(shape)
    scale = np.sqrt(sigma2 / shape[-1])
    return scale * rng_stream(seed, *keys).standard_normal(shape)
