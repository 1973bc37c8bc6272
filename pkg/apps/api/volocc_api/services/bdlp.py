"""Background driving Levy process of the log-volatility OU model.

The stationary law of the OU state has Levy density u(x) = A e^{-bx} x^{-1-p}
on x > 0 and Gaussian variance s2. Its driving process, on the dL_{lambda t}
clock, has Levy density w(x) = -u(x) - x u'(x) = A e^{-bx}(p x^{-1-p} + b x^{-p})
and Gaussian variance 2 s2 per unit of its own time. Jumps of size >= eps_cut
are simulated exactly as a compound Poisson process; smaller jumps are replaced
by their mean, which the compensator removes together with the mean of the big
jumps, so every increment has mean zero.
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from scipy import special

from ..models.schemas import LevyOuLogVolSpec
from ..utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


def clock_scale(spec: LevyOuLogVolSpec) -> float:
    """Driving-process time elapsed per day."""
    return spec.lam if spec.time_scaling == "lambda_t" else 1.0


def marginal_levy_density(spec: LevyOuLogVolSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    A, b, p = spec.jump_scale, spec.jump_tempering, spec.jump_index
    return A * np.exp(-b * x) * x ** (-1.0 - p)


def bdlp_levy_density(spec: LevyOuLogVolSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    A, b, p = spec.jump_scale, spec.jump_tempering, spec.jump_index
    return A * np.exp(-b * x) * (p * x ** (-1.0 - p) + b * x ** (-p))


def big_jump_intensity(spec: LevyOuLogVolSpec) -> float:
    """Mass of w on [eps, inf), per unit driving time: eps * u(eps)."""
    A, b, p, eps = spec.jump_scale, spec.jump_tempering, spec.jump_index, spec.eps_cut
    return A * eps ** (-p) * math.exp(-b * eps)


def _upper_gamma(a: float, z: float) -> float:
    return float(special.gamma(a) * special.gammaincc(a, z))


def big_jump_mean(spec: LevyOuLogVolSpec) -> float:
    """Integral of x w(x) over [eps, inf), per unit driving time."""
    A, b, p, eps = spec.jump_scale, spec.jump_tempering, spec.jump_index, spec.eps_cut
    return A * b ** (p - 1.0) * _upper_gamma(1.0 - p, b * eps) + A * eps ** (1.0 - p) * math.exp(-b * eps)


def small_jump_mean(spec: LevyOuLogVolSpec) -> float:
    """Integral of x w(x) over (0, eps): the mean the cutoff replaces jumps by."""
    A, b, p, eps = spec.jump_scale, spec.jump_tempering, spec.jump_index, spec.eps_cut
    lower = float(special.gamma(1.0 - p) * special.gammainc(1.0 - p, b * eps))
    return A * b ** (p - 1.0) * lower - A * eps ** (1.0 - p) * math.exp(-b * eps)


def compensator_drift(spec: LevyOuLogVolSpec) -> float:
    """Drift per day removed from the big jumps so increments are centred."""
    if spec.jump_scale == 0.0:
        return 0.0
    return clock_scale(spec) * big_jump_mean(spec)


def gaussian_rate(spec: LevyOuLogVolSpec) -> float:
    """Gaussian variance of the driving process per day."""
    return 2.0 * spec.gauss_var_marginal * clock_scale(spec)


def _lambertw_exp(L: np.ndarray) -> np.ndarray:
    """W(exp(L)) without overflowing exp for large L."""
    L = np.asarray(L, dtype=float)
    out = np.empty_like(L)
    small = L < 700.0
    if np.any(small):
        out[small] = special.lambertw(np.exp(L[small])).real
    if np.any(~small):
        big = L[~small]
        w = big - np.log(big)
        for _ in range(40):
            w = big - np.log(w)
        out[~small] = w
    return out


def sample_big_jump_sizes(spec: LevyOuLogVolSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Exact draws from w restricted to [eps, inf).

    The survival function is (x/eps)^{-p} e^{-b(x-eps)}, so inverting it at an
    exponential draw E solves p log x + b x = E + p log eps + b eps, which has
    the closed form x = (p/b) W((b/p) e^{c/p}).
    """
    if count <= 0:
        return np.zeros(0)
    b, p, eps = spec.jump_tempering, spec.jump_index, spec.eps_cut
    e = rng.standard_exponential(count)
    c = e + p * math.log(eps) + b * eps
    sizes = (p / b) * _lambertw_exp(math.log(b / p) + c / p)
    return np.maximum(sizes, eps)


def sample_bdlp_increment(
    dt: float,
    spec: LevyOuLogVolSpec,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """Centred increment(s) of the driving process over dt days.

    Gaussian part + compound-Poisson big jumps - compensator * dt. Draw order
    (gaussians, counts, sizes) is fixed, so a given generator state always
    yields the same increments.
    """
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    m = 1 if size is None else int(size)
    gauss = rng.standard_normal(m) * math.sqrt(gaussian_rate(spec) * dt)
    if spec.jump_scale > 0.0:
        rate = clock_scale(spec) * big_jump_intensity(spec) * dt
        counts = rng.poisson(rate, m)
        sizes = sample_big_jump_sizes(spec, rng, int(counts.sum()))
        jumps = np.bincount(np.repeat(np.arange(m), counts), weights=sizes, minlength=m)
        increments = gauss + jumps - compensator_drift(spec) * dt
    else:
        increments = gauss
    if size is None:
        return float(increments[0])
    return increments
