"""Kernel occupation densities.

f(x) = sum_j w_j h^{-1} K((l_j - x)/h) over the levels l_j of an occupation
curve with time masses w_j, i.e. the time integral of h^{-1} K((V_s - x)/h).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, stats

from ..models.schemas import EstimatorKind, KernelSpec
from ..utils.errors import ConfigurationError, InputDataError
from .occupation import occupation_curve
from .spotvol import SpotVolSeries

logger = logging.getLogger(__name__)

# Gaussian mass beyond this many bandwidths is below 1e-20
_GAUSS_REACH = 10.0
# Bound on the (levels x points) block evaluated at once
_CHUNK = 2_000_000


def gaussian_kernel(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def quartic_kernel(z: np.ndarray) -> np.ndarray:
    """(15/16)(1 - z^2)^2 on [-1, 1]: Epanechnikov shape, continuously differentiable."""
    inside = np.abs(z) <= 1.0
    return np.where(inside, 0.9375 * (1.0 - z * z) ** 2, 0.0)


KERNELS = {"gaussian": gaussian_kernel, "epanechnikov_c1": quartic_kernel}


def kernel_reach(kernel: str) -> float:
    return _GAUSS_REACH if kernel == "gaussian" else 1.0


def default_bandwidth(delta_n: float, beta: float = 0.5) -> float:
    """h = delta_n^{1/(4(2+beta))}."""
    return delta_n ** (1.0 / (4.0 * (2.0 + beta)))


@dataclass(frozen=True, eq=False)
class OccupationDensity:
    levels: np.ndarray
    weights: np.ndarray
    bandwidth: float
    kernel: str = "gaussian"

    def __post_init__(self):
        if not self.bandwidth > 0.0:
            raise ConfigurationError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.kernel not in KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")

    @property
    def total_time(self) -> float:
        return float(self.weights.sum())

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        kern = KERNELS[self.kernel]
        h = self.bandwidth
        out = np.empty(x.size)
        step = max(1, _CHUNK // max(self.levels.size, 1))
        for start in range(0, x.size, step):
            xs = x[start : start + step]
            z = (self.levels[None, :] - xs[:, None]) / h
            out[start : start + step] = kern(z) @ self.weights / h
        return out

    def support_pieces(self, pad: Optional[float] = None) -> Sequence[Tuple[float, float]]:
        """Disjoint intervals outside which the density is negligible, split into pieces of width <= 2h."""
        h = self.bandwidth
        reach = (pad if pad is not None else kernel_reach(self.kernel)) * h
        pieces = []
        lo, hi = self.levels[0] - reach, self.levels[0] + reach
        for level in self.levels[1:]:
            if level - reach <= hi:
                hi = level + reach
            else:
                pieces.append((lo, hi))
                lo, hi = level - reach, level + reach
        pieces.append((lo, hi))
        split = []
        for a, b in pieces:
            edges = np.linspace(a, b, int(math.ceil((b - a) / (2.0 * h))) + 1)
            split.extend(zip(edges[:-1], edges[1:]))
        return split

    def mass(self) -> float:
        """Quadrature of the density over its effective support."""
        total = 0.0
        for a, b in self.support_pieces():
            value, _ = integrate.quad(lambda t: float(self(t)[0]), a, b, limit=200, epsabs=1e-12, epsrel=1e-10)
            total += value
        return total

    def default_grid(self, points: int = 200) -> np.ndarray:
        h = self.bandwidth
        return np.linspace(self.levels[0] - 4.0 * h, self.levels[-1] + 4.0 * h, points)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    density: OccupationDensity
    x: np.ndarray
    f_hat: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.x, "f_hat": self.f_hat})


def kernel_density(
    series: SpotVolSeries,
    spec: KernelSpec = KernelSpec(),
    eval_points: Optional[Sequence[float]] = None,
    which: EstimatorKind = EstimatorKind.TRUNCATED,
) -> DensityEstimate:
    """Occupation-density estimate over the block spot-variance extension."""
    h = spec.bandwidth if spec.bandwidth is not None else default_bandwidth(series.grid.delta_n, spec.beta_hint)
    curve = occupation_curve(series, which)
    density = OccupationDensity(levels=curve.levels, weights=curve.weights, bandwidth=h, kernel=spec.kernel)
    if eval_points is None:
        x = density.default_grid(spec.grid_points)
    else:
        x = np.asarray(eval_points, dtype=float)
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise InputDataError("evaluation points must be a finite one-dimensional sequence")
    logger.debug(f"Kernel density: kernel={spec.kernel} h={h:.4g} levels={curve.levels.size} points={x.size}")
    return DensityEstimate(density=density, x=x, f_hat=density(x))


def weight_function(spec: KernelSpec) -> Callable[[np.ndarray], np.ndarray]:
    if spec.weight == "unit":
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    return stats.norm(loc=spec.weight_center, scale=spec.weight_scale).pdf


def weighted_l1_distance(
    f_a: Callable,
    f_b: Callable,
    w: Callable,
    support: Tuple[float, float],
    segments: int = 50,
) -> float:
    """Adaptive quadrature of |f_a - f_b| w over `support`, in fixed segments."""
    lo, hi = float(support[0]), float(support[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ConfigurationError(f"empty or unbounded support ({lo}, {hi})")

    def integrand(t):
        return abs(float(np.atleast_1d(f_a(t))[0]) - float(np.atleast_1d(f_b(t))[0])) * float(
            np.atleast_1d(w(t))[0]
        )

    edges = np.linspace(lo, hi, segments + 1)
    return float(
        sum(integrate.quad(integrand, a, b, limit=100, epsabs=1e-12, epsrel=1e-9)[0] for a, b in zip(edges[:-1], edges[1:]))
    )


def common_support(*densities: OccupationDensity) -> Tuple[float, float]:
    lo = min(d.levels[0] - kernel_reach(d.kernel) * d.bandwidth for d in densities)
    hi = max(d.levels[-1] + kernel_reach(d.kernel) * d.bandwidth for d in densities)
    return lo, hi
