import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import pandas as pd

from ..models.schemas import EstimatorKind
from ..utils.errors import ConfigurationError
from .spotvol import SpotVolSeries

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Cumulative masses are sums of block lengths; compare against alpha with this relative slack.
_MASS_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class OccupationCurve:
    """Right-continuous step function x -> time spent at or below x.

    Levels are distinct and ascending; ties between blocks are merged into one
    level carrying the summed time mass.
    """

    levels: np.ndarray
    weights: np.ndarray
    total_time: float

    def __post_init__(self):
        if self.levels.size == 0 or self.levels.shape != self.weights.shape:
            raise ConfigurationError("occupation curve needs matching, non-empty levels and weights")
        if np.any(np.diff(self.levels) <= 0):
            raise ConfigurationError("occupation levels must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ConfigurationError("occupation weights must be positive")
        cumulative = np.cumsum(self.weights)
        cumulative[-1] = self.total_time
        object.__setattr__(self, "_cumulative", cumulative)

    @classmethod
    def from_values(cls, values: np.ndarray, weights: np.ndarray, total_time: float) -> "OccupationCurve":
        levels, inverse = np.unique(np.asarray(values, dtype=float), return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=np.asarray(weights, dtype=float), minlength=levels.size)
        return cls(levels=levels, weights=merged, total_time=float(total_time))

    @property
    def cumulative(self) -> np.ndarray:
        return self._cumulative

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        """Time in [0, T] spent at or below x."""
        idx = np.searchsorted(self.levels, np.asarray(x, dtype=float), side="right")
        out = np.where(idx > 0, self._cumulative[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def quantile_time(self, alpha: float) -> float:
        """inf{x : F(x) >= alpha} for alpha in (0, T]."""
        if not 0.0 < alpha <= self.total_time * (1.0 + _MASS_RTOL):
            raise ConfigurationError(f"alpha={alpha} outside (0, {self.total_time}]")
        idx = np.searchsorted(self._cumulative, alpha - _MASS_RTOL * self.total_time, side="left")
        return float(self.levels[min(idx, self.levels.size - 1)])

    def quantile(self, alpha_frac: float) -> float:
        """Quantile at alpha = alpha_frac * T; alpha_frac = 1 gives the top of the support."""
        if not 0.0 < alpha_frac <= 1.0:
            raise ConfigurationError(f"alpha_frac={alpha_frac} outside (0, 1]")
        return self.quantile_time(alpha_frac * self.total_time)

    def integrate_against(self, g: Callable[[float], float]) -> float:
        """Integral of g with respect to the curve, i.e. the time integral of g(V_hat)."""
        values = np.array([g(level) for level in self.levels], dtype=float)
        return float(np.dot(self.weights, values))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"level": self.levels, "cumulative_time": self._cumulative})


def block_weights(series: SpotVolSeries) -> np.ndarray:
    """u_n per block; the last block also carries the tail after the last full block."""
    weights = np.full(series.n_blocks, series.block_length)
    weights[-1] = series.grid.T - (series.n_blocks - 1) * series.block_length
    return weights


def occupation_curve(series: SpotVolSeries, which: EstimatorKind = EstimatorKind.TRUNCATED) -> OccupationCurve:
    return OccupationCurve.from_values(series.estimates(which), block_weights(series), series.grid.T)


def sup_error(
    series: SpotVolSeries, truth: np.ndarray, which: EstimatorKind = EstimatorKind.TRUNCATED
) -> float:
    """sup over fine-grid nodes of |V_hat_t - V_t| for the block extension."""
    truth = np.asarray(truth, dtype=float)
    grid = series.grid
    if truth.shape != (grid.n_fine + 1,):
        raise ConfigurationError(
            f"truth path has {truth.size} nodes, the grid's horizon needs {grid.n_fine + 1}"
        )
    per_block = series.block_spec.k_n * grid.substeps
    block = np.minimum(np.arange(truth.size) // per_block, series.n_blocks - 1)
    return float(np.max(np.abs(series.estimates(which)[block] - truth)))


def quantile_table(curve: OccupationCurve, alphas) -> pd.DataFrame:
    return pd.DataFrame({"alpha_frac": list(alphas), "q_hat": [curve.quantile(a) for a in alphas]})
