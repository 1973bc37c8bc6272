"""Block spot-variance estimators with jump truncation.

Blocks are non-overlapping and forward looking: block i averages the squared
increments i*k_n+1 .. (i+1)*k_n (1-based) over its length u_n = k_n * delta_n.
Observations after the last full block start no new block; the last block's
value is carried over the tail when the estimates are extended to [0, T].
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd

from ..models.schemas import (
    BlockSpec,
    DailyBVTruncation,
    EstimatorKind,
    FixedTruncation,
    GlobalBVTruncation,
    LocalBipowerTruncation,
    NoTruncation,
    SamplingGrid,
)
from ..utils.errors import ConfigurationError, EstimationError, InputDataError

logger = logging.getLogger(__name__)

BIPOWER_SCALE = math.pi / 2.0

AnyTruncation = Union[NoTruncation, FixedTruncation, GlobalBVTruncation, DailyBVTruncation, LocalBipowerTruncation]


def _increments(x_obs: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    x_obs = np.asarray(x_obs, dtype=float)
    if x_obs.shape != (grid.n_obs + 1,):
        raise InputDataError(f"expected {grid.n_obs + 1} prices for the grid, got {x_obs.size}")
    if not np.all(np.isfinite(x_obs)):
        raise InputDataError("prices contain non-finite values")
    return np.diff(x_obs)


def n_days(grid: SamplingGrid) -> int:
    return int(math.ceil(grid.n_obs / grid.n_per_day))


def bipower_daily(x_obs: np.ndarray, grid: SamplingGrid, day: int) -> float:
    """Bipower variation of calendar day `day` (0-based).

    (pi/2) * sum |dX_{i-1}| |dX_i| over consecutive increment pairs that both
    fall inside the day.
    """
    dx = _increments(x_obs, grid)
    if not 0 <= day < n_days(grid):
        raise EstimationError(f"day {day} outside horizon of {n_days(grid)} days")
    start = day * grid.n_per_day
    stop = min(start + grid.n_per_day, dx.size)
    a = np.abs(dx[start:stop])
    if a.size < 2:
        raise EstimationError(f"day {day} has fewer than 3 observations", details={"day": day})
    return float(BIPOWER_SCALE * np.sum(a[:-1] * a[1:]))


def daily_bipower_series(x_obs: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    """BV_j for every day; a trailing partial day too short for a product reuses the day before."""
    days = n_days(grid)
    out = np.empty(days)
    for j in range(days):
        try:
            out[j] = bipower_daily(x_obs, grid, j)
        except EstimationError:
            if j == 0:
                raise
            out[j] = out[j - 1]
    return out


def local_bipower(x_obs: np.ndarray, grid: SamplingGrid, i: int, k_n: int) -> float:
    """Localised bipower volatility of block i.

    sqrt((pi/2) u_n^{-1} sum_{j=1..k_n} |dX_{i k_n + j}| |dX_{i k_n + j + 1}|),
    which needs k_n + 1 increments from the block start.
    """
    dx = _increments(x_obs, grid)
    start = i * k_n
    if i < 0 or start + k_n + 1 > dx.size:
        raise EstimationError(
            f"block {i} needs {k_n + 1} increments from index {start}, only {max(dx.size - start, 0)} available",
            details={"block": i, "k_n": k_n},
        )
    a = np.abs(dx[start : start + k_n + 1])
    return math.sqrt(BIPOWER_SCALE * np.sum(a[:-1] * a[1:]) / (k_n * grid.delta_n))


def _local_bipower_blocks(dx: np.ndarray, grid: SamplingGrid, k_n: int, n_blocks: int) -> np.ndarray:
    """local_bipower for every block; a last block short of one increment rescales its k_n - 1 products."""
    a = np.abs(dx)
    products = a[:-1] * a[1:]
    out = np.empty(n_blocks)
    u_n = k_n * grid.delta_n
    for i in range(n_blocks):
        chunk = products[i * k_n : (i + 1) * k_n]
        if chunk.size == 0:
            raise EstimationError(f"block {i} has no bipower products", details={"block": i})
        out[i] = math.sqrt(BIPOWER_SCALE * chunk.sum() * (k_n / chunk.size) / u_n)
    return out


def truncation_levels(
    spec: AnyTruncation, x_obs: np.ndarray, grid: SamplingGrid, block_spec: BlockSpec
) -> np.ndarray:
    """Per-increment thresholds v_{n,t} = alpha_{n,t} * delta_n^varpi.

    Increment m (0-based) is assigned the day containing its left endpoint, m // n_per_day,
    and the block m // k_n; increments past the last full block reuse the last block.
    """
    dx = _increments(x_obs, grid)
    m = dx.size
    if isinstance(spec, NoTruncation):
        return np.full(m, np.inf)

    scale = spec.multiplier_scale(grid.delta_n) * grid.delta_n ** spec.varpi
    if isinstance(spec, FixedTruncation):
        return np.full(m, spec.alpha * scale)
    if isinstance(spec, GlobalBVTruncation):
        bv = daily_bipower_series(x_obs, grid)
        return np.full(m, spec.c * math.sqrt(float(bv.mean())) * scale)
    if isinstance(spec, DailyBVTruncation):
        bv = daily_bipower_series(x_obs, grid)
        day = np.arange(m) // grid.n_per_day
        return spec.c * np.sqrt(bv[day]) * scale
    if isinstance(spec, LocalBipowerTruncation):
        n_blocks = _checked_block_count(grid, block_spec)
        sigma = np.clip(_local_bipower_blocks(dx, grid, block_spec.k_n, n_blocks), 1.0 / spec.clamp_C, spec.clamp_C)
        block = np.minimum(np.arange(m) // block_spec.k_n, n_blocks - 1)
        return spec.c * sigma[block] * scale
    raise ConfigurationError(f"unknown truncation rule {type(spec).__name__}")


def _checked_block_count(grid: SamplingGrid, block_spec: BlockSpec) -> int:
    if block_spec.k_n > grid.n_obs:
        raise ConfigurationError(f"k_n={block_spec.k_n} exceeds the {grid.n_obs} available increments")
    return block_spec.n_blocks(grid)


@dataclass(frozen=True, eq=False)
class SpotVolSeries:
    block_spec: BlockSpec
    grid: SamplingGrid
    v_hat_star: np.ndarray
    v_hat: np.ndarray
    block_start_times: np.ndarray
    thresholds: np.ndarray

    @property
    def n_blocks(self) -> int:
        return int(self.v_hat.size)

    @property
    def block_length(self) -> float:
        return self.block_spec.block_length(self.grid)

    @property
    def tail_length(self) -> float:
        """Time after the last full block, covered by the last estimate."""
        return max(self.grid.T - self.n_blocks * self.block_length, 0.0)

    def estimates(self, which: EstimatorKind = EstimatorKind.TRUNCATED) -> np.ndarray:
        return self.v_hat if EstimatorKind(which) == EstimatorKind.TRUNCATED else self.v_hat_star

    def block_thresholds(self) -> np.ndarray:
        """Smallest threshold applied inside each block."""
        k = self.block_spec.k_n
        return self.thresholds[: self.n_blocks * k].reshape(self.n_blocks, k).min(axis=1)

    def extension(self, times: np.ndarray, which: EstimatorKind = EstimatorKind.TRUNCATED) -> np.ndarray:
        """Piecewise-constant extension evaluated at `times`; the tail reuses the last block."""
        times = np.asarray(times, dtype=float)
        idx = np.floor(times / self.block_length + 1e-9).astype(np.int64)
        return self.estimates(which)[np.clip(idx, 0, self.n_blocks - 1)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "block_index": np.arange(self.n_blocks),
                "t_start": self.block_start_times,
                "v_hat_star": self.v_hat_star,
                "v_hat": self.v_hat,
                "threshold_used": self.block_thresholds(),
            }
        )


def spot_variance_blocks(
    x_obs: np.ndarray,
    grid: SamplingGrid,
    block_spec: BlockSpec,
    trunc: AnyTruncation = NoTruncation(),
) -> SpotVolSeries:
    """Truncated and untruncated block spot-variance estimates.

    Args:
        x_obs: Log-prices at the grid's observation times.
        grid: Observation grid.
        block_spec: Block size k_n.
        trunc: Truncation rule for the truncated estimate.

    Returns:
        SpotVolSeries with floor(n_obs / k_n) blocks.
    """
    dx = _increments(x_obs, grid)
    n_blocks = _checked_block_count(grid, block_spec)
    k = block_spec.k_n
    u_n = block_spec.block_length(grid)

    thresholds = truncation_levels(trunc, x_obs, grid, block_spec)
    window = dx[: n_blocks * k].reshape(n_blocks, k)
    kept = np.abs(window) <= thresholds[: n_blocks * k].reshape(n_blocks, k)
    squares = window ** 2
    v_hat_star = squares.sum(axis=1) / u_n
    v_hat = np.where(kept, squares, 0.0).sum(axis=1) / u_n

    dropped = int(window.size - kept.sum())
    logger.debug(f"Spot variance: {n_blocks} blocks of {k} increments, {dropped} increments truncated")
    return SpotVolSeries(
        block_spec=block_spec,
        grid=grid,
        v_hat_star=v_hat_star,
        v_hat=v_hat,
        block_start_times=np.arange(n_blocks) * u_n,
        thresholds=thresholds,
    )
