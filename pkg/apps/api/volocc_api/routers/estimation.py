import logging

import numpy as np
from fastapi import APIRouter

from ..models.schemas import (
    BlockEstimate,
    BlockSpec,
    CurvePoint,
    DensityPoint,
    DensityRequest,
    DensityResponse,
    EstimateRequest,
    EstimateResponse,
    QuantileEstimate,
)
from ..services.density import kernel_density
from ..services.occupation import occupation_curve
from ..services.spotvol import SpotVolSeries, spot_variance_blocks
from ..utils.csv_io import grid_from_times
from ..utils.http_errors import to_http_exception

logger = logging.getLogger("api")
router = APIRouter()


def _series(request: EstimateRequest) -> SpotVolSeries:
    grid, _ = grid_from_times(request.times)
    return spot_variance_blocks(np.asarray(request.prices, dtype=float), grid, BlockSpec(k_n=request.k_n), request.trunc)


@router.post("/estimate", response_model=EstimateResponse)
def estimate(request: EstimateRequest):
    """
    Block spot variance, occupation curve and quantiles of a posted price series.

    Times are in days and must be equispaced with spacing 1/n.
    """
    try:
        logger.info(f"Estimate: {len(request.prices)} prices, k_n={request.k_n}, trunc={request.trunc.kind}")
        series = _series(request)
        curve = occupation_curve(series, request.which)
        thresholds = series.block_thresholds()
        blocks = [
            BlockEstimate(
                block_index=i,
                t_start=float(series.block_start_times[i]),
                v_hat_star=float(series.v_hat_star[i]),
                v_hat=float(series.v_hat[i]),
                threshold_used=float(thresholds[i]) if np.isfinite(thresholds[i]) else None,
            )
            for i in range(series.n_blocks)
        ]
        return EstimateResponse(
            n_blocks=series.n_blocks,
            block_length=series.block_length,
            blocks=blocks,
            quantiles=[QuantileEstimate(alpha_frac=a, q_hat=curve.quantile(a)) for a in request.alphas],
            curve=[CurvePoint(level=l, cumulative_time=c) for l, c in zip(curve.levels, curve.cumulative)],
        )
    except Exception as e:
        raise to_http_exception(e, {"endpoint": "estimate"})


@router.post("/density", response_model=DensityResponse)
def density(request: DensityRequest):
    """Kernel occupation density of a posted price series."""
    try:
        logger.info(f"Density: {len(request.prices)} prices, kernel={request.kernel.kernel}")
        result = kernel_density(_series(request), request.kernel, request.eval_points, request.which)
        return DensityResponse(
            bandwidth=result.density.bandwidth,
            mass=result.density.mass(),
            points=[DensityPoint(x=x, f_hat=f) for x, f in zip(result.x, result.f_hat)],
        )
    except Exception as e:
        raise to_http_exception(e, {"endpoint": "density"})
