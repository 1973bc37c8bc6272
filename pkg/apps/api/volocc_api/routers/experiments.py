import logging

import numpy as np
from fastapi import APIRouter

from ..models.schemas import (
    EvtConfig,
    EvtReport,
    McConfig,
    McReport,
    RateStudyConfig,
    RateStudyReport,
    SimulateRequest,
    SimulateResponse,
)
from ..services.harness import run_evt, run_mc, run_rate_study
from ..services.sim_models import simulate_model, start_state
from ..utils.http_errors import to_http_exception
from .report import reports_storage

logger = logging.getLogger("api")
router = APIRouter()


@router.post("/simulate", response_model=SimulateResponse)
def simulate(request: SimulateRequest):
    """Simulate one observed price path; the latent variance is summarised, not returned."""
    try:
        logger.info(f"Simulate: model={request.model.kind} T={request.grid.T} n={request.grid.n_per_day} seed={request.seed}")
        path = simulate_model(
            request.model, request.grid, request.seed, start=start_state(request.model, request.start_quantile)
        )
        return SimulateResponse(
            times=path.obs_times().tolist(),
            prices=path.x_obs.tolist(),
            v_min=float(np.min(path.v_fine)),
            v_max=float(np.max(path.v_fine)),
            v_mean=float(np.mean(path.v_fine)),
            n_price_jumps=path.n_price_jumps,
            start_level=path.start_level,
        )
    except Exception as e:
        raise to_http_exception(e, {"endpoint": "simulate", "seed": request.seed})


@router.post("/mc", response_model=McReport)
def monte_carlo(config: McConfig):
    """Run the quantile bias/MAD experiment and store the report."""
    try:
        report = run_mc(config)
        reports_storage[report.run_id] = report
        logger.info(f"Stored run {report.run_id} ({report.elapsed_seconds:.1f}s)")
        return report
    except Exception as e:
        raise to_http_exception(e, {"endpoint": "mc", "seed": config.base_seed})


@router.post("/evt", response_model=EvtReport)
def extreme_value_test(config: EvtConfig):
    """Kolmogorov-Smirnov test of normalised maximal block errors."""
    try:
        report = run_evt(config)
        reports_storage[report.run_id] = report
        logger.info(f"Stored run {report.run_id} ({report.elapsed_seconds:.1f}s)")
        return report
    except Exception as e:
        raise to_http_exception(e, {"endpoint": "evt", "seed": config.base_seed})


@router.post("/rates", response_model=RateStudyReport)
def rate_study(config: RateStudyConfig):
    try:
        report = run_rate_study(config)
        reports_storage[report.run_id] = report
        logger.info(f"Stored run {report.run_id} ({report.elapsed_seconds:.1f}s)")
        return report
    except Exception as e:
        raise to_http_exception(e, {"endpoint": "rates", "seed": config.base_seed})
