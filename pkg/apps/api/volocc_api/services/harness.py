"""Monte Carlo experiments: quantile bias/MAD, extreme-value test, rate study.

Replica i always draws from stream (i,) of the run's base seed and results
are reduced in replica order, so reports do not depend on the worker count.
"""

import logging
import math
import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np
from scipy import stats

from ..models.schemas import (
    BlockSpec,
    ConstVolSpec,
    EstimatorKind,
    EvtConfig,
    EvtReplica,
    EvtReport,
    LevyOuLogVolSpec,
    McConfig,
    McReport,
    McRow,
    NoTruncation,
    RateRow,
    RateStudyConfig,
    RateStudyReport,
    SamplingGrid,
)
from ..utils.errors import ConfigurationError, ReplicaError
from .occupation import occupation_curve, sup_error
from .oracle import evt_normalization, ks_against_gumbel_type, oracle_quantile
from .sim_models import simulate_const_vol, simulate_model, start_state
from .spotvol import spot_variance_blocks

logger = logging.getLogger(__name__)
mc_logger = logging.getLogger("montecarlo")

R = TypeVar("R")


def new_run_id(kind: str) -> str:
    return f"{kind}-{uuid.uuid4().hex[:12]}"


def map_replicas(fn: Callable[[int], R], n_replicas: int, workers: int = 1) -> List[R]:
    """Ordered map over replica indices, in-process or on a process pool."""
    if workers <= 1 or n_replicas == 1:
        return [fn(i) for i in range(n_replicas)]
    chunksize = max(1, n_replicas // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_replicas), chunksize=chunksize))


def _guard(replica: int, exc: Exception) -> ReplicaError:
    if isinstance(exc, ReplicaError):
        return exc
    return ReplicaError(replica, exc)


def _estimator_for(trunc) -> EstimatorKind:
    return EstimatorKind.UNTRUNCATED if isinstance(trunc, NoTruncation) else EstimatorKind.TRUNCATED


# Quantile bias / MAD

def mc_replica(config: McConfig, start_level: float, replica: int) -> Tuple[List[float], List[float]]:
    """(estimated quantiles, oracle quantiles) for one replica."""
    try:
        path = simulate_model(config.model, config.grid, config.base_seed, (replica,), start=start_level)
        series = spot_variance_blocks(path.x_obs, config.grid, config.block, config.trunc)
        curve = occupation_curve(series, config.estimator)
        q_hat = [curve.quantile(a) for a in config.alphas]
        q_true = [oracle_quantile(path.v_fine, path.fine_step, a) for a in config.alphas]
    except Exception as exc:
        raise _guard(replica, exc) from exc
    mc_logger.debug(f"replica {replica}: q_hat={q_hat} q_true={q_true}")
    return q_hat, q_true


def summarize_errors(alphas: Sequence[float], q_hat: np.ndarray, q_true: np.ndarray) -> List[McRow]:
    """Per-alpha true mean, bias, MAD and standard error of the bias; arrays are (replicas, alphas)."""
    n = q_hat.shape[0]
    err = q_hat - q_true
    rows = []
    for j, alpha in enumerate(alphas):
        stderr = float(np.std(err[:, j], ddof=1) / math.sqrt(n)) if n > 1 else None
        rows.append(
            McRow(
                alpha=alpha,
                true_mean=float(np.mean(q_true[:, j])),
                bias=float(np.mean(err[:, j])),
                mad=float(np.mean(np.abs(err[:, j]))),
                mc_stderr=stderr,
                n_replicas=n,
            )
        )
    return rows


def run_mc(config: McConfig) -> McReport:
    """Bias and MAD of the estimated occupation quantiles against the per-path truth."""
    run_id = new_run_id("mc")
    started = time.perf_counter()
    start_level = start_state(config.model, config.start_quantile)
    mc_logger.info(
        f"[{run_id}] mc start: model={config.model.kind} n={config.grid.n_per_day} k_n={config.block.k_n} "
        f"p0={config.start_quantile} replicas={config.n_replicas} workers={config.workers} seed={config.base_seed}"
    )
    results = map_replicas(partial(mc_replica, config, start_level), config.n_replicas, config.workers)
    q_hat = np.array([r[0] for r in results], dtype=float)
    q_true = np.array([r[1] for r in results], dtype=float)
    rows = summarize_errors(config.alphas, q_hat, q_true)
    elapsed = time.perf_counter() - started
    for row in rows:
        mc_logger.info(f"[{run_id}] alpha={row.alpha}: true={row.true_mean:.4f} bias={row.bias:.4f} mad={row.mad:.4f}")
    mc_logger.info(f"[{run_id}] mc done in {elapsed:.1f}s")
    return McReport(run_id=run_id, config=config, rows=rows, elapsed_seconds=elapsed)


# Extreme-value test under constant volatility

def evt_replica(config: EvtConfig, k_n: int, m_n: float, c_n: float, replica: int) -> Tuple[float, float]:
    """(M_n, normalised M_n): M_n = max_i sqrt(k_n) |V_hat_i - V| / (sqrt(2) V)."""
    try:
        path = simulate_const_vol(config.model, config.grid, config.base_seed, (replica,))
        series = spot_variance_blocks(path.x_obs, config.grid, BlockSpec(k_n=k_n), config.trunc)
        v = config.model.v
        z = math.sqrt(k_n) * (series.estimates(_estimator_for(config.trunc)) - v) / (math.sqrt(2.0) * v)
        m = float(np.max(np.abs(z)))
    except Exception as exc:
        raise _guard(replica, exc) from exc
    return m, (m - m_n) / c_n


def run_evt(config: EvtConfig) -> EvtReport:
    """Kolmogorov-Smirnov test of the normalised maximal block error against exp(-2 exp(-x))."""
    if not isinstance(config.model, ConstVolSpec):
        raise ConfigurationError(f"extreme-value test needs a constant-volatility model, got {config.model.kind}")
    k_n = config.block_size()
    b_n = BlockSpec(k_n=k_n).n_blocks(config.grid)
    if b_n < 10:
        raise ConfigurationError(f"extreme-value test needs at least 10 blocks, got {b_n}")
    run_id = new_run_id("evt")
    started = time.perf_counter()
    m_n, c_n = evt_normalization(b_n)
    mc_logger.info(f"[{run_id}] evt start: n={config.grid.n_per_day} k_n={k_n} b_n={b_n} replicas={config.n_replicas}")

    results = map_replicas(partial(evt_replica, config, k_n, m_n, c_n), config.n_replicas, config.workers)
    normalized = np.array([r[1] for r in results])
    ks_distance, ks_pvalue = ks_against_gumbel_type(normalized)
    elapsed = time.perf_counter() - started
    mc_logger.info(f"[{run_id}] evt done in {elapsed:.1f}s: KS={ks_distance:.4f} p={ks_pvalue:.3g}")
    return EvtReport(
        run_id=run_id,
        config=config,
        k_n=k_n,
        b_n=b_n,
        m_n=m_n,
        c_n=c_n,
        ks_distance=ks_distance,
        ks_pvalue=ks_pvalue,
        median_normalized=float(np.median(normalized)),
        maxima=[EvtReplica(replica=i, M_n=m, normalized=z) for i, (m, z) in enumerate(results)],
        elapsed_seconds=elapsed,
    )


# Rate study

def ladder_block_size(n_per_day: int, gamma: float) -> int:
    return max(2, int(round((1.0 / n_per_day) ** -gamma)))


def rate_replica(config: RateStudyConfig, start_level: float, replica: int) -> List[float]:
    """Sup-error at every ladder rung, all rungs observing the same latent path."""
    ladder = sorted(config.ladder)
    finest = SamplingGrid(T=config.T, n_per_day=ladder[-1], substeps=config.substeps)
    which = _estimator_for(config.trunc)
    try:
        path = simulate_model(config.model, finest, config.base_seed, (replica,), start=start_level)
        errors = []
        for n in ladder:
            coarse = path.subsample(ladder[-1] // n)
            block = BlockSpec(k_n=ladder_block_size(n, config.gamma), gamma_hint=config.gamma)
            series = spot_variance_blocks(coarse.x_obs, coarse.grid, block, config.trunc)
            errors.append(sup_error(series, coarse.v_fine, which))
    except Exception as exc:
        raise _guard(replica, exc) from exc
    return errors


def check_ladder(ladder: Sequence[int]) -> List[int]:
    ladder = sorted(ladder)
    if len(ladder) < 3:
        raise ConfigurationError(f"rate study needs at least 3 ladder values, got {len(ladder)}")
    if len(set(ladder)) != len(ladder):
        raise ConfigurationError("ladder values must be distinct")
    bad = [n for n in ladder if ladder[-1] % n]
    if bad:
        raise ConfigurationError(f"ladder values {bad} do not divide the finest n={ladder[-1]}")
    return ladder


def run_rate_study(config: RateStudyConfig) -> RateStudyReport:
    """Mean sup-error per sampling frequency and its log-log slope against delta_n."""
    ladder = check_ladder(config.ladder)
    if isinstance(config.model, LevyOuLogVolSpec):
        raise ConfigurationError("rate study needs a continuous-volatility model")
    run_id = new_run_id("rates")
    started = time.perf_counter()
    start_level = start_state(config.model, config.start_quantile)
    mc_logger.info(f"[{run_id}] rate study start: ladder={ladder} gamma={config.gamma} replicas={config.n_replicas}")

    eta = np.array(map_replicas(partial(rate_replica, config, start_level), config.n_replicas, config.workers))
    rows = []
    for j, n in enumerate(ladder):
        stderr = float(np.std(eta[:, j], ddof=1) / math.sqrt(eta.shape[0])) if eta.shape[0] > 1 else None
        rows.append(
            RateRow(
                n=n, delta_n=1.0 / n, k_n=ladder_block_size(n, config.gamma),
                mean_eta=float(eta[:, j].mean()), stderr=stderr,
            )
        )
    fit = stats.linregress(np.log([r.delta_n for r in rows]), np.log([r.mean_eta for r in rows]))
    elapsed = time.perf_counter() - started
    mc_logger.info(f"[{run_id}] rate study done in {elapsed:.1f}s: slope={fit.slope:.4f}")
    return RateStudyReport(
        run_id=run_id, config=config, rows=rows, slope=float(fit.slope),
        intercept=float(fit.intercept), elapsed_seconds=elapsed,
    )
