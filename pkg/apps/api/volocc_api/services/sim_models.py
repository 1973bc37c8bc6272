import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Optional, Sequence, Tuple, Union

import numba
import numpy as np
import pandas as pd
from scipy import integrate, optimize, signal, special, stats

from ..models.schemas import (
    CirSpec,
    ConstVolSpec,
    LevyOuLogVolSpec,
    PriceJumps,
    SamplingGrid,
)
from ..utils.errors import ConfigurationError, SimulationError
from ..utils.seeding import SeedLike, make_rng, stream_key
from .bdlp import sample_bdlp_increment

logger = logging.getLogger(__name__)
sim_logger = logging.getLogger("simulation")

AnyModel = Union[CirSpec, LevyOuLogVolSpec, ConstVolSpec]

# Long-horizon cross-check of the OU invariant law
INVARIANT_SIM_DAYS = 20000.0
INVARIANT_SIM_STEP = 0.05
INVARIANT_SIM_SEED = 72013


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Observed prices plus the latent variance on the fine grid."""

    grid: SamplingGrid
    x_obs: np.ndarray
    v_fine: np.ndarray
    seed: int
    stream: Tuple[int, ...] = ()
    model_kind: str = ""
    n_price_jumps: int = 0
    start_level: float = float("nan")

    def __post_init__(self):
        if self.x_obs.shape != (self.grid.n_obs + 1,):
            raise SimulationError(
                f"x_obs has {self.x_obs.size} values, expected {self.grid.n_obs + 1}",
                details={"seed": self.seed, "stream": list(self.stream)},
            )
        if self.v_fine.shape != (self.grid.n_fine + 1,):
            raise SimulationError(
                f"v_fine has {self.v_fine.size} values, expected {self.grid.n_fine + 1}",
                details={"seed": self.seed, "stream": list(self.stream)},
            )
        if not np.all(np.isfinite(self.v_fine)) or np.any(self.v_fine < 0.0):
            raise SimulationError(
                "variance path is negative or not finite",
                details={"seed": self.seed, "stream": list(self.stream), "model": self.model_kind},
            )
        self.x_obs.setflags(write=False)
        self.v_fine.setflags(write=False)

    @property
    def fine_step(self) -> float:
        return self.grid.fine_step

    def obs_times(self) -> np.ndarray:
        return self.grid.obs_times()

    def fine_times(self) -> np.ndarray:
        return self.grid.fine_times()

    def price_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.obs_times(), "price": self.x_obs})

    def variance_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.fine_times(), "v_true": self.v_fine})

    def subsample(self, factor: int) -> "SamplePath":
        """Same latent path observed every `factor`-th observation."""
        if factor < 1 or self.grid.n_per_day % factor:
            raise ConfigurationError(f"factor {factor} does not divide n_per_day={self.grid.n_per_day}")
        grid = SamplingGrid(
            T=self.grid.T, n_per_day=self.grid.n_per_day // factor, substeps=self.grid.substeps * factor
        )
        return SamplePath(
            grid=grid,
            x_obs=np.array(self.x_obs[::factor]),
            v_fine=np.array(self.v_fine),
            seed=self.seed,
            stream=self.stream,
            model_kind=self.model_kind,
            n_price_jumps=self.n_price_jumps,
            start_level=self.start_level,
        )


@numba.njit(cache=True)
def _cir_euler(v0, kappa, theta, sigma_v, dt, z):
    n = z.shape[0]
    v = np.empty(n + 1)
    v[0] = v0
    pull = -math.expm1(-kappa * dt)
    root_dt = math.sqrt(dt)
    for k in range(n):
        vp = v[k] if v[k] > 0.0 else 0.0
        v[k + 1] = v[k] + (theta - vp) * pull + sigma_v * math.sqrt(vp) * root_dt * z[k]
    return v


def ou_recursion(y0: float, phi: float, increments: np.ndarray) -> np.ndarray:
    """Y_{k+1} = phi * Y_k + increments[k], returned with Y_0 prepended."""
    tail, _ = signal.lfilter([1.0], [1.0, -phi], increments, zi=[phi * y0])
    return np.concatenate([[y0], tail])


def _jump_sizes(jumps: PriceJumps, rng: np.random.Generator, count: int) -> np.ndarray:
    if jumps.law == "symmetric":
        return jumps.size * rng.choice(np.array([-1.0, 1.0]), size=count)
    return jumps.size * rng.standard_normal(count)


def _observed_prices(
    rng: np.random.Generator,
    vol_left: np.ndarray,
    grid: SamplingGrid,
    drift_x: float,
    jumps: Optional[PriceJumps],
) -> Tuple[np.ndarray, int]:
    """Accumulate price increments on the fine grid and keep observation nodes."""
    dt = grid.fine_step
    dx = drift_x * dt + vol_left * math.sqrt(dt) * rng.standard_normal(grid.n_fine)
    n_jumps = 0
    if jumps is not None and jumps.rate > 0.0:
        counts = rng.poisson(jumps.rate * dt, grid.n_fine)
        n_jumps = int(counts.sum())
        sizes = _jump_sizes(jumps, rng, n_jumps)
        dx = dx + np.bincount(np.repeat(np.arange(grid.n_fine), counts), weights=sizes, minlength=grid.n_fine)
        dx = dx - jumps.rate * jumps.mean_size * dt
    x_fine = np.concatenate([[0.0], np.cumsum(dx)])
    return x_fine[:: grid.substeps].copy(), n_jumps


def simulate_cir(spec: CirSpec, v0: float, grid: SamplingGrid, seed: SeedLike, stream: Sequence[int] = ()) -> SamplePath:
    """Square-root variance by Euler with full truncation on the fine grid.

    The mean-reversion step uses the exact decay factor 1 - e^{-kappa dt}, so
    with sigma_v = 0 the scheme reproduces the ODE solution. The internal state
    may dip below zero when the Feller condition fails; drift and diffusion see
    max(v, 0) and the reported path is floored at the smallest positive float.
    """
    if not v0 > 0.0:
        raise ConfigurationError(f"v0 must be positive, got {v0}")
    rng = make_rng(seed, stream)
    z = rng.standard_normal(grid.n_fine)
    v = _cir_euler(float(v0), spec.kappa, spec.theta, spec.sigma_v, grid.fine_step, z)
    if not spec.feller_satisfied:
        sim_logger.debug(f"Feller condition fails: 2*kappa*theta={2 * spec.kappa * spec.theta} < {spec.sigma_v ** 2}")
    n_negative = int(np.count_nonzero(v <= 0.0))
    if n_negative:
        sim_logger.debug(f"CIR state hit zero on {n_negative} of {v.size} fine steps")
    v = np.maximum(v, np.finfo(float).tiny)
    vol_left = np.sqrt(v[:-1])
    x_obs, n_jumps = _observed_prices(rng, vol_left, grid, spec.drift_x, spec.price_jumps)
    entropy, key = stream_key(seed, stream)
    sim_logger.debug(f"CIR path simulated: seed={entropy} stream={key} n_fine={grid.n_fine}")
    return SamplePath(
        grid=grid, x_obs=x_obs, v_fine=v, seed=entropy, stream=key,
        model_kind=spec.kind, n_price_jumps=n_jumps, start_level=float(v0),
    )


def simulate_levy_ou_logvol(
    spec: LevyOuLogVolSpec, y0: float, grid: SamplingGrid, seed: SeedLike, stream: Sequence[int] = ()
) -> SamplePath:
    """OU state dY = -lam Y dt + dL; variance e^{s(Y-1)} with s = spec.variance_exponent."""
    rng = make_rng(seed, stream)
    dt = grid.fine_step
    dL = sample_bdlp_increment(dt, spec, rng, size=grid.n_fine)
    y = ou_recursion(float(y0), math.exp(-spec.lam * dt), dL)
    v = ou_variance(spec, y)
    vol_left = np.sqrt(v[:-1])
    x_obs, n_jumps = _observed_prices(rng, vol_left, grid, spec.drift_x, spec.price_jumps)
    entropy, key = stream_key(seed, stream)
    sim_logger.debug(f"Log-vol OU path simulated: seed={entropy} stream={key} n_fine={grid.n_fine}")
    return SamplePath(
        grid=grid, x_obs=x_obs, v_fine=v, seed=entropy, stream=key,
        model_kind=spec.kind, n_price_jumps=n_jumps, start_level=float(y0),
    )


def simulate_const_vol(spec: ConstVolSpec, grid: SamplingGrid, seed: SeedLike, stream: Sequence[int] = ()) -> SamplePath:
    """X = sqrt(v) W plus optional compound-Poisson jumps."""
    rng = make_rng(seed, stream)
    vol_left = np.full(grid.n_fine, math.sqrt(spec.v))
    x_obs, n_jumps = _observed_prices(rng, vol_left, grid, spec.drift_x, spec.price_jumps)
    entropy, key = stream_key(seed, stream)
    return SamplePath(
        grid=grid, x_obs=x_obs, v_fine=np.full(grid.n_fine + 1, spec.v), seed=entropy, stream=key,
        model_kind=spec.kind, n_price_jumps=n_jumps, start_level=spec.v,
    )


# Invariant laws

def _check_probability(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"probability must lie in (0, 1), got {p}")


def _cir_stationary(spec: CirSpec):
    if spec.kappa <= 0.0 or spec.sigma_v <= 0.0 or spec.theta <= 0.0:
        raise ConfigurationError("CIR invariant law needs kappa, theta and sigma_v positive")
    shape = 2.0 * spec.kappa * spec.theta / spec.sigma_v ** 2
    scale = spec.sigma_v ** 2 / (2.0 * spec.kappa)
    return stats.gamma(a=shape, scale=scale)


def ou_variance(spec: LevyOuLogVolSpec, y):
    """Variance level of OU state y."""
    return np.exp(spec.variance_exponent * (np.asarray(y, dtype=float) - 1.0))


def ou_log_characteristic(spec: LevyOuLogVolSpec, u: np.ndarray) -> np.ndarray:
    """Log characteristic function of the stationary OU state.

    On the dL_{lambda t} clock this is the selfdecomposable marginal
    -s2 u^2/2 + A Gamma(-p)[(b - iu)^p - b^p + i u p b^{p-1}]; on the dL_t clock
    the same exponent divided by lambda.
    """
    u = np.asarray(u, dtype=float)
    A, b, p = spec.jump_scale, spec.jump_tempering, spec.jump_index
    psi = -0.5 * spec.gauss_var_marginal * u ** 2 + 0j
    if A > 0.0:
        psi = psi + A * special.gamma(-p) * ((b - 1j * u) ** p - b ** p + 1j * u * p * b ** (p - 1.0))
    return psi * (1.0 if spec.time_scaling == "lambda_t" else 1.0 / spec.lam)


def ou_stationary_variance(spec: LevyOuLogVolSpec) -> float:
    A, b, p = spec.jump_scale, spec.jump_tempering, spec.jump_index
    var = spec.gauss_var_marginal + A * special.gamma(2.0 - p) * b ** (p - 2.0)
    return var * (1.0 if spec.time_scaling == "lambda_t" else 1.0 / spec.lam)


def _ou_cdf(spec: LevyOuLogVolSpec, y: float, u_max: float) -> float:
    """Gil-Pelaez inversion of the stationary characteristic function."""

    def integrand(u):
        if u == 0.0:
            return -y
        phi = np.exp(ou_log_characteristic(spec, np.array([u]))[0] - 1j * u * y)
        return float(phi.imag / u)

    value, _ = integrate.quad(integrand, 0.0, u_max, limit=1000, epsabs=1e-11, epsrel=1e-10)
    return 0.5 - value / math.pi


def _characteristic_cutoff(spec: LevyOuLogVolSpec) -> float:
    u = 1.0
    while u < 1e6 and np.abs(np.exp(ou_log_characteristic(spec, np.array([u]))[0])) > 1e-16:
        u *= 1.5
    return u


@lru_cache(maxsize=64)
def ou_state_quantile(spec: LevyOuLogVolSpec, p: float) -> float:
    """Quantile of the OU state's invariant law by characteristic-function inversion."""
    _check_probability(p)
    variance = ou_stationary_variance(spec)
    if variance == 0.0:
        return 0.0
    if spec.jump_scale == 0.0:
        return float(stats.norm.ppf(p, scale=math.sqrt(variance)))
    u_max = _characteristic_cutoff(spec)
    sd = math.sqrt(variance)
    lo, hi = -10.0 * sd, 10.0 * sd
    while _ou_cdf(spec, lo, u_max) > p:
        lo *= 2.0
    while _ou_cdf(spec, hi, u_max) < p:
        hi *= 2.0
    return float(optimize.brentq(lambda y: _ou_cdf(spec, y, u_max) - p, lo, hi, xtol=1e-12))


@lru_cache(maxsize=8)
def _ou_long_run_states(spec: LevyOuLogVolSpec, days: float, step: float) -> np.ndarray:
    rng = make_rng(INVARIANT_SIM_SEED)
    n = int(round(days / step))
    dL = sample_bdlp_increment(step, spec, rng, size=n)
    y = ou_recursion(0.0, math.exp(-spec.lam * step), dL)
    burn = min(n // 10, int(10.0 / (spec.lam * step)))
    sim_logger.info(f"Long-run OU simulation: {days} days, step {step}, burn-in {burn} steps")
    return y[burn:]


def ou_state_quantile_by_simulation(
    spec: LevyOuLogVolSpec, p: float, days: float = INVARIANT_SIM_DAYS, step: float = INVARIANT_SIM_STEP
) -> float:
    """Empirical quantile of the OU state over one long seeded path."""
    _check_probability(p)
    return float(np.quantile(_ou_long_run_states(spec, days, step), p))


def invariant_quantile(
    spec: AnyModel, p: float, method: Literal["inversion", "simulation"] = "inversion"
) -> float:
    """Quantile of the invariant law of the variance process.

    For the log-volatility model `inversion` inverts the stationary characteristic
    function; `simulation` reads the quantile off one long seeded path.
    """
    _check_probability(p)
    if isinstance(spec, CirSpec):
        return float(_cir_stationary(spec).ppf(p))
    if isinstance(spec, LevyOuLogVolSpec):
        q = ou_state_quantile(spec, p) if method == "inversion" else ou_state_quantile_by_simulation(spec, p)
        return float(ou_variance(spec, q))
    return spec.v


def start_state(spec: AnyModel, p0: float) -> float:
    """Simulation start for invariant quantile p0: v0 for CIR, OU state for log-vol."""
    if isinstance(spec, CirSpec):
        return invariant_quantile(spec, p0)
    if isinstance(spec, LevyOuLogVolSpec):
        return ou_state_quantile(spec, p0)
    return spec.v


def simulate_model(
    spec: AnyModel, grid: SamplingGrid, seed: SeedLike, stream: Sequence[int] = (), start: Optional[float] = None
) -> SamplePath:
    """Dispatch on the model kind; `start` defaults to the invariant median."""
    if isinstance(spec, ConstVolSpec):
        return simulate_const_vol(spec, grid, seed, stream)
    if start is None:
        start = start_state(spec, 0.5)
    if isinstance(spec, CirSpec):
        return simulate_cir(spec, start, grid, seed, stream)
    return simulate_levy_ou_logvol(spec, start, grid, seed, stream)
