"""Ground truth from the simulated fine-grid variance path, and rate exponents.

The oracle occupation time is the left-endpoint Riemann sum of 1{V_s <= x}
over the fine grid, so its inverse is an order statistic of the fine-grid
values with no interpolation.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from ..models.schemas import KernelSpec, RateKind, RateParams
from ..utils.errors import ConfigurationError
from .density import OccupationDensity
from .occupation import OccupationCurve

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _left_values(v_fine: np.ndarray) -> np.ndarray:
    v = np.asarray(v_fine, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ConfigurationError("fine-grid path needs at least two nodes")
    return v[:-1]


def oracle_curve(v_fine: np.ndarray, fine_step: float) -> OccupationCurve:
    values = _left_values(v_fine)
    return OccupationCurve.from_values(values, np.full(values.size, fine_step), values.size * fine_step)


def oracle_occupation(v_fine: np.ndarray, fine_step: float, x: ArrayLike) -> ArrayLike:
    """Time at or below x: fine_step times the count of left-endpoint values <= x."""
    values = np.sort(_left_values(v_fine))
    counts = np.searchsorted(values, np.asarray(x, dtype=float), side="right")
    out = counts * fine_step
    return float(out) if np.ndim(out) == 0 else out


def oracle_quantile(v_fine: np.ndarray, fine_step: float, alpha_frac: float) -> float:
    """Order statistic at rank ceil(alpha_frac * count)."""
    if not 0.0 < alpha_frac < 1.0:
        raise ConfigurationError(f"alpha_frac={alpha_frac} outside (0, 1)")
    values = _left_values(v_fine)
    rank = max(1, int(math.ceil(round(alpha_frac * values.size, 9))))
    return float(np.partition(values, rank - 1)[rank - 1])


def fine_grid_modulus(v_fine: np.ndarray) -> float:
    """Largest move of the variance between adjacent fine-grid nodes."""
    v = np.asarray(v_fine, dtype=float)
    return float(np.max(np.abs(np.diff(v)))) if v.size > 1 else 0.0


def discretization_slack(v_fine: np.ndarray) -> float:
    return 2.0 * fine_grid_modulus(v_fine)


def reference_bandwidth(fine_step: float) -> float:
    return fine_step ** 0.2


def oracle_density(
    v_fine: np.ndarray,
    fine_step: float,
    spec: KernelSpec = KernelSpec(),
    bandwidth: Optional[float] = None,
) -> OccupationDensity:
    """Kernel smoother of the true path; bandwidth defaults to fine_step^{1/5}."""
    curve = oracle_curve(v_fine, fine_step)
    h = bandwidth if bandwidth is not None else reference_bandwidth(fine_step)
    return OccupationDensity(levels=curve.levels, weights=curve.weights, bandwidth=h, kernel=spec.kernel)


def occupation_density_fd(v_fine: np.ndarray, fine_step: float, x: ArrayLike, eps: float = 0.01) -> ArrayLike:
    """Central difference (F(x + eps) - F(x - eps)) / (2 eps) of the oracle occupation time."""
    if not eps > 0.0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=float)
    upper = oracle_occupation(v_fine, fine_step, x + eps)
    lower = oracle_occupation(v_fine, fine_step, x - eps)
    return (upper - lower) / (2.0 * eps)


# Rate exponents: each bound behaves like delta_n ** exponent.

def _check_rate_params(params: RateParams) -> float:
    """Validate the joint constraints and return the effective jump index."""
    r = 0.0 if params.continuous_x else params.r
    r1 = max(1.0, r)
    varpi_floor = (r1 - 1.0) / (2.0 * r1 - r)
    if not params.varpi > varpi_floor:
        raise ConfigurationError(
            f"varpi > (1 v r - 1)/(2(1 v r) - r) violated: varpi={params.varpi}, bound={varpi_floor:.6g}",
            details={"constraint": "varpi_lower"},
        )
    gamma_floor = r * params.varpi + r1 * (1.0 - 2.0 * params.varpi)
    if not gamma_floor < params.gamma < 1.0:
        raise ConfigurationError(
            f"r*varpi + (1 v r)(1 - 2 varpi) < gamma < 1 violated: gamma={params.gamma}, bound={gamma_floor:.6g}",
            details={"constraint": "gamma_range"},
        )
    if r > 1.0 and not params.theta > 0.0:
        raise ConfigurationError("theta > 0 is required when r > 1", details={"constraint": "theta_positive"})
    return r


def _a_n(params: RateParams, r: float) -> float:
    g, iota = params.gamma, params.iota
    sampling = min(g / 2.0, (1.0 - g) / 2.0) - iota
    if params.continuous_x:
        return sampling
    if r <= 1.0:
        return min(g - 1.0 + (2.0 - r) * params.varpi, sampling)
    return min(g / r - (1.0 - params.varpi) - iota, sampling)


def _a_bar_n(params: RateParams, r: float) -> float:
    g = params.gamma
    exponent = min(g / 2.0, (1.0 - g) / 2.0)
    if params.continuous_x:
        return exponent
    theta = params.theta if r > 1.0 else 0.0
    jump = (1.0 - r * params.varpi - theta) / max(1.0, r) - (1.0 - 2.0 * params.varpi)
    return min(exponent, jump)


def bandwidth_exponent(params: RateParams) -> float:
    if params.bandwidth_exponent is not None:
        return params.bandwidth_exponent
    return 1.0 / (4.0 * (2.0 + params.beta))


def rate_bound(params: RateParams, which: RateKind = RateKind.A_N) -> float:
    """Exponent e of the convergence rate delta_n^e.

    a_n: occupation time and quantile error; d_n: pointwise rate with
    volatility jumps of activity r_tilde; a_bar_n: sup-error of the
    spot-variance path as used for densities; f_n: kernel density with
    bandwidth delta_n^{eta_h}.
    """
    which = RateKind(which)
    r = _check_rate_params(params)
    if which == RateKind.A_N:
        exponent = _a_n(params, r)
    elif which == RateKind.D_N:
        exponent = min(_a_n(params, r), (1.0 - params.gamma) / (1.0 + params.r_tilde) - params.iota)
    elif which == RateKind.A_BAR_N:
        exponent = _a_bar_n(params, r)
    else:
        eta_h = bandwidth_exponent(params)
        exponent = min(_a_bar_n(params, r) - 2.0 * eta_h, params.beta * eta_h)
    if not exponent > 0.0:
        raise ConfigurationError(
            f"{which.value} exponent {exponent:.6g} is not positive; the bound does not vanish",
            details={"which": which.value, "exponent": exponent},
        )
    return exponent


# Extreme-value normalisation of the maximal block error under constant volatility.

def evt_normalization(b_n: int) -> Tuple[float, float]:
    """(m_n, c_n) for b_n blocks."""
    if b_n < 2:
        raise ConfigurationError(f"b_n must be at least 2, got {b_n}")
    two_log = 2.0 * math.log(b_n)
    root = math.sqrt(two_log)
    m_n = root - (math.log(math.log(b_n)) + math.log(4.0 * math.pi)) / (2.0 * root)
    return m_n, 1.0 / root


def gumbel_type_cdf(x: ArrayLike) -> ArrayLike:
    """exp(-2 exp(-x)), the limit law of the normalised maximum."""
    return np.exp(-2.0 * np.exp(-np.asarray(x, dtype=float)))


def gumbel_type_median() -> float:
    return -math.log(math.log(2.0) / 2.0)


def ks_against_gumbel_type(sample: np.ndarray) -> Tuple[float, float]:
    result = stats.kstest(np.asarray(sample, dtype=float), gumbel_type_cdf)
    return float(result.statistic), float(result.pvalue)
