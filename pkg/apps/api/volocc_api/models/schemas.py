import math
from datetime import datetime, timezone
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ErrorCode(str, Enum):
    """Error codes for CLI diagnostics and API responses."""
    CONFIG_ERROR = "CONFIG_ERROR"
    INPUT_ERROR = "INPUT_ERROR"
    SIMULATION_ERROR = "SIMULATION_ERROR"
    ESTIMATION_ERROR = "ESTIMATION_ERROR"
    REPLICA_FAILED = "REPLICA_FAILED"
    EXPORT_ERROR = "EXPORT_ERROR"
    UNKNOWN_ERROR = "UNKNOWN_ERROR"


class EstimatorKind(str, Enum):
    """Which block estimate feeds the occupation curve."""
    TRUNCATED = "truncated"
    UNTRUNCATED = "untruncated"


class RateKind(str, Enum):
    """Rate sequences available from the rate-bound calculator."""
    A_N = "a_n"
    D_N = "d_n"
    A_BAR_N = "a_bar_n"
    F_N = "f_n"


# Sampling

class SamplingGrid(BaseModel):
    """Equidistant observation grid on [0, T] plus the fine simulation grid."""
    model_config = ConfigDict(frozen=True)

    T: float = Field(22.0, gt=0, description="Time horizon in days")
    n_per_day: int = Field(80, ge=1, description="Observations per day")
    substeps: int = Field(10, ge=1, description="Fine-grid refinement factor")

    @model_validator(mode="after")
    def check_horizon(self):
        if self.n_obs < 1:
            raise ValueError("grid must contain at least one observation interval")
        if not math.isclose(self.n_obs * self.delta_n, self.T, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(
                f"T={self.T} is not a whole number of observation intervals of length {self.delta_n}"
            )
        return self

    @property
    def delta_n(self) -> float:
        return 1.0 / self.n_per_day

    @property
    def n_obs(self) -> int:
        return int(round(self.T * self.n_per_day))

    @property
    def fine_step(self) -> float:
        return self.delta_n / self.substeps

    @property
    def n_fine(self) -> int:
        return self.n_obs * self.substeps

    def obs_times(self) -> np.ndarray:
        return np.arange(self.n_obs + 1) / self.n_per_day

    def fine_times(self) -> np.ndarray:
        return np.arange(self.n_fine + 1) / (self.n_per_day * self.substeps)


# Models

class PriceJumps(BaseModel):
    """Compound-Poisson price jumps (compensated)."""
    model_config = ConfigDict(frozen=True)

    rate: float = Field(0.0, ge=0, description="Jump intensity per day")
    size: float = Field(0.05, gt=0, description="Jump magnitude (symmetric) or standard deviation (normal)")
    law: Literal["symmetric", "normal"] = Field("symmetric", description="Jump-size law")

    @property
    def mean_size(self) -> float:
        return 0.0


class CirSpec(BaseModel):
    """Square-root diffusion variance with Brownian price."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["cir"] = "cir"
    kappa: float = Field(0.03, ge=0, description="Mean reversion per day")
    theta: float = Field(1.0, ge=0, description="Long-run variance")
    sigma_v: float = Field(0.2, ge=0, description="Volatility of variance")
    drift_x: float = Field(0.0, description="Price drift per day")
    price_jumps: Optional[PriceJumps] = Field(None, description="Optional compound-Poisson price jumps")

    @property
    def feller_satisfied(self) -> bool:
        return 2.0 * self.kappa * self.theta >= self.sigma_v ** 2


class LevyOuLogVolSpec(BaseModel):
    """Levy OU state Y driving the variance exp(variance_exponent * (Y - 1)).

    The default exponent 2 reads Y - 1 as log-volatility; exponent 1 reads it as
    log-variance, which is the reading the shipped panel C/D configs use.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: Literal["levy_ou_logvol"] = "levy_ou_logvol"
    lam: float = Field(0.03, gt=0, alias="lambda", description="Mean reversion per day")
    gauss_var_marginal: float = Field(1.0, ge=0, description="Gaussian variance of the stationary law")
    jump_scale: float = Field(2.33, ge=0, description="A in the marginal Levy density A e^{-bx} x^{-1-p}")
    jump_tempering: float = Field(2.0, gt=0, description="b in the marginal Levy density")
    jump_index: float = Field(0.5, gt=0, lt=1, description="p in the marginal Levy density")
    eps_cut: float = Field(1e-4, gt=0, description="Small-jump cutoff of the driving process")
    time_scaling: Literal["lambda_t", "t"] = Field(
        "lambda_t", description="Driving process clock: dL_{lambda t} (default) or dL_t"
    )
    variance_exponent: float = Field(
        2.0, gt=0, description="Variance is exp(variance_exponent * (Y - 1)); 2 makes Y - 1 the log-volatility"
    )
    drift_x: float = Field(0.0, description="Price drift per day")
    price_jumps: Optional[PriceJumps] = Field(None, description="Optional compound-Poisson price jumps")


class ConstVolSpec(BaseModel):
    """Constant variance with optional price jumps."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["const_vol"] = "const_vol"
    v: float = Field(1.0, gt=0, description="Variance level")
    drift_x: float = Field(0.0, description="Price drift per day")
    price_jumps: Optional[PriceJumps] = Field(None, description="Optional compound-Poisson price jumps")


ModelSpec = Annotated[Union[CirSpec, LevyOuLogVolSpec, ConstVolSpec], Field(discriminator="kind")]


# Estimation

class BlockSpec(BaseModel):
    """Block geometry: k_n increments per block, block length u_n = k_n * delta_n."""
    model_config = ConfigDict(frozen=True)

    k_n: int = Field(20, ge=2, description="Increments per block")
    gamma_hint: Optional[float] = Field(None, gt=0, lt=1, description="Block exponent used by rate tooling")

    def block_length(self, grid: SamplingGrid) -> float:
        return self.k_n * grid.delta_n

    def n_blocks(self, grid: SamplingGrid) -> int:
        return grid.n_obs // self.k_n


class _ThresholdRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    varpi: float = Field(0.49, gt=0, lt=0.5, description="Threshold exponent")
    log_scaled: bool = Field(False, description="Scale the multiplier by a logarithmic sequence c_n")

    def multiplier_scale(self, delta_n: float) -> float:
        if not self.log_scaled:
            return 1.0
        return 1.0 + 0.1 * math.log(1.0 / delta_n) / math.log(80.0)


class NoTruncation(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["none"] = "none"


class FixedTruncation(_ThresholdRule):
    kind: Literal["fixed"] = "fixed"
    alpha: float = Field(4.0, gt=0, description="Threshold level")


class GlobalBVTruncation(_ThresholdRule):
    kind: Literal["global_bv"] = "global_bv"
    c: float = Field(3.0, gt=0, description="Multiplier on sqrt(mean daily bipower variation)")


class DailyBVTruncation(_ThresholdRule):
    kind: Literal["daily_bv"] = "daily_bv"
    c: float = Field(3.0, gt=0, description="Multiplier on sqrt(daily bipower variation)")


class LocalBipowerTruncation(_ThresholdRule):
    kind: Literal["local_bipower"] = "local_bipower"
    c: float = Field(3.0, gt=0, description="Multiplier on the clamped local bipower volatility")
    clamp_C: float = Field(10.0, ge=1, description="Regularisation constant C")


TruncationSpec = Annotated[
    Union[NoTruncation, FixedTruncation, GlobalBVTruncation, DailyBVTruncation, LocalBipowerTruncation],
    Field(discriminator="kind"),
]


class KernelSpec(BaseModel):
    """Kernel occupation-density settings."""
    model_config = ConfigDict(frozen=True)

    kernel: Literal["gaussian", "epanechnikov_c1"] = Field("gaussian", description="Kernel function")
    bandwidth: Optional[float] = Field(None, gt=0, description="Bandwidth h; default delta_n^{1/(4(2+beta))}")
    beta_hint: float = Field(0.5, gt=0, le=1, description="Holder exponent beta")
    weight: Literal["unit", "gaussian"] = Field("unit", description="Weight function of the L1 norm")
    weight_center: float = Field(1.0, description="Centre of the gaussian weight")
    weight_scale: float = Field(1.0, gt=0, description="Scale of the gaussian weight")
    grid_points: int = Field(200, ge=2, description="Default evaluation grid size")


class RateParams(BaseModel):
    """Exponents and activity indices feeding the rate-bound calculator."""
    model_config = ConfigDict(frozen=True)

    r: float = Field(0.0, ge=0, le=2, description="Price-jump activity bound")
    r_tilde: float = Field(1.0, gt=0, le=2, description="Volatility-jump activity bound")
    gamma: float = Field(0.5, gt=0, lt=1, description="Block exponent: k_n ~ delta_n^{-gamma}")
    varpi: float = Field(0.49, gt=0, lt=0.5, description="Truncation exponent")
    iota: float = Field(0.01, gt=0, description="Slack iota")
    theta: float = Field(0.0, ge=0, description="Slack theta (0 when r <= 1)")
    continuous_x: bool = Field(True, description="Price process without jumps")
    beta: float = Field(0.5, gt=0, le=1, description="Holder exponent for the density rate")
    bandwidth_exponent: Optional[float] = Field(
        None, gt=0, description="h ~ delta_n^{e}; default 1/(4(2+beta))"
    )


# Monte Carlo

class McConfig(BaseModel):
    """Monte Carlo study of the occupation-time quantile estimator."""
    model: ModelSpec = Field(default_factory=CirSpec, description="Price/volatility model")
    grid: SamplingGrid = Field(default_factory=SamplingGrid, description="Sampling grid")
    block: BlockSpec = Field(default_factory=BlockSpec, description="Block geometry")
    trunc: TruncationSpec = Field(default_factory=DailyBVTruncation, description="Truncation rule")
    start_quantile: float = Field(0.5, gt=0, lt=1, description="Start from this invariant quantile")
    alphas: List[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75], description="Quantile fractions of T")
    n_replicas: int = Field(1000, ge=1, description="Monte Carlo replicas")
    base_seed: int = Field(20130601, ge=0, description="Base seed of the replica streams")
    workers: int = Field(1, ge=1, description="Worker processes")
    estimator: EstimatorKind = Field(EstimatorKind.TRUNCATED, description="Truncated or untruncated blocks")

    @field_validator("alphas")
    @classmethod
    def validate_alphas(cls, v):
        if not v:
            raise ValueError("at least one alpha is required")
        for a in v:
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha {a} outside (0, 1)")
        return v


class McRow(BaseModel):
    alpha: float = Field(..., description="Quantile fraction of T")
    true_mean: float = Field(..., description="Mean over replicas of the oracle quantile")
    bias: float = Field(..., description="Mean of estimate minus oracle")
    mad: float = Field(..., description="Mean absolute deviation from the oracle")
    mc_stderr: Optional[float] = Field(..., description="Monte Carlo standard error of the bias; None for a single replica")
    n_replicas: int = Field(..., description="Replicas aggregated")


class McReport(BaseModel):
    run_id: str = Field(..., description="Run identifier")
    kind: Literal["mc"] = "mc"
    config: McConfig = Field(..., description="Configuration echo")
    rows: List[McRow] = Field(default_factory=list, description="One row per alpha")
    elapsed_seconds: float = Field(0.0, ge=0, description="Wall-clock time")
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class EvtConfig(BaseModel):
    """Extreme-value study of the normalised sup-error under constant volatility."""
    model: ConstVolSpec = Field(default_factory=ConstVolSpec, description="Constant-volatility model")
    grid: SamplingGrid = Field(
        default_factory=lambda: SamplingGrid(T=22.0, n_per_day=400, substeps=1), description="Sampling grid"
    )
    k_n: Optional[int] = Field(None, ge=2, description="Block size; default round(delta_n^{-1/2})")
    trunc: TruncationSpec = Field(default_factory=NoTruncation, description="Truncation rule")
    n_replicas: int = Field(1000, ge=1, description="Monte Carlo replicas")
    base_seed: int = Field(20130601, ge=0, description="Base seed of the replica streams")
    workers: int = Field(1, ge=1, description="Worker processes")

    def block_size(self) -> int:
        if self.k_n is not None:
            return self.k_n
        return max(2, int(round(self.grid.delta_n ** -0.5)))


class EvtReplica(BaseModel):
    replica: int
    M_n: float
    normalized: float


class EvtReport(BaseModel):
    run_id: str
    kind: Literal["evt"] = "evt"
    config: EvtConfig
    k_n: int
    b_n: int
    m_n: float
    c_n: float
    ks_distance: float
    ks_pvalue: float
    median_normalized: float
    maxima: List[EvtReplica] = Field(default_factory=list)
    elapsed_seconds: float = 0.0
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class RateStudyConfig(BaseModel):
    """Sup-error decay along a ladder of sampling frequencies."""
    model: ModelSpec = Field(default_factory=CirSpec, description="Continuous-volatility model")
    T: float = Field(22.0, gt=0, description="Time horizon in days")
    ladder: List[int] = Field(default_factory=lambda: [40, 80, 160, 320, 640, 1280], description="n per day")
    substeps: int = Field(10, ge=1, description="Refinement of the finest ladder grid")
    gamma: float = Field(0.5, gt=0, lt=1, description="k_n = round(delta_n^{-gamma})")
    trunc: TruncationSpec = Field(default_factory=NoTruncation, description="Truncation rule")
    start_quantile: float = Field(0.5, gt=0, lt=1, description="Start from this invariant quantile")
    n_replicas: int = Field(200, ge=1, description="Replicas per rung")
    base_seed: int = Field(20130601, ge=0, description="Base seed of the replica streams")
    workers: int = Field(1, ge=1, description="Worker processes")


class RateRow(BaseModel):
    n: int
    delta_n: float
    k_n: int
    mean_eta: float
    stderr: Optional[float] = None


class RateStudyReport(BaseModel):
    run_id: str
    kind: Literal["rates"] = "rates"
    config: RateStudyConfig
    rows: List[RateRow] = Field(default_factory=list)
    slope: float
    intercept: float
    elapsed_seconds: float = 0.0
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


# Request Models

class SimulateRequest(BaseModel):
    """Request model for path simulation."""
    model: ModelSpec = Field(default_factory=CirSpec, description="Model specification")
    grid: SamplingGrid = Field(default_factory=SamplingGrid, description="Sampling grid")
    seed: int = Field(0, ge=0, description="Seed")
    start_quantile: float = Field(0.5, gt=0, lt=1, description="Start from this invariant quantile")


class EstimateRequest(BaseModel):
    """Request model for spot variance and occupation estimation."""
    times: List[float] = Field(..., min_length=3, description="Equispaced observation times (days)")
    prices: List[float] = Field(..., min_length=3, description="Observed (log-)prices")
    k_n: int = Field(20, ge=2, description="Increments per block")
    trunc: TruncationSpec = Field(default_factory=DailyBVTruncation, description="Truncation rule")
    alphas: List[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75], description="Quantile fractions")
    which: EstimatorKind = Field(EstimatorKind.TRUNCATED, description="Estimator used for the curve")

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.times) != len(self.prices):
            raise ValueError("times and prices must have equal length")
        return self


class DensityRequest(EstimateRequest):
    """Request model for the kernel occupation density."""
    kernel: KernelSpec = Field(default_factory=KernelSpec, description="Kernel settings")
    eval_points: Optional[List[float]] = Field(None, description="Evaluation points; default grid if omitted")


class ExportRequest(BaseModel):
    """Request model for report export."""
    format: str = Field(..., pattern="^(csv|json)$", description="Export format")
    path: str = Field(..., description="Output file path")
    run_id: Optional[str] = Field(None, description="Specific run ID to export (all runs if not specified)")


# Response Models

class HealthResponse(BaseModel):
    """Health check response."""
    status: str = Field("ok", description="Service status")
    message: str = Field("", description="Status message")
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class ErrorDetail(BaseModel):
    """Error payload for failed requests."""
    code: ErrorCode = Field(..., description="Error code")
    message: str = Field(..., description="Error message")
    details: Dict[str, Any] = Field(default_factory=dict, description="Additional error details")


class SimulateResponse(BaseModel):
    times: List[float]
    prices: List[float]
    v_min: float
    v_max: float
    v_mean: float
    n_price_jumps: int
    start_level: float


class BlockEstimate(BaseModel):
    block_index: int
    t_start: float
    v_hat_star: float
    v_hat: float
    threshold_used: Optional[float] = Field(None, description="Smallest threshold in the block; None without truncation")


class QuantileEstimate(BaseModel):
    alpha_frac: float
    q_hat: float


class CurvePoint(BaseModel):
    level: float
    cumulative_time: float


class EstimateResponse(BaseModel):
    n_blocks: int
    block_length: float
    blocks: List[BlockEstimate]
    quantiles: List[QuantileEstimate]
    curve: List[CurvePoint]


class DensityPoint(BaseModel):
    x: float
    f_hat: float


class DensityResponse(BaseModel):
    bandwidth: float
    mass: float
    points: List[DensityPoint]


class ExportResponse(BaseModel):
    """Response model for report export."""
    ok: bool = Field(..., description="Export success status")
    path: str = Field(..., description="Output file path")
    format: str = Field(..., description="Export format used")
    records_exported: int = Field(0, description="Number of records exported")


class ReportSummary(BaseModel):
    """Summary information for a stored run."""
    run_id: str = Field(..., description="Run identifier")
    kind: str = Field(..., description="mc, evt or rates")
    created_at: datetime = Field(..., description="Creation time")
    elapsed_seconds: float = Field(0.0, description="Wall-clock time")
    n_replicas: int = Field(0, description="Replicas per configuration")
