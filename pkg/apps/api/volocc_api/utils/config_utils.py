"""Flat key = value experiment configuration.

One key per line, `#` starts a comment, dotted prefixes select the section.
Every accepted key is listed in CONFIG_KEYS; anything else is rejected.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, TypeVar, Union

from pydantic import BaseModel, TypeAdapter, ValidationError

from ..models.schemas import (
    BlockSpec,
    CirSpec,
    ConstVolSpec,
    DailyBVTruncation,
    EvtConfig,
    FixedTruncation,
    GlobalBVTruncation,
    KernelSpec,
    LevyOuLogVolSpec,
    LocalBipowerTruncation,
    McConfig,
    ModelSpec,
    NoTruncation,
    PriceJumps,
    RateStudyConfig,
    SamplingGrid,
    TruncationSpec,
)
from .errors import ConfigurationError

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)

# key -> (section, field)
CONFIG_KEYS: Dict[str, tuple] = {
    "model.kind": ("model", "kind"),
    "model.kappa": ("model", "kappa"),
    "model.theta": ("model", "theta"),
    "model.sigma_v": ("model", "sigma_v"),
    "model.lambda": ("model", "lambda"),
    "model.gauss_var": ("model", "gauss_var_marginal"),
    "model.jump_scale": ("model", "jump_scale"),
    "model.jump_tempering": ("model", "jump_tempering"),
    "model.jump_index": ("model", "jump_index"),
    "model.eps_cut": ("model", "eps_cut"),
    "model.time_scaling": ("model", "time_scaling"),
    "model.variance_exponent": ("model", "variance_exponent"),
    "model.v": ("model", "v"),
    "model.drift_x": ("model", "drift_x"),
    "model.jumps.rate": ("jumps", "rate"),
    "model.jumps.size": ("jumps", "size"),
    "model.jumps.law": ("jumps", "law"),
    "grid.T": ("grid", "T"),
    "grid.n": ("grid", "n_per_day"),
    "grid.substeps": ("grid", "substeps"),
    "block.k_n": ("block", "k_n"),
    "block.gamma": ("block", "gamma_hint"),
    "trunc.kind": ("trunc", "kind"),
    "trunc.alpha": ("trunc", "alpha"),
    "trunc.c": ("trunc", "c"),
    "trunc.varpi": ("trunc", "varpi"),
    "trunc.clamp_C": ("trunc", "clamp_C"),
    "trunc.log_scaled": ("trunc", "log_scaled"),
    "mc.start_quantile": ("mc", "start_quantile"),
    "mc.alphas": ("mc", "alphas"),
    "mc.replicas": ("mc", "n_replicas"),
    "mc.seed": ("mc", "base_seed"),
    "mc.workers": ("mc", "workers"),
    "mc.estimator": ("mc", "estimator"),
    "evt.k_n": ("evt", "k_n"),
    "rates.ladder": ("rates", "ladder"),
    "rates.gamma": ("rates", "gamma"),
    "density.kernel": ("density", "kernel"),
    "density.bandwidth": ("density", "bandwidth"),
    "density.beta": ("density", "beta_hint"),
    "density.weight": ("density", "weight"),
    "density.weight_center": ("density", "weight_center"),
    "density.weight_scale": ("density", "weight_scale"),
    "density.grid_points": ("density", "grid_points"),
}

LIST_KEYS = {"mc.alphas", "rates.ladder"}

_MODEL_CLASSES = {"cir": CirSpec, "levy_ou_logvol": LevyOuLogVolSpec, "const_vol": ConstVolSpec}
_TRUNC_CLASSES = {
    cls.model_fields["kind"].default: cls
    for cls in (NoTruncation, FixedTruncation, GlobalBVTruncation, DailyBVTruncation, LocalBipowerTruncation)
}

ConfigValues = Dict[str, Any]


def normalize_kind(value: str) -> str:
    """CLI spellings such as daily-bv map to daily_bv."""
    return value.strip().lower().replace("-", "_")


def parse_config_text(text: str, source: str = "<config>") -> ConfigValues:
    values: ConfigValues = {}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            unknown.append(key)
            continue
        if key in values:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key}")
        if key in LIST_KEYS:
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            values[key] = value
    if unknown:
        raise ConfigurationError(
            f"{source}: unknown configuration keys: {', '.join(unknown)}", details={"unknown_keys": unknown}
        )
    return values


def load_config(path: Union[str, Path]) -> ConfigValues:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file not found: {path}")
    values = parse_config_text(path.read_text(encoding="utf-8"), source=str(path))
    logger.info(f"Loaded {len(values)} configuration keys from {path}")
    return values


def _section(values: Mapping[str, Any], name: str) -> Dict[str, Any]:
    return {field: values[key] for key, (section, field) in CONFIG_KEYS.items() if section == name and key in values}


def _validated(cls: Type[M], data: Dict[str, Any], what: str) -> M:
    try:
        return cls.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid {what} configuration: {e.errors()[0]['msg']}", details={"errors": str(e)}) from e


def build_model(values: Mapping[str, Any]) -> ModelSpec:
    data = _section(values, "model")
    kind = normalize_kind(data.pop("kind", "cir"))
    cls = _MODEL_CLASSES.get(kind)
    if cls is None:
        raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {sorted(_MODEL_CLASSES)}")
    accepted = {f.alias or name for name, f in cls.model_fields.items()}
    stray = [f"model.{k}" for k in data if k not in accepted]
    if stray:
        raise ConfigurationError(f"keys {', '.join(stray)} do not apply to model kind {kind}")
    jumps = _section(values, "jumps")
    if jumps:
        data["price_jumps"] = _validated(PriceJumps, jumps, "price jump")
    data["kind"] = kind
    return _validated(cls, data, "model")


def build_grid(values: Mapping[str, Any], default: Optional[SamplingGrid] = None) -> SamplingGrid:
    base = (default or SamplingGrid()).model_dump()
    base.update(_section(values, "grid"))
    return _validated(SamplingGrid, base, "grid")


def build_trunc(values: Mapping[str, Any], default_kind: str = "daily_bv") -> TruncationSpec:
    data = _section(values, "trunc")
    kind = normalize_kind(data.pop("kind", default_kind))
    cls = _TRUNC_CLASSES.get(kind)
    if cls is None:
        raise ConfigurationError(f"unknown truncation kind {kind!r}; expected one of {sorted(_TRUNC_CLASSES)}")
    stray = [f"trunc.{k}" for k in data if k not in cls.model_fields]
    if stray:
        raise ConfigurationError(
            f"keys {', '.join(stray)} do not apply to truncation kind {kind}", details={"stray_keys": stray}
        )
    data["kind"] = kind
    try:
        return TypeAdapter(TruncationSpec).validate_python(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid truncation configuration: {e.errors()[0]['msg']}") from e


def _apply_overrides(data: Dict[str, Any], overrides: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return data


def build_mc_config(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> McConfig:
    """McConfig from file values; non-None overrides (seed, workers) win over the file."""
    data = _section(values, "mc")
    data["model"] = build_model(values)
    data["grid"] = build_grid(values)
    data["block"] = _validated(BlockSpec, _section(values, "block"), "block")
    data["trunc"] = build_trunc(values)
    return _validated(McConfig, _apply_overrides(data, overrides), "mc")


def build_evt_config(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> EvtConfig:
    model = build_model({"model.kind": "const_vol", **values})
    if not isinstance(model, ConstVolSpec):
        raise ConfigurationError(f"evt needs model.kind = const_vol, got {model.kind}")
    mc = _section(values, "mc")
    data = {key: mc[key] for key in ("n_replicas", "base_seed", "workers") if key in mc}
    data.update(_section(values, "evt"))
    data["model"] = model
    data["grid"] = build_grid(values, SamplingGrid(T=22.0, n_per_day=400, substeps=1))
    data["trunc"] = build_trunc(values, default_kind="none")
    return _validated(EvtConfig, _apply_overrides(data, overrides), "evt")


def build_rate_config(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> RateStudyConfig:
    mc = _section(values, "mc")
    data = {key: mc[key] for key in ("n_replicas", "base_seed", "workers", "start_quantile") if key in mc}
    data.update(_section(values, "rates"))
    grid = _section(values, "grid")
    if "n_per_day" in grid:
        raise ConfigurationError("rate study takes its frequencies from rates.ladder, not grid.n")
    data.update(grid)
    data["model"] = build_model(values)
    data["trunc"] = build_trunc(values, default_kind="none")
    return _validated(RateStudyConfig, _apply_overrides(data, overrides), "rates")


def build_kernel_spec(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> KernelSpec:
    return _validated(KernelSpec, _apply_overrides(_section(values, "density"), overrides), "density")


def config_echo(values: Mapping[str, Any]) -> Dict[str, str]:
    """Sorted flat view used for output-file headers."""
    return {key: ",".join(v) if isinstance(v, list) else str(v) for key, v in sorted(values.items())}
