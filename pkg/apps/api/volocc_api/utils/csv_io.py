import logging
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..models.schemas import EvtReport, McReport, RateStudyReport, SamplingGrid
from .errors import InputDataError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.12g"


def flatten_config(model: BaseModel, prefix: str = "") -> Dict[str, str]:
    """Dotted key -> value view of a pydantic config, for file headers."""
    flat: Dict[str, str] = {}

    def walk(value: Any, key: str) -> None:
        if isinstance(value, dict):
            for k in sorted(value):
                walk(value[k], f"{key}.{k}" if key else k)
        elif isinstance(value, list):
            flat[key] = ",".join(str(v) for v in value)
        elif value is not None:
            flat[key] = str(value)

    walk(model.model_dump(mode="json"), prefix)
    return flat


def write_csv(frame: pd.DataFrame, path: PathLike, header: Optional[Mapping[str, str]] = None) -> Path:
    """CSV with `# key=value` header lines; no timestamps, so output is reproducible."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        for key, value in (header or {}).items():
            f.write(f"# {key}={value}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def grid_from_times(times: Sequence[float]) -> Tuple[SamplingGrid, float]:
    """Observation grid implied by equispaced times; returns the grid and the start time."""
    t = np.asarray(times, dtype=float)
    if t.size < 3:
        raise InputDataError(f"need at least 3 observations, got {t.size}")
    if not np.all(np.isfinite(t)):
        raise InputDataError("times contain non-finite values")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise InputDataError("times must be strictly increasing")
    step = float(dt.mean())
    if not np.allclose(dt, step, rtol=1e-6, atol=1e-12):
        raise InputDataError("times must be equispaced")
    n_per_day = int(round(1.0 / step))
    if n_per_day < 1 or not math.isclose(n_per_day * step, 1.0, rel_tol=1e-6):
        raise InputDataError(f"observation spacing {step:.6g} is not 1/n of a day")
    n_obs = t.size - 1
    return SamplingGrid(T=n_obs / n_per_day, n_per_day=n_per_day, substeps=1), float(t[0])


def read_price_csv(path: PathLike) -> Tuple[SamplingGrid, np.ndarray]:
    """Read a `time,price` CSV of equispaced log-prices (times in days)."""
    path = Path(path)
    if not path.is_file():
        raise InputDataError(f"price file not found: {path}")
    try:
        frame = pd.read_csv(path, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputDataError(f"cannot parse {path}: {e}") from e
    if list(frame.columns) != ["time", "price"]:
        raise InputDataError(f"{path}: expected header 'time,price', got {','.join(map(str, frame.columns))}")
    try:
        times = frame["time"].to_numpy(dtype=float)
        prices = frame["price"].to_numpy(dtype=float)
    except ValueError as e:
        raise InputDataError(f"{path}: non-numeric values: {e}") from e
    if not np.all(np.isfinite(prices)):
        raise InputDataError(f"{path}: prices contain missing or non-finite values")
    grid, _ = grid_from_times(times)
    logger.info(f"Read {prices.size} prices from {path}: T={grid.T} n={grid.n_per_day}")
    return grid, prices


def write_mc_report(report: McReport, out_dir: PathLike) -> Path:
    cfg = report.config
    frame = pd.DataFrame(
        [
            {
                "model": cfg.model.kind,
                "n": cfg.grid.n_per_day,
                "k_n": cfg.block.k_n,
                "p0": cfg.start_quantile,
                "alpha": row.alpha,
                "true_mean": row.true_mean,
                "bias": row.bias,
                "mad": row.mad,
                "stderr": row.mc_stderr,
                "replicas": row.n_replicas,
                "seed": cfg.base_seed,
            }
            for row in report.rows
        ]
    )
    header = {k: v for k, v in flatten_config(cfg).items() if k != "workers"}
    return write_csv(frame, Path(out_dir) / "mc_report.csv", header)


def write_evt_report(report: EvtReport, out_dir: PathLike) -> Path:
    frame = pd.DataFrame(
        {
            "replica": [m.replica for m in report.maxima],
            "M_n": [m.M_n for m in report.maxima],
            "normalized": [m.normalized for m in report.maxima],
        }
    )
    header = {k: v for k, v in flatten_config(report.config).items() if k != "workers"}
    header.update(
        {
            "k_n": str(report.k_n),
            "b_n": str(report.b_n),
            "m_n": FLOAT_FORMAT % report.m_n,
            "c_n": FLOAT_FORMAT % report.c_n,
            "ks_distance": FLOAT_FORMAT % report.ks_distance,
            "ks_pvalue": FLOAT_FORMAT % report.ks_pvalue,
        }
    )
    return write_csv(frame, Path(out_dir) / "evt.csv", header)


def write_rate_report(report: RateStudyReport, out_dir: PathLike) -> Path:
    rows = [
        {"n": str(r.n), "delta_n": r.delta_n, "k_n": str(r.k_n), "mean_eta": r.mean_eta, "stderr": r.stderr}
        for r in report.rows
    ]
    rows.append({"n": "slope", "delta_n": np.nan, "k_n": "", "mean_eta": report.slope, "stderr": np.nan})
    header = {k: v for k, v in flatten_config(report.config).items() if k != "workers"}
    header["intercept"] = FLOAT_FORMAT % report.intercept
    return write_csv(pd.DataFrame(rows), Path(out_dir) / "rates.csv", header)
