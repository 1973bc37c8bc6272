"""volocc command line: simulate | estimate | mc | evt | rates | density | serve."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from pydantic import ValidationError

from .logging_config import configure_logging
from .models.schemas import BlockSpec, EstimatorKind
from .services.density import kernel_density
from .services.harness import run_evt, run_mc, run_rate_study
from .services.occupation import occupation_curve, quantile_table
from .services.sim_models import simulate_model, start_state
from .services.spotvol import spot_variance_blocks
from .utils.config_utils import (
    build_evt_config,
    build_grid,
    build_kernel_spec,
    build_mc_config,
    build_model,
    build_rate_config,
    build_trunc,
    config_echo,
    load_config,
    parse_config_text,
)
from .utils.csv_io import (
    flatten_config,
    read_price_csv,
    write_csv,
    write_evt_report,
    write_mc_report,
    write_rate_report,
)
from .utils.errors import ConfigurationError, InputDataError, VolOccError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _parse_alphas(text: str) -> List[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid alpha list {text!r}") from e


def build_argument_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volocc", description="Volatility occupation time toolkit")
    parser.add_argument("--log-dir", default="./logs", help="Log directory (default ./logs)")
    parser.add_argument("--log-level", default="WARNING", help="Console/file log level")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config: bool = True, seed: bool = True) -> None:
        if config:
            p.add_argument("--config", help="key = value configuration file")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="Base seed (overrides the file)")
            p.add_argument("--workers", type=int, default=None, help="Worker processes (overrides the file)")
        p.add_argument("--out", default="results", help="Output directory")

    p = sub.add_parser("simulate", help="Simulate one price path and its variance")
    common(p)

    for name, help_text in (("estimate", "Spot variance, occupation curve and quantiles"), ("density", "Kernel occupation density")):
        p = sub.add_parser(name, help=help_text)
        common(p, seed=False)
        p.add_argument("--input", required=True, help="Price CSV with header time,price")
        p.add_argument("--kn", type=int, default=None, help="Increments per block")
        p.add_argument("--trunc", default=None, help="none | fixed | global-bv | daily-bv | local-bipower")
        p.add_argument("--which", choices=[k.value for k in EstimatorKind], default=EstimatorKind.TRUNCATED.value)
        if name == "estimate":
            p.add_argument("--alphas", type=_parse_alphas, default=[0.25, 0.5, 0.75], help="Quantile fractions of T")
        else:
            p.add_argument("--kernel", default=None, help="gaussian | epanechnikov_c1")
            p.add_argument("--bandwidth", type=float, default=None, help="Bandwidth h")
            p.add_argument("--grid-points", type=int, default=None, help="Evaluation grid size")

    for name, help_text in (
        ("mc", "Quantile bias/MAD Monte Carlo"),
        ("evt", "Extreme-value test under constant volatility"),
        ("rates", "Sup-error rate study"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--replicas", type=int, default=None, help="Replica count (overrides the file)")

    p = sub.add_parser("serve", help="Run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _values(args) -> Dict:
    return load_config(args.config) if getattr(args, "config", None) else parse_config_text("")


def _config_header(args, values) -> Dict[str, str]:
    """Echo of the configuration file, if one was given, for output headers."""
    if not getattr(args, "config", None):
        return {}
    return {"config": Path(args.config).name, **{f"config.{k}": v for k, v in config_echo(values).items()}}


def _overrides(args) -> Dict:
    return {
        "base_seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "n_replicas": getattr(args, "replicas", None),
    }


def cmd_simulate(args) -> None:
    values = _values(args)
    model, grid = build_model(values), build_grid(values)
    seed = args.seed if args.seed is not None else int(values.get("mc.seed", 20130601))
    p0 = float(values.get("mc.start_quantile", 0.5))
    path = simulate_model(model, grid, seed, start=start_state(model, p0))
    header = {
        **_config_header(args, values),
        **flatten_config(model, "model"),
        **flatten_config(grid, "grid"),
        "seed": str(seed),
        "p0": str(p0),
    }
    out = Path(args.out)
    write_csv(path.price_frame(), out / "prices.csv", header)
    write_csv(path.variance_frame(), out / "variance.csv", header)
    print(f"simulated {grid.n_obs} increments ({path.n_price_jumps} price jumps) -> {out}")


def _estimate_inputs(args):
    values = _values(args)
    grid, prices = read_price_csv(args.input)
    if args.trunc is not None:
        values = {k: v for k, v in values.items() if not k.startswith("trunc.")} | {"trunc.kind": args.trunc}
    trunc = build_trunc(values)
    k_n = args.kn if args.kn is not None else int(values.get("block.k_n", 20))
    block = BlockSpec(k_n=k_n)
    series = spot_variance_blocks(prices, grid, block, trunc)
    header = {
        **_config_header(args, values),
        "input": Path(args.input).name,
        "n": str(grid.n_per_day),
        "T": str(grid.T),
        "k_n": str(k_n),
        **flatten_config(trunc, "trunc"),
        "which": args.which,
    }
    return values, series, header


def cmd_estimate(args) -> None:
    _, series, header = _estimate_inputs(args)
    curve = occupation_curve(series, args.which)
    out = Path(args.out)
    write_csv(series.to_frame(), out / "spotvol.csv", header)
    write_csv(curve.to_frame(), out / "occupation.csv", header)
    write_csv(quantile_table(curve, args.alphas), out / "quantiles.csv", header)
    print(f"{series.n_blocks} blocks -> {out}")


def cmd_density(args) -> None:
    values, series, header = _estimate_inputs(args)
    spec = build_kernel_spec(
        values, {"kernel": args.kernel, "bandwidth": args.bandwidth, "grid_points": args.grid_points}
    )
    estimate = kernel_density(series, spec, which=args.which)
    header.update(flatten_config(spec, "density"))
    header["density.bandwidth_used"] = "%.12g" % estimate.density.bandwidth
    write_csv(estimate.to_frame(), Path(args.out) / "density.csv", header)
    print(f"density on {estimate.x.size} points (h={estimate.density.bandwidth:.4g}) -> {args.out}")


def cmd_mc(args) -> None:
    report = run_mc(build_mc_config(_values(args), _overrides(args)))
    path = write_mc_report(report, args.out)
    for row in report.rows:
        se = "n/a" if row.mc_stderr is None else f"{row.mc_stderr:.4f}"
        print(f"alpha={row.alpha:.2f} true={row.true_mean:.4f} bias={row.bias:.4f} mad={row.mad:.4f} se={se}")
    print(f"-> {path}")


def cmd_evt(args) -> None:
    report = run_evt(build_evt_config(_values(args), _overrides(args)))
    path = write_evt_report(report, args.out)
    print(f"b_n={report.b_n} k_n={report.k_n} KS={report.ks_distance:.4f} (p={report.ks_pvalue:.3g}) median={report.median_normalized:.4f}")
    print(f"-> {path}")


def cmd_rates(args) -> None:
    report = run_rate_study(build_rate_config(_values(args), _overrides(args)))
    path = write_rate_report(report, args.out)
    for row in report.rows:
        print(f"n={row.n} k_n={row.k_n} mean_eta={row.mean_eta:.4f}")
    print(f"slope={report.slope:.4f} -> {path}")


def cmd_serve(args) -> None:
    import uvicorn

    uvicorn.run("volocc_api.main:app", host=args.host, port=args.port)


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "density": cmd_density,
    "mc": cmd_mc,
    "evt": cmd_evt,
    "rates": cmd_rates,
    "serve": cmd_serve,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_argument_parser().parse_args(argv)
    configure_logging(args.log_dir, args.log_level)
    try:
        COMMANDS[args.command](args)
    except (ConfigurationError, InputDataError) as e:
        print(f"error: [{e.code.value}] {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as e:
        print(f"error: [CONFIG_ERROR] {e.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_CONFIG
    except VolOccError as e:
        logger.error(f"{args.command} failed: {e.message} {e.details}")
        print(f"error: [{e.code.value}] {e.message}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"{args.command} failed")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
