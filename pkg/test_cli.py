"""End-to-end runs of the volocc command line."""

import pandas as pd
import pytest

from volocc_api.cli import EXIT_CONFIG, EXIT_OK, cli_main

SMALL = """
model.kind = cir
grid.T = 4
grid.n = 80
grid.substeps = 2
block.k_n = 20
mc.seed = 3
"""


@pytest.fixture
def run(tmp_path):
    def _run(*argv):
        return cli_main(["--log-dir", str(tmp_path / "logs"), *argv])

    return _run


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL, encoding="utf-8")
    return path


def header_lines(path):
    return [line for line in path.read_text(encoding="utf-8").splitlines() if line.startswith("# ")]


def test_simulate_writes_prices_and_variance(run, small_cfg, tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--config", str(small_cfg), "--out", str(out)) == EXIT_OK
    prices = pd.read_csv(out / "prices.csv", comment="#")
    variance = pd.read_csv(out / "variance.csv", comment="#")
    assert list(prices.columns) == ["time", "price"]
    assert len(prices) == 321
    assert list(variance.columns) == ["time", "v_true"]
    assert len(variance) == 641
    assert "# seed=3" in header_lines(out / "prices.csv")


def test_output_headers_echo_the_config_file(run, small_cfg, tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--config", str(small_cfg), "--out", str(out)) == EXIT_OK
    lines = header_lines(out / "variance.csv")
    assert "# config=small.cfg" in lines
    assert "# config.grid.n=80" in lines
    assert "# config.mc.seed=3" in lines

    est = tmp_path / "est"
    args = ["estimate", "--input", str(out / "prices.csv"), "--kn", "16", "--out", str(est)]
    assert run(*args) == EXIT_OK
    assert not any(line.startswith("# config") for line in header_lines(est / "spotvol.csv"))
    assert run(*args, "--config", str(small_cfg)) == EXIT_OK
    assert "# config.block.k_n=20" in header_lines(est / "spotvol.csv")


def test_simulate_is_reproducible(run, small_cfg, tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--config", str(small_cfg), "--seed", "9", "--out", str(tmp_path / name)) == EXIT_OK
    assert (tmp_path / "a" / "prices.csv").read_bytes() == (tmp_path / "b" / "prices.csv").read_bytes()


def test_estimate_and_density_read_simulated_prices(run, small_cfg, tmp_path):
    sim = tmp_path / "sim"
    assert run("simulate", "--config", str(small_cfg), "--out", str(sim)) == EXIT_OK
    prices = str(sim / "prices.csv")

    est = tmp_path / "est"
    assert run("estimate", "--input", prices, "--kn", "16", "--trunc", "daily-bv", "--alphas", "0.2,0.8", "--out", str(est)) == EXIT_OK
    spot = pd.read_csv(est / "spotvol.csv", comment="#")
    assert len(spot) == 20
    quantiles = pd.read_csv(est / "quantiles.csv", comment="#")
    assert quantiles["alpha_frac"].tolist() == [0.2, 0.8]
    assert quantiles["q_hat"].iloc[0] <= quantiles["q_hat"].iloc[1]
    assert "# trunc.kind=daily_bv" in header_lines(est / "spotvol.csv")
    assert pd.read_csv(est / "occupation.csv", comment="#")["cumulative_time"].iloc[-1] == pytest.approx(4.0)

    dens = tmp_path / "dens"
    assert run("density", "--input", prices, "--bandwidth", "0.2", "--grid-points", "31", "--out", str(dens)) == EXIT_OK
    frame = pd.read_csv(dens / "density.csv", comment="#")
    assert len(frame) == 31
    assert (frame["f_hat"] >= 0).all()
    assert "# density.bandwidth_used=0.2" in header_lines(dens / "density.csv")


def test_bad_inputs_exit_with_config_code(run, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.T = 4\nmodel.rho = 1\n", encoding="utf-8")
    assert run("simulate", "--config", str(bad), "--out", str(tmp_path / "x")) == EXIT_CONFIG
    assert "CONFIG_ERROR" in capsys.readouterr().err

    missing = tmp_path / "missing.csv"
    assert run("estimate", "--input", str(missing), "--out", str(tmp_path / "y")) == EXIT_CONFIG

    garbled = tmp_path / "garbled.csv"
    garbled.write_text("t,x\n0,1\n1,2\n2,3\n", encoding="utf-8")
    assert run("estimate", "--input", str(garbled), "--out", str(tmp_path / "z")) == EXIT_CONFIG


def test_mc_command(run, small_cfg, tmp_path):
    out = tmp_path / "mc"
    assert run("mc", "--config", str(small_cfg), "--replicas", "3", "--out", str(out)) == EXIT_OK
    report = pd.read_csv(out / "mc_report.csv", comment="#")
    assert report["alpha"].tolist() == [0.25, 0.5, 0.75]
    assert (report["replicas"] == 3).all()
    assert (report["seed"] == 3).all()


def test_evt_command(run, tmp_path):
    out = tmp_path / "evt"
    assert run("evt", "--replicas", "3", "--seed", "1", "--out", str(out)) == EXIT_OK
    frame = pd.read_csv(out / "evt.csv", comment="#")
    assert frame["replica"].tolist() == [0, 1, 2]
    assert "# b_n=440" in header_lines(out / "evt.csv")


def test_rates_command(run, tmp_path):
    cfg = tmp_path / "rates.cfg"
    cfg.write_text("grid.T = 4\ngrid.substeps = 2\nrates.ladder = 40, 80, 160\n", encoding="utf-8")
    out = tmp_path / "rates"
    assert run("rates", "--config", str(cfg), "--replicas", "3", "--out", str(out)) == EXIT_OK
    frame = pd.read_csv(out / "rates.csv", comment="#", dtype={"n": str})
    assert frame["n"].tolist() == ["40", "80", "160", "slope"]
