"""Flat key = value configuration parsing and the config builders."""

from pathlib import Path

import pytest

from volocc_api.models.schemas import (
    CirSpec,
    ConstVolSpec,
    DailyBVTruncation,
    FixedTruncation,
    GlobalBVTruncation,
    LevyOuLogVolSpec,
    NoTruncation,
)
from volocc_api.utils.config_utils import (
    build_evt_config,
    build_grid,
    build_kernel_spec,
    build_mc_config,
    build_model,
    build_rate_config,
    build_trunc,
    config_echo,
    load_config,
    normalize_kind,
    parse_config_text,
)
from volocc_api.utils.errors import ConfigurationError

CONFIG_DIR = Path(__file__).parent / "configs"

PANEL = """
# panel A
model.kind = cir
model.kappa = 0.03
grid.T = 22
grid.n = 80   # five-minute sampling
block.k_n = 20
trunc.kind = daily-bv
mc.alphas = 0.25, 0.5 ,0.75
mc.replicas = 50
mc.seed = 7
"""


def test_parse_strips_comments_and_splits_lists():
    values = parse_config_text(PANEL)
    assert values["grid.n"] == "80"
    assert values["mc.alphas"] == ["0.25", "0.5", "0.75"]
    assert "model.kind" in values


def test_parse_collects_unknown_keys():
    with pytest.raises(ConfigurationError) as exc:
        parse_config_text("grid.T = 22\nmodel.rho = 0.1\nfoo = 1\n")
    assert exc.value.details["unknown_keys"] == ["model.rho", "foo"]


def test_parse_rejects_duplicates_and_missing_equals():
    with pytest.raises(ConfigurationError, match=":2: duplicate key grid.T"):
        parse_config_text("grid.T = 22\ngrid.T = 10\n")
    with pytest.raises(ConfigurationError, match="cfg:3"):
        parse_config_text("grid.T = 22\n\ngrid.n\n", source="cfg")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.cfg")


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "panel.cfg"
    path.write_text(PANEL, encoding="utf-8")
    assert load_config(path) == parse_config_text(PANEL)


def test_normalize_kind():
    assert normalize_kind(" Daily-BV ") == "daily_bv"
    assert normalize_kind("levy-ou-logvol") == "levy_ou_logvol"


def test_build_model_kinds():
    assert build_model({}) == CirSpec()
    levy = build_model({"model.kind": "levy-ou-logvol", "model.lambda": "0.5", "model.eps_cut": "1e-3"})
    assert isinstance(levy, LevyOuLogVolSpec)
    assert levy.lam == 0.5
    assert levy.eps_cut == 1e-3
    const = build_model({"model.kind": "const_vol", "model.v": "2", "model.jumps.rate": "1", "model.jumps.size": "0.5"})
    assert isinstance(const, ConstVolSpec)
    assert const.price_jumps.rate == 1.0
    assert const.price_jumps.size == 0.5


def test_build_model_rejects_stray_and_unknown_kind():
    with pytest.raises(ConfigurationError, match="model.kappa"):
        build_model({"model.kind": "const_vol", "model.kappa": "0.1"})
    with pytest.raises(ConfigurationError, match="unknown model kind"):
        build_model({"model.kind": "heston"})
    with pytest.raises(ConfigurationError, match="invalid model"):
        build_model({"model.kind": "cir", "model.kappa": "-1"})


def test_build_grid_and_trunc():
    grid = build_grid({"grid.T": "4", "grid.n": "40"})
    assert (grid.T, grid.n_per_day, grid.substeps) == (4.0, 40, 10)
    assert build_trunc({}) == DailyBVTruncation()
    assert build_trunc({}, default_kind="none") == NoTruncation()
    assert build_trunc({"trunc.kind": "global-bv", "trunc.c": "2"}) == GlobalBVTruncation(c=2.0)
    with pytest.raises(ConfigurationError):
        build_trunc({"trunc.kind": "median"})


def test_build_trunc_rejects_keys_of_other_rules():
    with pytest.raises(ConfigurationError, match="trunc.c"):
        build_trunc({"trunc.kind": "none", "trunc.c": "99"})
    with pytest.raises(ConfigurationError, match="trunc.clamp_C"):
        build_trunc({"trunc.kind": "daily_bv", "trunc.clamp_C": "5"})
    with pytest.raises(ConfigurationError, match="trunc.alpha"):
        build_trunc({"trunc.kind": "global_bv", "trunc.alpha": "2"})
    assert build_trunc({"trunc.kind": "fixed", "trunc.alpha": "2", "trunc.varpi": "0.4"}) == FixedTruncation(
        alpha=2.0, varpi=0.4
    )


def test_build_mc_config_with_overrides():
    values = parse_config_text(PANEL)
    config = build_mc_config(values, {"base_seed": 99, "workers": None})
    assert config.alphas == [0.25, 0.5, 0.75]
    assert config.n_replicas == 50
    assert config.base_seed == 99
    assert config.workers == 1
    assert config.trunc == DailyBVTruncation()
    with pytest.raises(ConfigurationError):
        build_mc_config({"mc.alphas": ["0.5", "1.5"]})


def test_build_evt_config_defaults():
    config = build_evt_config({"mc.replicas": "10"})
    assert isinstance(config.model, ConstVolSpec)
    assert config.grid.n_per_day == 400
    assert config.trunc == NoTruncation()
    assert config.block_size() == 20
    assert config.n_replicas == 10
    with pytest.raises(ConfigurationError, match="const_vol"):
        build_evt_config({"model.kind": "cir"})


def test_build_rate_config():
    config = build_rate_config({"rates.ladder": ["40", "80", "160"], "grid.T": "4", "mc.replicas": "3"})
    assert config.ladder == [40, 80, 160]
    assert config.T == 4.0
    assert config.n_replicas == 3
    with pytest.raises(ConfigurationError, match="rates.ladder"):
        build_rate_config({"grid.n": "80"})


def test_build_kernel_spec_and_echo():
    spec = build_kernel_spec({"density.kernel": "epanechnikov_c1"}, {"bandwidth": 0.2})
    assert spec.kernel == "epanechnikov_c1"
    assert spec.bandwidth == 0.2
    echo = config_echo(parse_config_text(PANEL))
    assert list(echo) == sorted(echo)
    assert echo["mc.alphas"] == "0.25,0.5,0.75"


@pytest.mark.parametrize("name", ["panelA", "panelB", "panelC", "panelD"])
def test_shipped_panel_configs_build(name):
    config = build_mc_config(load_config(CONFIG_DIR / f"{name}.cfg"))
    assert config.n_replicas == 1000
    assert config.start_quantile == 0.25
    assert config.grid.T == 22.0


def test_shipped_evt_and_rate_configs_build():
    assert build_evt_config(load_config(CONFIG_DIR / "evt.cfg")).block_size() == 20
    assert build_rate_config(load_config(CONFIG_DIR / "rates.cfg")).ladder == [40, 80, 160, 320, 640, 1280]
