"""Occupation-time curves built from block spot-variance estimates."""

import numpy as np
import pytest

from volocc_api.models.schemas import BlockSpec, CirSpec, EstimatorKind, NoTruncation, SamplingGrid
from volocc_api.services.occupation import (
    OccupationCurve,
    block_weights,
    occupation_curve,
    quantile_table,
    sup_error,
)
from volocc_api.services.oracle import discretization_slack, oracle_occupation, oracle_quantile
from volocc_api.services.sim_models import simulate_model
from volocc_api.services.spotvol import SpotVolSeries, spot_variance_blocks
from volocc_api.utils.errors import ConfigurationError


def make_series(values, T, n_per_day=2, k_n=2, substeps=1):
    values = np.asarray(values, dtype=float)
    grid = SamplingGrid(T=T, n_per_day=n_per_day, substeps=substeps)
    block = BlockSpec(k_n=k_n)
    u_n = block.block_length(grid)
    return SpotVolSeries(
        block_spec=block,
        grid=grid,
        v_hat_star=values,
        v_hat=values,
        block_start_times=np.arange(values.size) * u_n,
        thresholds=np.full(grid.n_obs, np.inf),
    )


def test_evaluate_direct_counting():
    curve = occupation_curve(make_series([0.5, 1.5], T=2.0))
    assert curve.evaluate(1.0) == 1.0
    assert curve.evaluate(2.0) == 2.0
    assert curve.evaluate(0.1) == 0.0
    assert curve.evaluate(1.5) == 2.0
    assert curve.evaluate(0.5) == 1.0
    assert np.array_equal(curve.evaluate(np.array([0.0, 0.5, 1.49])), [0.0, 1.0, 1.0])


def test_tail_carries_last_block():
    series = make_series([0.5, 1.5], T=2.5)
    assert series.n_blocks == 2
    assert np.allclose(block_weights(series), [1.0, 1.5])
    curve = occupation_curve(series)
    assert curve.evaluate(1.0) == 1.0
    assert curve.evaluate(1.5) == 2.5


def test_quantile_examples():
    curve = occupation_curve(make_series([0.5, 1.5], T=2.0))
    assert curve.quantile_time(1.0) == 0.5
    assert curve.quantile_time(1.5) == 1.5
    assert curve.quantile_time(2.0) == 1.5
    assert curve.quantile(0.5) == 0.5
    assert curve.quantile(1.0) == 1.5


def test_quantile_rejects_out_of_range():
    curve = occupation_curve(make_series([0.5, 1.5], T=2.0))
    for bad in (0.0, -0.1, 1.2):
        with pytest.raises(ConfigurationError):
            curve.quantile(bad)
    with pytest.raises(ConfigurationError):
        curve.quantile_time(2.5)


def test_ties_merge_into_one_level():
    curve = occupation_curve(make_series([1.0, 0.5, 1.0, 0.5], T=4.0))
    assert np.array_equal(curve.levels, [0.5, 1.0])
    assert np.array_equal(curve.weights, [2.0, 2.0])
    assert curve.quantile(0.5) == 0.5
    assert curve.quantile(0.51) == 1.0


def test_integrate_against_examples():
    curve = occupation_curve(make_series([0.5, 1.5], T=2.0))
    assert curve.integrate_against(lambda x: 1.0) == 2.0
    assert curve.integrate_against(lambda x: x) == 2.0
    assert curve.integrate_against(lambda x: float(x <= 1.0)) == curve.evaluate(1.0)


def test_curve_validation():
    with pytest.raises(ConfigurationError):
        OccupationCurve(levels=np.array([1.0, 0.5]), weights=np.array([1.0, 1.0]), total_time=2.0)
    with pytest.raises(ConfigurationError):
        OccupationCurve(levels=np.array([0.5, 1.0]), weights=np.array([1.0, 0.0]), total_time=1.0)
    with pytest.raises(ConfigurationError):
        OccupationCurve(levels=np.array([]), weights=np.array([]), total_time=1.0)


def test_mass_conservation_and_frames():
    rng = np.random.default_rng(0)
    series = make_series(rng.gamma(2.0, size=58), T=22.0, n_per_day=80, k_n=30)
    curve = occupation_curve(series)
    assert curve.cumulative[-1] == 22.0
    assert curve.weights.sum() == pytest.approx(22.0, rel=1e-12)
    assert np.all(np.diff(curve.cumulative) > 0)
    assert list(curve.to_frame().columns) == ["level", "cumulative_time"]
    table = quantile_table(curve, [0.25, 0.5, 0.75])
    assert list(table.columns) == ["alpha_frac", "q_hat"]
    assert table["q_hat"].is_monotonic_increasing


def test_galois_relations():
    rng = np.random.default_rng(1)
    series = make_series(rng.gamma(2.0, size=58), T=22.0, n_per_day=80, k_n=30)
    curve = occupation_curve(series)
    for alpha in np.linspace(0.05, 22.0, 60):
        q = curve.quantile_time(alpha)
        assert curve.evaluate(q) >= alpha - 1e-9
        for x in curve.levels:
            if curve.evaluate(x) >= alpha:
                assert q <= x


def test_occupation_formula_identity():
    path = simulate_model(CirSpec(), SamplingGrid(), seed=13)
    series = spot_variance_blocks(path.x_obs, path.grid, BlockSpec(k_n=30))
    curve = occupation_curve(series)
    fine_left = path.fine_times()[:-1]
    extension = series.extension(fine_left)
    for g in (np.sqrt, np.square, np.log1p, lambda v: np.minimum(v, 1.0), lambda v: np.exp(-v)):
        direct = float(np.sum(g(extension)) * path.fine_step)
        assert curve.integrate_against(lambda v: float(g(v))) == pytest.approx(direct, rel=1e-9)


def test_estimator_choice():
    series = make_series([0.5, 1.5], T=2.0)
    object.__setattr__(series, "v_hat", np.array([0.25, 1.5]))
    assert occupation_curve(series, EstimatorKind.TRUNCATED).levels[0] == 0.25
    assert occupation_curve(series, EstimatorKind.UNTRUNCATED).levels[0] == 0.5


def test_sup_error_examples():
    series = make_series([1.0], T=1.0, k_n=2, substeps=5)
    assert sup_error(series, np.ones(11)) == 0.0
    series = make_series([0.9, 1.2], T=2.0, k_n=2, substeps=5)
    assert sup_error(series, np.ones(21)) == pytest.approx(0.2)


def test_sup_error_horizon_mismatch():
    series = make_series([0.9, 1.2], T=2.0, k_n=2, substeps=5)
    with pytest.raises(ConfigurationError):
        sup_error(series, np.ones(15))


def assert_sandwich(path):
    """F_or(x - eta) <= F_hat(x) <= F_or(x + eta) and |Q_hat - Q_or| <= eta."""
    series = spot_variance_blocks(path.x_obs, path.grid, BlockSpec(k_n=20), NoTruncation())
    curve = occupation_curve(series)
    eta = sup_error(series, path.v_fine)
    slack = discretization_slack(path.v_fine)
    xs = np.linspace(path.v_fine.min(), path.v_fine.max(), 50)
    f_hat = curve.evaluate(xs)
    assert np.all(f_hat <= oracle_occupation(path.v_fine, path.fine_step, xs + eta + slack) + 1e-9)
    assert np.all(f_hat >= oracle_occupation(path.v_fine, path.fine_step, xs - eta - slack) - 1e-9)
    for a in (0.25, 0.5, 0.75):
        gap = abs(curve.quantile(a) - oracle_quantile(path.v_fine, path.fine_step, a))
        assert gap <= eta + slack


def test_pathwise_sandwich_against_oracle():
    for i in range(10):
        assert_sandwich(simulate_model(CirSpec(), SamplingGrid(), seed=77, stream=(i,)))


@pytest.mark.slow
def test_pathwise_sandwich_on_every_replica():
    for i in range(200):
        assert_sandwich(simulate_model(CirSpec(), SamplingGrid(), seed=77, stream=(i,)))


def test_sup_error_shrinks_with_sampling_frequency():
    grid = SamplingGrid(T=22.0, n_per_day=1600, substeps=1)
    shrinks = 0
    for i in range(200):
        fine = simulate_model(CirSpec(), grid, seed=2024, stream=(i,))
        coarse = fine.subsample(20)
        eta_fine = sup_error(spot_variance_blocks(fine.x_obs, fine.grid, BlockSpec(k_n=80)), fine.v_fine)
        eta_coarse = sup_error(spot_variance_blocks(coarse.x_obs, coarse.grid, BlockSpec(k_n=20)), coarse.v_fine)
        shrinks += eta_fine < eta_coarse
    assert shrinks >= 180
