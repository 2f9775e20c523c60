"""Local-time statistic and stickiness estimation."""
import math

import numpy as np
import pytest

from stmca.catalog import bm, sticky_bm
from stmca.errors import StmcaError
from stmca.estimators import (
    TestFunction,
    indicator_band,
    local_time_stat,
    mc_report,
    observation_fraction,
    path_samples,
    sample_times,
    stickiness_estimator,
    validate_lambda,
)
from stmca.grid import graded_atom_grid, uniform_grid
from stmca.measure import Interval
from stmca.rng import RngSpec
from stmca.walk import build_table, simulate


def test_indicator_band_integral():
    g = indicator_band()
    assert g.lambda_g == 1.0
    assert float(g.eval(2.0)) == 1.0 / 8.0
    assert float(g.eval(-3.0)) == 1.0 / 8.0
    assert float(g.eval(0.5)) == 0.0 and float(g.eval(6.0)) == 0.0
    validate_lambda(g, -6.0, 6.0, kinks=(-5, -1, 1, 5))
    with pytest.raises(StmcaError):
        indicator_band(2.0, 1.0)


def test_validate_lambda_catches_mismatch():
    g = TestFunction(eval=lambda x: np.where(np.abs(np.asarray(x, float)) < 1, 1.0, 0.0),
                     lambda_g=5.0)
    with pytest.raises(StmcaError, match="disagrees"):
        validate_lambda(g, -2.0, 2.0, kinks=(-1.0, 1.0))


def test_sample_times():
    ts = sample_times(10, 0.55)
    assert np.allclose(ts, np.arange(5) / 10.0)
    with pytest.raises(StmcaError):
        sample_times(10, 0.0)


def test_alpha_validation():
    g = indicator_band()
    with pytest.raises(StmcaError):
        local_time_stat(None, 10, 1.5, g, 1.0, samples=np.zeros(10))


def test_statistic_hand_computed():
    # n = 4, alpha = 0.5 => scale 2; samples scaled: {2, 4, 0.4, 0}
    g = indicator_band()  # 1/8 on 1 < |x| < 5
    xs = np.array([1.0, 2.0, 0.2, 0.0])
    l_hat = local_time_stat(None, 4, 0.5, g, 1.0, samples=xs)
    assert abs(l_hat - (2.0 / 4.0) * (1.0 / 8.0 + 1.0 / 8.0)) < 1e-15
    assert observation_fraction(None, 4, 0.5, g, 1.0, samples=xs) == 0.5
    rho = stickiness_estimator(None, 4, 0.5, g, 1.0, samples=xs)
    # occupation of 0 is 1/4; rho = 2*1/L * 1/4
    assert abs(rho - 2.0 / l_hat * 0.25) < 1e-15


def test_trivial_formula_case():
    # lambda = 1, L = 2, occupation fraction 1 => rho = 1
    g = TestFunction(eval=lambda x: np.where(np.asarray(x, float) == 0.0, 0.0, 2.0),
                     lambda_g=1.0)
    xs = np.zeros(10)
    xs[0] = 1e-9  # one sample in the support keeps L > 0
    n = 10
    l_hat = local_time_stat(None, n, 0.5, g, 1.0, samples=xs)
    rho = stickiness_estimator(None, n, 0.5, g, 1.0, samples=xs)
    assert abs(rho - 2.0 / l_hat * 0.9) < 1e-12


def test_rejection_when_statistic_zero():
    g = indicator_band()
    xs = np.zeros(16)
    assert stickiness_estimator(None, 16, 0.5, g, 1.0, samples=xs) is None


def test_scale_equivariance():
    xs = np.array([0.0, 0.5, 0.0, 2.0, -1.5, 0.0, 0.1, 3.0])
    n = 8
    rhos = []
    for c in (1.0, 3.5):
        g = indicator_band(height=c / 8.0)
        rhos.append(stickiness_estimator(None, n, 0.5, g, 1.0, samples=xs))
    assert abs(rhos[0] - rhos[1]) < 1e-14


def test_acc_monotone_in_alpha():
    spec = sticky_bm(1.0)
    grid = graded_atom_grid(0.05, 1.0, Interval(-6.0, 6.0))
    table = build_table(spec, grid)
    g = indicator_band()
    n, t = 2000, 1.0
    sample_sets = [
        path_samples(simulate(spec, grid, table, 0.0, t, RngSpec(55, i)), n, t)
        for i in range(20)
    ]
    means = []
    for alpha in (0.3, 0.4, 0.5):
        means.append(np.mean([
            observation_fraction(None, n, alpha, g, t, samples=xs) for xs in sample_sets
        ]))
    assert means[0] >= means[1] >= means[2]


def test_mc_report_aggregation():
    rep = mc_report([2.0, 2.0, 2.0], [0.1, 0.2, 0.3])
    assert rep.rho_hat_mc == 2.0 and rep.s2_mc == 0.0 and rep.rej_count == 0
    rep2 = mc_report([0.0, 2.0], [0.5, 0.5])
    assert rep2.rho_hat_mc == 1.0 and abs(rep2.s2_mc - 2.0) < 1e-15
    rep3 = mc_report([None, None], [0.0, 0.0])
    assert rep3.rejected_all and math.isnan(rep3.rho_hat_mc)
    with pytest.raises(StmcaError):
        mc_report([], [])
    with pytest.raises(StmcaError):
        mc_report([1.0], [0.1, 0.2])


def test_bm_local_time_desk_check():
    # mean of L over BM paths approximates E local time at 0 = sqrt(2T/pi)
    spec = bm()
    grid = uniform_grid(spec.domain, 0.005, Interval(-4.0, 4.0))
    table = build_table(spec, grid)
    g = indicator_band()
    n, t, alpha = 100000, 1.0, 0.4
    vals = []
    for i in range(500):
        xs = path_samples(simulate(spec, grid, table, 0.0, t, RngSpec(77, i)), n, t)
        vals.append(local_time_stat(None, n, alpha, g, t, samples=xs))
    target = math.sqrt(2.0 / math.pi)
    assert abs(np.mean(vals) / target - 1.0) < 0.15
