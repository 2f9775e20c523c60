"""Walk engine: tables, paths, boundary rules, batching, embedding oracle."""
import math

import numpy as np
import pytest

from stmca.catalog import bm, sticky_bm
from stmca.errors import RunawaySimulationError, StmcaError
from stmca.grid import Grid, tuned_grid_sticky, uniform_grid
from stmca.measure import (
    BoundaryBehavior,
    DiffusionSpec,
    IDENTITY_SCALE,
    Interval,
    SpeedMeasure,
)
from stmca.moments import v0
from stmca.rng import RngSpec
from stmca.walk import (
    build_table,
    embed_oracle_bm,
    init_state,
    simulate,
    terminal_values,
    value_at,
    values_at,
)


def _bm_setup(h=0.1, window=4.0):
    spec = bm()
    grid = uniform_grid(spec.domain, h, Interval(-window, window))
    table = build_table(spec, grid)
    return spec, grid, table


def test_build_table_bm_unit_grid():
    spec = bm()
    grid = uniform_grid(spec.domain, 1.0, Interval(-5.0, 5.0))
    table = build_table(spec, grid)
    inner = slice(1, -1)
    assert np.allclose(table.p_plus[inner], 0.5, atol=1e-14)
    # v1(0) on (-1, 1) = 0.5 and v0 = 0.5, so both conditional times are 1
    assert np.allclose(table.t_plus[inner], 1.0, atol=1e-10)
    assert np.allclose(table.t_minus[inner], 1.0, atol=1e-10)
    assert np.isnan(table.p_plus[0]) and np.isnan(table.p_plus[-1])


def test_simulate_reproducible():
    spec, grid, table = _bm_setup()
    p1 = simulate(spec, grid, table, 0.0, 2.0, RngSpec(5, 3))
    p2 = simulate(spec, grid, table, 0.0, 2.0, RngSpec(5, 3))
    assert np.array_equal(p1.times, p2.times)
    assert np.array_equal(p1.values, p2.values)
    p3 = simulate(spec, grid, table, 0.0, 2.0, RngSpec(5, 4))
    assert not np.array_equal(p1.values, p3.values)


def test_path_conservation():
    spec, grid, table = _bm_setup()
    path = simulate(spec, grid, table, 0.0, 1.0, RngSpec(7, 0))
    assert path.times[0] == 0.0
    assert np.all(np.diff(path.times) > 0)
    dj = np.diff(path.indices)
    assert np.all(np.abs(dj) == 1)
    # each time increment equals the table entry of the departing row/branch
    for k in range(1, len(path.times)):
        j_prev = path.indices[k - 1]
        dt = path.times[k] - path.times[k - 1]
        expect = table.t_plus[j_prev] if dj[k - 1] == 1 else table.t_minus[j_prev]
        assert abs(dt - expect) < 1e-12


def test_value_at_semantics():
    spec, grid, table = _bm_setup()
    path = simulate(spec, grid, table, 0.0, 1.0, RngSpec(1, 1))
    assert value_at(path, 0.0) == path.values[0]
    t_mid = 0.5 * (path.times[1] + path.times[2])
    assert value_at(path, t_mid) == path.values[1]
    # exactly at a jump: right-continuous, post-jump value
    assert value_at(path, float(path.times[1])) == path.values[1]
    with pytest.raises(StmcaError):
        value_at(path, -0.1)
    with pytest.raises(StmcaError):
        value_at(path, float(path.times[-1]) + 1.0)
    ts = np.array([0.0, t_mid])
    vs = values_at(path, ts)
    assert vs[0] == path.values[0] and vs[1] == path.values[1]


def test_bm_up_fraction():
    spec, grid, table = _bm_setup(h=0.02, window=20.0)
    path = simulate(spec, grid, table, 0.0, 40.0, RngSpec(11, 0))
    n = len(path.indices) - 1
    assert n > 100000
    ups = np.sum(np.diff(path.indices) == 1)
    se = 0.5 / math.sqrt(n)
    assert abs(ups / n - 0.5) < 3 * se


def _occupation_of_zero(path, horizon):
    times = np.minimum(path.times, horizon)
    held = np.diff(np.append(times, horizon))
    return float(np.sum(held[path.values == 0.0])) / horizon


def test_sticky_occupation_positive_and_ordered():
    occs = []
    for rho in (0.5, 1.0, 2.0):
        spec = sticky_bm(rho)
        grid = tuned_grid_sticky(0.05, rho, Interval(-4.0, 4.0))
        table = build_table(spec, grid)
        vals = [
            _occupation_of_zero(simulate(spec, grid, table, 0.0, 1.0, RngSpec(31, i)), 1.0)
            for i in range(60)
        ]
        occs.append((np.mean(vals), np.std(vals) / math.sqrt(len(vals))))
    for (m, _) in occs:
        assert m > 0.05
    # ordering with 3 sigma MC room
    for (m0, s0), (m1, s1) in zip(occs, occs[1:]):
        assert m1 - m0 > -3.0 * math.hypot(s0, s1)
    assert occs[-1][0] > occs[0][0]


def _absorbing_spec():
    return DiffusionSpec(
        domain=Interval(0.0, math.inf, lower_closed=True),
        scale=IDENTITY_SCALE,
        speed=SpeedMeasure(density=lambda x: np.full_like(np.asarray(x, float), 2.0)),
        left_boundary=BoundaryBehavior("absorbing"),
    )


def test_absorbing_boundary():
    spec = _absorbing_spec()
    grid = uniform_grid(spec.domain, 0.1, Interval(0.0, 1.0))
    table = build_table(spec, grid, method="quadrature", quad_panels=64)
    path = simulate(spec, grid, table, 0.2, 50.0, RngSpec(3, 2))
    assert path.absorbed
    assert path.values[-1] == 0.0
    # evaluation beyond the last jump is allowed for absorbed paths
    assert value_at(path, 49.9) == 0.0


def test_reflecting_boundary_jump():
    spec = DiffusionSpec(
        domain=Interval(0.0, math.inf, lower_closed=True),
        scale=IDENTITY_SCALE,
        speed=SpeedMeasure(density=lambda x: np.full_like(np.asarray(x, float), 2.0)),
        left_boundary=BoundaryBehavior("reflecting"),
    )
    grid = uniform_grid(spec.domain, 0.1, Interval(0.0, 1.0))
    table = build_table(spec, grid, method="quadrature", quad_panels=64)
    path = simulate(spec, grid, table, 0.0, 5.0, RngSpec(17, 0))
    hits = np.where(path.indices[:-1] == 0)[0]
    assert len(hits) > 0
    for k in hits:
        assert path.indices[k + 1] == 1
        assert abs((path.times[k + 1] - path.times[k]) - table.left_time) < 1e-12
    assert abs(table.left_time - 0.01) < 1e-12


def test_truncation_flag_at_window_edge():
    spec, grid, table = _bm_setup(h=0.1, window=0.3)
    path = simulate(spec, grid, table, 0.0, 5.0, RngSpec(23, 0))
    assert path.truncated


def test_terminal_values_thread_invariance():
    spec, grid, table = _bm_setup()
    v1, tr1, ab1 = terminal_values(spec, grid, table, 0.0, 1.0, RngSpec(9, 0), 500, threads=1)
    v2, tr2, ab2 = terminal_values(spec, grid, table, 0.0, 1.0, RngSpec(9, 0), 500, threads=4)
    assert np.array_equal(v1, v2)
    assert np.array_equal(tr1, tr2)
    # batch equals per-path single simulation
    single = simulate(spec, grid, table, 0.0, 1.0, RngSpec(9, 3))
    assert value_at(single, 1.0) == v1[3]


def test_step_budget_raises():
    spec, grid, table = _bm_setup(h=0.01)
    with pytest.raises(RunawaySimulationError):
        simulate(spec, grid, table, 0.0, 10.0, RngSpec(1, 0), step_budget=50)


def test_init_state_rules():
    spec, grid, table = _bm_setup(h=0.5, window=2.0)
    j, t0 = init_state(spec, grid, table, 0.5, RngSpec(1, 0))
    assert grid.points[j] == 0.5 and t0 == 0.0
    # off-grid start: Bernoulli with the exit probability of the start cell
    x0 = 0.1
    p = float(v0(spec, 0.0, x0, 0.5))
    ups = 0
    n = 4000
    for i in range(n):
        j, _ = init_state(spec, grid, table, x0, RngSpec(100, i))
        assert grid.points[j] in (0.0, 0.5)
        ups += grid.points[j] == 0.5
    se = math.sqrt(p * (1 - p) / n)
    assert abs(ups / n - p) < 4 * se


def test_embed_oracle_uniform_grid():
    grid = Grid(points=np.arange(-3.0, 3.5, 0.5), domain=Interval(-math.inf, math.inf))
    p_hat, tot, mean_t = embed_oracle_bm(grid, 0.0, 4000, (0.5 / 50.0) ** 2, RngSpec(3, 0))
    inner = (tot > 30)
    inner[0] = inner[-1] = False
    se = 0.5 / np.sqrt(np.maximum(tot[inner], 1))
    assert np.all(np.abs(p_hat[inner] - 0.5) < 4 * se)
    # mean crossing time from a symmetric cell of half width 0.5 is 0.25
    assert np.all(np.abs(mean_t[inner] / 0.25 - 1.0) < 0.2)


def test_embed_oracle_matches_scale_ratio():
    pts = np.array([-1.0, -0.4, 0.0, 0.3, 1.1])
    grid = Grid(points=pts, domain=Interval(-math.inf, math.inf))
    p_hat, tot, _ = embed_oracle_bm(grid, 0.0, 6000, (0.3 / 50.0) ** 2, RngSpec(41, 0))
    for j in (1, 2, 3):
        d_minus = pts[j] - pts[j - 1]
        d_plus = pts[j + 1] - pts[j]
        expect = d_minus / (d_minus + d_plus)
        se = math.sqrt(expect * (1 - expect) / max(int(tot[j]), 1))
        assert abs(p_hat[j] - expect) < 4 * se
