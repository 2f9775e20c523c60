"""The grid-walk engine: transition tables and path simulation.

The walk moves between neighboring grid points; from interior index j it goes
up with probability p_plus[j] and the clock advances by the deterministic
conditional time t_plus[j] (or t_minus[j] going down). Closed boundaries obey
their reflecting/absorbing rule; window-truncation edges reflect artificially
and set a truncation flag so downstream analysis can discard those paths.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import RunawaySimulationError, StmcaError
from .grid import Grid, locate
from .measure import ABSORBING, REFLECTING, DiffusionSpec
from .moments import cell_quantities, reflecting_jump, v0
from .quadrature import integrate
from .rng import RngSpec, stream_state

DEFAULT_STEP_BUDGET = 1_000_000_000

_SNAP = 1e-9


@dataclass(frozen=True)
class TransitionTable:
    """Precomputed walk data: one row per grid point, boundary rules at the ends.

    p_plus/t_plus/t_minus are NaN at the two end indices, where left_code /
    right_code (reflect, absorb or window edge) and the end jump times apply
    instead.
    """

    grid: Grid
    p_plus: np.ndarray
    t_plus: np.ndarray
    t_minus: np.ndarray
    left_code: int
    right_code: int
    left_time: float
    right_time: float
    one_sided: np.ndarray
    method: str = "closed_form"


@dataclass(frozen=True)
class PathRecord:
    """A cadlag piecewise-constant path: value values[k] is held on [times[k], times[k+1])."""

    times: np.ndarray
    values: np.ndarray
    indices: np.ndarray
    truncated: bool
    absorbed: bool


def _edge_time(spec: DiffusionSpec, edge: float, neighbor: float) -> float:
    """Artificial-reflection jump time at a window-truncation edge.

    Same speed-weighted integral as a genuine reflecting boundary, computed
    without requiring the DiffusionSpec to declare the edge reflecting.
    """
    lo, hi = (edge, neighbor) if edge < neighbor else (neighbor, edge)
    if edge < neighbor:
        weight = lambda z: hi - np.asarray(z, dtype=float)
    else:
        weight = lambda z: np.asarray(z, dtype=float) - lo
    kinks = tuple(loc for loc, _ in spec.speed.atoms if lo < loc < hi)
    kinks += tuple(k for k in spec.kinks if lo < k < hi)
    val = integrate(
        lambda z: weight(z) * np.asarray(spec.speed.density(z), dtype=float),
        lo, hi, n_panels=64, kinks=kinks,
    )
    for loc, mass in spec.speed.atoms:
        on_edge = loc == edge
        if lo < loc < hi or on_edge:
            val += mass * float(weight(loc))
    return val


def _end_rule(spec: DiffusionSpec, grid: Grid, side: str):
    """(code, jump_time) for one end of the grid."""
    pts = grid.points
    if side == "left":
        end, neighbor = pts[0], pts[1]
        closed = spec.domain.lower_closed
        boundary = spec.domain.lower
        behavior = spec.left_boundary
    else:
        end, neighbor = pts[-1], pts[-2]
        closed = spec.domain.upper_closed
        boundary = spec.domain.upper
        behavior = spec.right_boundary
    at_boundary = closed and abs(end - boundary) <= _SNAP * max(1.0, abs(end))
    if at_boundary:
        if behavior.kind == REFLECTING:
            return _kernels.REFLECT, reflecting_jump(spec, boundary, neighbor)
        if behavior.kind == ABSORBING:
            return _kernels.ABSORB, 0.0
        raise StmcaError(
            f"closed {side} endpoint {boundary} needs a reflecting or absorbing rule"
        )
    return _kernels.EDGE, _edge_time(spec, end, neighbor)


def build_table(
    spec: DiffusionSpec,
    grid: Grid,
    method: str = "closed_form",
    quad_panels: int = 256,
) -> TransitionTable:
    """One row of cell quantities per interior point plus the two end rules."""
    pts = grid.points
    n = len(pts)
    p_plus = np.full(n, np.nan)
    t_plus = np.full(n, np.nan)
    t_minus = np.full(n, np.nan)
    one_sided = np.zeros(n, dtype=bool)
    for j in range(1, n - 1):
        try:
            cq = cell_quantities(spec, pts[j - 1], pts[j], pts[j + 1], method, quad_panels)
        except StmcaError as exc:
            raise type(exc)(f"grid index {j} (x={pts[j]}): {exc}") from exc
        p_plus[j] = cq.p_plus
        t_plus[j] = cq.t_plus
        t_minus[j] = cq.t_minus
        one_sided[j] = cq.one_sided
    left_code, left_time = _end_rule(spec, grid, "left")
    right_code, right_time = _end_rule(spec, grid, "right")
    return TransitionTable(
        grid=grid,
        p_plus=p_plus, t_plus=t_plus, t_minus=t_minus,
        left_code=left_code, right_code=right_code,
        left_time=left_time, right_time=right_time,
        one_sided=one_sided, method=method,
    )


def _init_params(spec: DiffusionSpec, grid: Grid, x0: float):
    """(on_grid, index, lower_neighbor, upward probability) for the start draw."""
    pts = grid.points
    j, _ = locate(grid, x0)
    if abs(pts[j] - x0) <= _SNAP * max(1.0, abs(x0)):
        return True, j, j, 1.0
    i = int(np.searchsorted(pts, x0)) - 1
    a, b = pts[i], pts[i + 1]
    p = float(v0(spec, a, x0, b))
    return False, i, i, p


def init_state(spec: DiffusionSpec, grid: Grid, table: TransitionTable, x0: float, rng):
    """Starting (index, time=0): deterministic on a grid point, else a Bernoulli
    between the two neighbors with the exit probability of the start cell."""
    on_grid, j, lo, p = _init_params(spec, grid, x0)
    if on_grid:
        return j, 0.0
    stream = rng.stream() if isinstance(rng, RngSpec) else rng
    u = stream.uniform()
    return (lo + 1 if u < p else lo), 0.0


def simulate(
    spec: DiffusionSpec,
    grid: Grid,
    table: TransitionTable,
    x0: float,
    horizon: float,
    rng: RngSpec,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> PathRecord:
    """Run the walk until the clock passes the horizon; full jump record."""
    if horizon <= 0:
        raise StmcaError("horizon must be positive")
    on_grid, j, lo, p = _init_params(spec, grid, x0)
    state = np.uint64(stream_state(np.uint64(rng.master_seed), np.uint64(rng.stream_id)))
    times, idxs, absorbed, truncated, budget_hit = _kernels.walk_record(
        table.p_plus, table.t_plus, table.t_minus,
        table.left_code, table.right_code, table.left_time, table.right_time,
        on_grid, j, lo, p,
        float(horizon), state, step_budget,
    )
    if budget_hit:
        raise RunawaySimulationError(
            f"walk exceeded the step budget of {step_budget} before t={horizon}"
        )
    return PathRecord(
        times=times,
        values=grid.points[idxs],
        indices=idxs,
        truncated=bool(truncated),
        absorbed=bool(absorbed),
    )


def value_at(path: PathRecord, t: float):
    """Path value at time t: last value whose jump time is <= t (cadlag)."""
    if t < path.times[0]:
        raise StmcaError(f"t={t} precedes the recorded path")
    if t > path.times[-1] and not path.absorbed:
        raise StmcaError(f"t={t} beyond the recorded range {path.times[-1]}")
    k = int(np.searchsorted(path.times, t, side="right")) - 1
    return float(path.values[k])


def values_at(path: PathRecord, ts: np.ndarray) -> np.ndarray:
    """Vectorized value_at for sorted or unsorted sample times."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < path.times[0]):
        raise StmcaError("sample time precedes the recorded path")
    if not path.absorbed and np.any(ts > path.times[-1]):
        raise StmcaError("sample time beyond the recorded range")
    ks = np.searchsorted(path.times, ts, side="right") - 1
    return path.values[ks]


def terminal_values(
    spec: DiffusionSpec,
    grid: Grid,
    table: TransitionTable,
    x0: float,
    horizon: float,
    rng: RngSpec,
    n_paths: int,
    threads: int = 1,
    step_budget: int = DEFAULT_STEP_BUDGET,
):
    """Monte Carlo batch of terminal values at the horizon.

    Path i draws from stream rng.stream_id + i, so the batch is deterministic
    in (master_seed, stream_id, n_paths) regardless of the thread count.
    Returns (values, truncated flags, absorbed flags).
    """
    if horizon <= 0:
        raise StmcaError("horizon must be positive")
    if n_paths <= 0:
        raise StmcaError("n_paths must be positive")
    on_grid, j, lo, p = _init_params(spec, grid, x0)
    stream_ids = (np.uint64(rng.stream_id) + np.arange(n_paths, dtype=np.uint64))
    seed = np.uint64(rng.master_seed)

    def run(ids):
        return _kernels.walk_terminal_batch(
            table.p_plus, table.t_plus, table.t_minus,
            table.left_code, table.right_code, table.left_time, table.right_time,
            on_grid, j, lo, p,
            float(horizon), seed, ids, step_budget,
        )

    if threads <= 1 or n_paths < 2 * threads:
        out_j, _, absorbed, truncated, budget = run(stream_ids)
    else:
        chunks = np.array_split(stream_ids, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
        out_j = np.concatenate([p_[0] for p_ in parts])
        absorbed = np.concatenate([p_[2] for p_ in parts])
        truncated = np.concatenate([p_[3] for p_ in parts])
        budget = np.concatenate([p_[4] for p_ in parts])
    if np.any(budget):
        raise RunawaySimulationError(
            f"{int(np.sum(budget))} paths exceeded the step budget of {step_budget}"
        )
    return grid.points[out_j], truncated, absorbed


def embed_oracle_bm(
    grid: Grid,
    x0: float,
    n_crossings: int,
    dt_fine: float,
    rng: RngSpec,
):
    """Empirical neighbor-hit frequencies of fine-step standard BM on the grid.

    Simulates Euler increments of BM (reflected at the outer grid points) and
    records, for every departure from an interior grid point, which neighbor
    was reached first and after how long. Returns (p_plus_hat, counts,
    mean_times) indexed like the grid; end points carry zero counts.
    """
    if dt_fine <= 0 or n_crossings <= 0:
        raise StmcaError("dt_fine and n_crossings must be positive")
    j0, _ = locate(grid, x0)
    state = np.uint64(stream_state(np.uint64(rng.master_seed), np.uint64(rng.stream_id)))
    up, tot, time_sum = _kernels.bm_crossings(
        grid.points, j0, int(n_crossings), float(dt_fine), state
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hat = np.where(tot > 0, up / np.maximum(tot, 1), np.nan)
        mean_t = np.where(tot > 0, time_sum / np.maximum(tot, 1), np.nan)
    return p_hat, tot, mean_t
