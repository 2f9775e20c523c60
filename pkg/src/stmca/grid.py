"""Covering grids, grid metrics and speed-measure tuning.

A cell is a consecutive-triple interval (x_{j-1}, x_{j+1}); at a closed
(attainable) endpoint the half-open interval [x_0, x_1) counts as a cell as
well. The two grid metrics are |g| (largest cell width) and ||g||_X (largest
scale-length times speed-mass over a cell); tuning builds grids for which
||g||_X stays of order h^2 so the walk keeps the Donsker-optimal rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import DegenerateGridError, StmcaError, TuningError
from .measure import DiffusionSpec, Interval

_SNAP = 1e-9


@dataclass(frozen=True)
class Cell:
    a: float
    center: float
    b: float


@dataclass(frozen=True)
class GridMetrics:
    max_cell: float
    x_norm: float


@dataclass(frozen=True)
class Grid:
    points: np.ndarray
    domain: Interval

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if len(pts) < 3:
            raise DegenerateGridError("a grid needs at least three points")
        if np.any(np.diff(pts) <= 0):
            raise DegenerateGridError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def cell(self, j: int) -> Cell:
        if not 0 < j < len(self.points) - 1:
            raise StmcaError(f"index {j} has no interior cell")
        return Cell(self.points[j - 1], self.points[j], self.points[j + 1])

    def cells(self) -> Iterator[tuple]:
        """(lo, hi, half_open_at) for every cell, including closed-endpoint half cells."""
        p = self.points
        if self.domain.lower_closed and abs(p[0] - self.domain.lower) <= _SNAP * max(1, abs(p[0])):
            yield p[0], p[1], p[0]
        for j in range(1, len(p) - 1):
            yield p[j - 1], p[j + 1], None
        if self.domain.upper_closed and abs(p[-1] - self.domain.upper) <= _SNAP * max(1, abs(p[-1])):
            yield p[-2], p[-1], p[-1]


def _window_points(anchor: float, h: float, lo: float, hi: float) -> np.ndarray:
    """Arithmetic progression of step h through `anchor`, clipped to [lo, hi]."""
    k_lo = math.ceil((lo - anchor) / h - _SNAP)
    k_hi = math.floor((hi - anchor) / h + _SNAP)
    return anchor + h * np.arange(k_lo, k_hi + 1)


def uniform_grid(domain: Interval, h: float, window: Interval) -> Grid:
    """Uniform grid over the window, snapped so closed endpoints are grid points."""
    if h <= 0:
        raise StmcaError("step h must be positive")
    lo = max(window.lower, domain.lower)
    hi = min(window.upper, domain.upper)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise StmcaError("working window must be finite")
    if h >= hi - lo:
        raise DegenerateGridError(f"step {h} does not fit the window ({lo}, {hi})")
    anchor = lo
    if domain.lower_closed and lo == domain.lower:
        anchor = domain.lower
    elif domain.upper_closed and hi == domain.upper:
        anchor = domain.upper
    pts = _window_points(anchor, h, lo, hi)
    # keep the window edges themselves so the requested span is covered
    for edge in (lo, hi):
        if np.min(np.abs(pts - edge)) > _SNAP * max(1.0, abs(edge)):
            pts = np.append(pts, edge)
    return Grid(points=np.unique(pts), domain=domain)


def tuned_grid_sticky(h: float, rho: float, window: Interval) -> Grid:
    """Sticky-point grid {0} U {+-(h^2/2rho + k h/2)} clipped to the window.

    The cell around the atom is (-h^2/2rho, h^2/2rho), which makes its
    scale-length x speed-mass of order h^2 like every other cell.
    """
    if h <= 0 or rho <= 0:
        raise StmcaError("h and rho must be positive")
    inner = h * h / (2.0 * rho)
    lo, hi = window.lower, window.upper
    pts = [0.0]
    k_max = int(math.ceil((max(abs(lo), abs(hi)) - inner) / (h / 2.0))) + 1
    ladder = inner + (h / 2.0) * np.arange(0, k_max + 1)
    pts.extend(ladder[ladder <= hi + _SNAP])
    pts.extend(-ladder[ladder <= -lo + _SNAP])
    arr = np.unique(np.asarray(pts))
    arr = arr[(arr >= lo - _SNAP) & (arr <= hi + _SNAP)]
    return Grid(points=arr, domain=Interval(-math.inf, math.inf))


def _pair_criterion(spec: DiffusionSpec, x_prev: float, y: float) -> float:
    """(s(y) - s(x_prev)) * m([x_prev, y]) used by the tuning bisection.

    Endpoint atoms are included: stepping off a sticky point must see its
    mass, which is what shrinks the first step to h^2/(2 rho).
    """
    s = spec.scale.eval
    ds = float(s(y)) - float(s(x_prev))
    mass = spec.speed.mass_of(x_prev, y, include_lower=True, include_upper=True, n_panels=16)
    return abs(ds * mass)


def tuned_grid_sde(
    spec: DiffusionSpec,
    h: float,
    x0: float,
    window: Interval,
    fp_tol: float = 1e-12,
    max_bisect: int = 200,
) -> Grid:
    """Grid tuned to (s, m): each step y solves (s(y)-s(x)) m((x,y)) = h^2/2, capped at h.

    The map y -> criterion is nondecreasing, so plain bisection always
    converges; steps larger than h are capped to h (the equality case keeps
    the candidate).
    """
    if h <= 0:
        raise StmcaError("step h must be positive")
    lo = max(window.lower, spec.domain.lower)
    hi = min(window.upper, spec.domain.upper)
    if not lo <= x0 <= hi:
        raise StmcaError("start point must lie inside the window")
    target = h * h / 2.0

    def next_step(x_prev: float, direction: float) -> float:
        far = x_prev + direction * h
        if _pair_criterion(spec, min(x_prev, far), max(x_prev, far)) <= target + fp_tol:
            return far  # candidate step exceeds h, cap at h
        a_, b_ = x_prev, far
        for _ in range(max_bisect):
            mid = 0.5 * (a_ + b_)
            lo_, hi_ = (x_prev, mid) if direction > 0 else (mid, x_prev)
            if _pair_criterion(spec, lo_, hi_) > target:
                b_ = mid
            else:
                a_ = mid
            if abs(b_ - a_) <= fp_tol * max(1.0, abs(x_prev)) + 1e-300:
                y = 0.5 * (a_ + b_)
                for loc, _ in spec.speed.atoms:
                    # the criterion jumps at an atom; land exactly on it
                    if abs(y - loc) <= 10.0 * (fp_tol * max(1.0, abs(x_prev)) + 1e-300):
                        return float(loc)
                return y
        raise TuningError(f"tuning bisection stuck near x={x_prev}")

    pts = [float(x0)]
    x = float(x0)
    while x < hi - _SNAP * max(1.0, abs(hi)):
        x = min(next_step(x, +1.0), hi)
        pts.append(x)
    x = float(x0)
    while x > lo + _SNAP * max(1.0, abs(lo)):
        x = max(next_step(x, -1.0), lo)
        pts.append(x)
    # attainable endpoints must be grid points
    if spec.domain.lower_closed and math.isclose(lo, spec.domain.lower):
        pts.append(spec.domain.lower)
    if spec.domain.upper_closed and math.isclose(hi, spec.domain.upper):
        pts.append(spec.domain.upper)
    return Grid(points=np.unique(np.asarray(pts)), domain=spec.domain)


def atom_cell_grid(h: float, rho: float, window: Interval) -> Grid:
    """Uniform-with-atom-cell estimator grid {0} U {+-(h^2/rho + k h)}."""
    if h <= 0 or rho <= 0:
        raise StmcaError("h and rho must be positive")
    inner = h * h / rho
    lo, hi = window.lower, window.upper
    k_max = int(math.ceil((max(abs(lo), abs(hi)) - inner) / h)) + 1
    ladder = inner + h * np.arange(0, k_max + 1)
    pts = [0.0]
    pts.extend(ladder[ladder <= hi + _SNAP])
    pts.extend(-ladder[ladder <= -lo + _SNAP])
    arr = np.unique(np.asarray(pts))
    return Grid(points=arr, domain=Interval(-math.inf, math.inf))


def graded_atom_grid(h: float, rho: float, window: Interval) -> Grid:
    """Estimator grid graded toward the atom: step h^2/rho at 0 easing to h at |x| >= 1.

    Recursion: x_j = x_{j-1} + (h^2/rho)/(x+1) + h (1 - 1/(x+1)) while x < 1,
    then plain steps of h; mirrored to the negative side.
    """
    if h <= 0 or rho <= 0:
        raise StmcaError("h and rho must be positive")
    lo, hi = window.lower, window.upper
    reach = max(abs(lo), abs(hi))
    ladder = [0.0]
    x = 0.0
    while x <= reach:
        if x < 1.0:
            x = x + (h * h / rho) / (x + 1.0) + h * (1.0 - 1.0 / (x + 1.0))
        else:
            x = x + h
        ladder.append(x)
    ladder = np.asarray(ladder)
    pts = [0.0]
    pts.extend(ladder[(ladder > 0) & (ladder <= hi + _SNAP)])
    pts.extend(-ladder[(ladder > 0) & (ladder <= -lo + _SNAP)])
    return Grid(points=np.unique(np.asarray(pts)), domain=Interval(-math.inf, math.inf))


def metrics(spec: DiffusionSpec, grid: Grid) -> GridMetrics:
    """|g| and ||g||_X over all cells; half cells at closed endpoints include the boundary atom."""
    max_cell = 0.0
    x_norm = 0.0
    s = spec.scale.eval
    for lo, hi, closed_at in grid.cells():
        max_cell = max(max_cell, hi - lo)
        mass = spec.speed.mass_of(
            lo, hi,
            include_lower=(closed_at == lo),
            include_upper=(closed_at == hi),
            n_panels=16,
        )
        x_norm = max(x_norm, (float(s(hi)) - float(s(lo))) * mass)
    return GridMetrics(max_cell=max_cell, x_norm=x_norm)


def locate(grid: Grid, x: float):
    """Nearest grid index (ties to the lower index) and its cell when interior."""
    pts = grid.points
    if x < pts[0] - _SNAP or x > pts[-1] + _SNAP:
        raise StmcaError(f"{x} outside the grid window [{pts[0]}, {pts[-1]}]")
    i = int(np.searchsorted(pts, x))
    if i == 0:
        j = 0
    elif i == len(pts):
        j = len(pts) - 1
    else:
        below, above = pts[i - 1], pts[i]
        j = i - 1 if x - below <= above - x else i
    cell: Optional[Cell] = grid.cell(j) if 0 < j < len(pts) - 1 else None
    return j, cell
