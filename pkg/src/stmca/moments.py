"""Green functions and conditional exit-time moments on a cell (a, x, b).

v_k(x) = E_x[tau^k; hit b first] and the bar variants (hit a first) determine
the walk's transition probabilities p+/p- = v0/(1-v0) and conditional times
T+/T- = v1/v0, v1_bar/(1-v0). Catalog diffusions get closed forms; everything
else goes through the Green-integral recursion

    v_k(x) = k * int_(a,b) G(x, z) v_{k-1}(z) m(dz),

with atoms contributing rho * G(x, loc) * v_{k-1}(loc) exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StmcaError, UnsupportedMethodError
from .measure import DiffusionSpec, ScaleFunction
from .quadrature import integrate, nodes_weights, panel_breakpoints

DEGENERATE_P = 1e-12


@dataclass(frozen=True)
class GreenEvaluator:
    """Green function of the exit problem from (a, b) in the given scale."""

    a: float
    b: float
    scale: ScaleFunction

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(x < self.a) or np.any(x > self.b) or np.any(y < self.a) or np.any(y > self.b):
            raise StmcaError(f"green arguments outside [{self.a}, {self.b}]")
        s = self.scale.eval
        sa = float(s(self.a))
        sb = float(s(self.b))
        lo = s(np.minimum(x, y))
        hi = s(np.maximum(x, y))
        return (lo - sa) * (sb - hi) / (sb - sa)


def green(ge: GreenEvaluator, x, y):
    return ge(x, y)


@dataclass(frozen=True)
class CellQuantities:
    """All transition data for a walk step out of the cell (a, x, b)."""

    a: float
    x: float
    b: float
    v0: float
    v1: float
    v1_bar: float
    p_plus: float
    p_minus: float
    t_plus: float
    t_minus: float
    one_sided: bool = False


def v0(spec: DiffusionSpec, a: float, x, b: float):
    """Probability of reaching b before a, started at x: scale-difference ratio."""
    x = np.asarray(x, dtype=float)
    if np.any(x < a) or np.any(x > b):
        raise StmcaError(f"x outside [{a}, {b}]")
    s = spec.scale.eval
    sa = float(s(a))
    sb = float(s(b))
    if not sb > sa:
        raise StmcaError("scale must be strictly increasing over the cell")
    return (np.asarray(s(x), dtype=float) - sa) / (sb - sa)


def v1_bm(a: float, x, b: float):
    """First conditional moment for standard BM (m = 2dx, natural scale)."""
    x = np.asarray(x, dtype=float)
    d = b - a
    l = (x - a) / d
    r = (b - x) / d
    return (x - a) * (b - x) * (2.0 / 3.0 * l * l + r - 2.0 / 3.0 * r * r)


def v1_bar_bm(a: float, x, b: float):
    x = np.asarray(x, dtype=float)
    d = b - a
    l = (x - a) / d
    r = (b - x) / d
    return (x - a) * (b - x) * (2.0 / 3.0 * r * r + l - 2.0 / 3.0 * l * l)


def _spec_kinks(spec, a, b):
    pts = tuple(loc for loc, _ in spec.speed.atoms if a < loc < b)
    pts += tuple(k for k in spec.kinks if a < k < b)
    return pts


def _cell_mesh(spec, a, b, x, n_panels):
    kinks = (float(x),) + _spec_kinks(spec, a, b)
    breaks = panel_breakpoints(a, b, n_panels, kinks=kinks)
    return nodes_weights(breaks)


def vk_quadrature(
    spec: DiffusionSpec,
    a: float,
    x: float,
    b: float,
    k: int,
    n_panels: int = 256,
    complement: bool = False,
) -> float:
    """Green-integral recursion for v_k (or the bar variant with complement=True).

    Inner levels are iterated on a fixed quadrature mesh (a matrix-vector
    recursion, cost O(k N^2)); the final integral for v_k(x) reuses the same
    mesh, which carries a panel break at x, so the k = 1 case is as accurate
    as a dedicated single integral.
    """
    if k < 1:
        raise StmcaError("k must be >= 1")
    if n_panels < 8:
        raise StmcaError("n_panels must be >= 8")
    ge = GreenEvaluator(a, b, spec.scale)
    atoms = tuple((loc, mass) for loc, mass in spec.speed.atoms if a < loc < b)
    nodes, weights = _cell_mesh(spec, a, b, x, n_panels)
    dens = np.asarray(spec.speed.density(nodes), dtype=float)
    atom_locs = np.array([loc for loc, _ in atoms])
    atom_masses = np.array([mass for _, mass in atoms])
    pts = np.concatenate([nodes, atom_locs]) if len(atoms) else nodes

    def step(level: int, prev: np.ndarray, targets: np.ndarray) -> np.ndarray:
        dens_part = ge(targets[:, None], nodes[None, :]) @ (prev[: len(nodes)] * dens * weights)
        if len(atoms):
            dens_part += ge(targets[:, None], atom_locs[None, :]) @ (
                atom_masses * prev[len(nodes):]
            )
        return level * dens_part

    base = np.asarray(v0(spec, a, pts, b), dtype=float)
    vals = 1.0 - base if complement else base
    for level in range(1, k):
        vals = step(level, vals, pts)
    return float(step(k, vals, np.array([float(x)]))[0])


def mean_exit_time(spec: DiffusionSpec, a: float, x: float, b: float, n_panels: int = 256) -> float:
    """Unconditional E_x[tau_ab] = int G(x, z) m(dz)."""
    ge = GreenEvaluator(a, b, spec.scale)
    nodes, weights = _cell_mesh(spec, a, b, x, n_panels)
    dens = np.asarray(spec.speed.density(nodes), dtype=float)
    val = float(np.dot(ge(x, nodes) * dens, weights))
    for loc, mass in spec.speed.atoms:
        if a < loc < b:
            val += mass * float(ge(x, loc))
    return val


def _closed_v1_pair(spec: DiffusionSpec, a: float, x: float, b: float, quad_panels: int):
    """(v1, v1_bar) closed forms per preset; quadrature-backed where none exist."""
    preset = spec.preset
    if preset == "bm":
        return float(v1_bm(a, x, b)), float(v1_bar_bm(a, x, b))
    if preset == "skew_bm":
        if a < 0.0 < b:
            # the skew factors between scale and speed do not cancel on a
            # cell straddling the skew point; there the integrand is piecewise
            # cubic, so split quadrature at 0 is exact
            return (
                vk_quadrature(spec, a, x, b, 1, 32),
                vk_quadrature(spec, a, x, b, 1, 32, complement=True),
            )
        # away from the skew point the scale/speed factors cancel and the
        # standard BM expressions hold exactly
        return float(v1_bm(a, x, b)), float(v1_bar_bm(a, x, b))
    if preset == "sticky_bm":
        rho = spec.params["rho"]
        v1 = float(v1_bm(a, x, b))
        v1b = float(v1_bar_bm(a, x, b))
        if a < 0.0 < b:
            ge = GreenEvaluator(a, b, spec.scale)
            g0 = float(ge(x, 0.0))
            p0 = float(v0(spec, a, 0.0, b))
            v1 += rho * g0 * p0
            v1b += rho * g0 * (1.0 - p0)
        return v1, v1b
    if preset in ("bessel", "skew_bessel", "ou", "cir"):
        # no closed v1 exists; refine the quadrature well past the default
        panels = max(2 * quad_panels, 512)
        return (
            vk_quadrature(spec, a, x, b, 1, panels),
            vk_quadrature(spec, a, x, b, 1, panels, complement=True),
        )
    raise UnsupportedMethodError(f"no closed forms for preset {spec.preset!r}")


def _closed_v0(spec: DiffusionSpec, a: float, x: float, b: float) -> float:
    if spec.preset == "cir":
        # integrate the analytic s' directly; the tabulated s is only an
        # interpolant and a within-cell ratio deserves the exact integrand
        ia = integrate(spec.scale.deriv, a, x, n_panels=64) if x > a else 0.0
        ib = integrate(spec.scale.deriv, x, b, n_panels=64) if b > x else 0.0
        return ia / (ia + ib)
    return float(v0(spec, a, x, b))


def cell_quantities(
    spec: DiffusionSpec,
    a: float,
    x: float,
    b: float,
    method: str = "closed_form",
    quad_panels: int = 256,
) -> CellQuantities:
    """Populate the full transition record for one cell."""
    if not a < x < b:
        raise StmcaError(f"cell must satisfy a < x < b, got ({a}, {x}, {b})")
    if method == "closed_form":
        if spec.preset is None:
            raise UnsupportedMethodError("closed_form requires a catalog preset")
        p = _closed_v0(spec, a, x, b)
        v1, v1b = _closed_v1_pair(spec, a, x, b, quad_panels)
    elif method == "quadrature":
        p = float(v0(spec, a, x, b))
        v1 = vk_quadrature(spec, a, x, b, 1, quad_panels)
        v1b = vk_quadrature(spec, a, x, b, 1, quad_panels, complement=True)
    else:
        raise StmcaError(f"unknown method {method!r}")

    one_sided = False
    if p < DEGENERATE_P:
        # conditional time is 0/0 but the up branch is never taken
        t_plus = v1 + v1b
        t_minus = v1b / (1.0 - p)
        one_sided = True
    elif 1.0 - p < DEGENERATE_P:
        t_plus = v1 / p
        t_minus = v1 + v1b
        one_sided = True
    else:
        t_plus = v1 / p
        t_minus = v1b / (1.0 - p)
    return CellQuantities(
        a=a, x=x, b=b, v0=p, v1=v1, v1_bar=v1b,
        p_plus=p, p_minus=1.0 - p, t_plus=t_plus, t_minus=t_minus,
        one_sided=one_sided,
    )


def reflecting_jump(spec: DiffusionSpec, boundary: float, b: float, n_panels: int = 128) -> float:
    """Mean time of the deterministic jump from a reflecting endpoint to its neighbor.

    Equals int over [boundary, b) of (distance to b) m(dz); a boundary atom
    contributes mass * |b - boundary|.
    """
    from .measure import REFLECTING

    if boundary < b:
        if spec.left_boundary.kind != REFLECTING or boundary != spec.domain.lower:
            raise StmcaError("left endpoint is not reflecting")
        lo, hi = boundary, b
        weight = lambda z: hi - np.asarray(z, dtype=float)
    elif boundary > b:
        if spec.right_boundary.kind != REFLECTING or boundary != spec.domain.upper:
            raise StmcaError("right endpoint is not reflecting")
        lo, hi = b, boundary
        weight = lambda z: np.asarray(z, dtype=float) - lo
    else:
        raise StmcaError("neighbor must differ from the boundary")
    kinks = _spec_kinks(spec, lo, hi)
    val = integrate(
        lambda z: weight(z) * np.asarray(spec.speed.density(z), dtype=float),
        lo, hi, n_panels=n_panels, kinks=kinks,
    )
    for loc, mass in spec.speed.atoms:
        if lo <= loc < hi if boundary < b else lo < loc <= hi:
            val += mass * float(weight(loc))
    return val


def generator_residual(
    spec: DiffusionSpec,
    a: float,
    x: float,
    b: float,
    u,
    rhs,
    h_fd: float,
    n_samples: int = 41,
) -> float:
    """Max |mu u' + sigma^2/2 u'' - rhs| over interior samples, central differences."""
    if spec.drift is None or spec.diffusivity is None:
        raise StmcaError("generator_residual needs an SDE-derived spec")
    xs = np.linspace(a + 2 * h_fd, b - 2 * h_fd, n_samples)
    up = (np.asarray(u(xs + h_fd)) - np.asarray(u(xs - h_fd))) / (2 * h_fd)
    upp = (np.asarray(u(xs + h_fd)) - 2 * np.asarray(u(xs)) + np.asarray(u(xs - h_fd))) / h_fd**2
    mu = np.asarray(spec.drift(xs), dtype=float)
    sig = np.asarray(spec.diffusivity(xs), dtype=float)
    res = mu * up + 0.5 * sig * sig * upp - np.asarray(rhs(xs), dtype=float)
    return float(np.max(np.abs(res)))
