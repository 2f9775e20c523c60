"""Empirical laws, 1-D Wasserstein distances, reference kernels and rate fits.

In one dimension the optimal coupling sorts both samples, so W_p is the L^p
distance of empirical quantile functions. Distances to a closed-form
transition kernel use the CDF-area formula for p = 1, which handles kernels
with an atom (sticky BM) without any smoothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import erfcx
from scipy.stats import ncx2, norm

from .errors import StmcaError, UnsupportedMethodError
from .quadrature import integrate, nodes_weights

_NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class EmpiricalLaw:
    """Finite sample of a fixed-time marginal."""

    samples: np.ndarray
    horizon: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.size == 0:
            raise StmcaError("empirical law needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise StmcaError("empirical law contains non-finite samples")
        object.__setattr__(self, "samples", np.sort(arr))


def _quantiles(sorted_samples: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Empirical quantile function, linear between midpoints (k+1/2)/n."""
    n = len(sorted_samples)
    mids = (np.arange(n) + 0.5) / n
    return np.interp(levels, mids, sorted_samples)


def wasserstein_1d(u: EmpiricalLaw, v: EmpiricalLaw, p: float = 1.0) -> float:
    """W_p between two empirical laws via sorted samples / quantile interpolation."""
    if p < 1.0:
        raise StmcaError(f"order p must be >= 1, got {p}")
    a, b = u.samples, v.samples
    if len(a) == len(b):
        diffs = np.abs(a - b)
    else:
        m = max(len(a), len(b))
        levels = (np.arange(m) + 0.5) / m
        diffs = np.abs(_quantiles(a, levels) - _quantiles(b, levels))
    if p == 1.0:
        return float(np.mean(diffs))
    return float(np.mean(diffs**p) ** (1.0 / p))


@dataclass(frozen=True)
class ReferenceKernel:
    """Closed-form fixed-time transition law: density, CDF and optional atom."""

    name: str
    density: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    support: Tuple[float, float]
    atom: Optional[Tuple[float, float]] = None
    mean: Optional[float] = None
    variance: Optional[float] = None
    kinks: Tuple[float, ...] = ()

    def total_mass(self, n_panels: int = 512) -> float:
        lo, hi = self.support
        kinks = self.kinks + ((self.atom[0],) if self.atom else ())
        kinks = tuple(k for k in kinks if lo < k < hi)
        mass = integrate(lambda x: np.asarray(self.density(x), dtype=float),
                         lo, hi, n_panels=n_panels, kinks=kinks)
        if self.atom:
            mass += self.atom[1]
        return mass


def _check_normalized(kernel: ReferenceKernel) -> ReferenceKernel:
    mass = kernel.total_mass()
    if abs(mass - 1.0) > _NORMALIZATION_TOL:
        raise StmcaError(f"kernel {kernel.name} has total mass {mass}")
    return kernel


def _numeric_cdf(density, support, atom=None, n_mesh: int = 4001):
    """Tabulated CDF of a density (plus optional atom) on its support."""
    lo, hi = support
    xs = np.linspace(lo, hi, n_mesh)
    if atom is not None:
        xs = np.unique(np.append(xs, atom[0]))
    nodes, weights = nodes_weights(xs, order=8)
    per = (np.asarray(density(nodes), dtype=float) * weights)
    per = per.reshape(len(xs) - 1, 8).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(per)])
    interp = PchipInterpolator(xs, cum, extrapolate=False)

    def cdf(y):
        y = np.asarray(y, dtype=float)
        out = np.where(y <= lo, 0.0, np.where(y >= hi, cum[-1], interp(np.clip(y, lo, hi))))
        if atom is not None:
            out = out + np.where(y >= atom[0], atom[1], 0.0)
        return out

    return cdf


def reference_kernel(spec_id: str, params: dict, x0: float, t: float) -> ReferenceKernel:
    """Closed-form law of the diffusion at time t started from x0."""
    if t <= 0:
        raise StmcaError("t must be positive")
    if spec_id == "bm":
        sd = math.sqrt(t)
        return _check_normalized(ReferenceKernel(
            name="bm",
            density=lambda y: norm.pdf(y, loc=x0, scale=sd),
            cdf=lambda y: norm.cdf(y, loc=x0, scale=sd),
            support=(x0 - 10 * sd, x0 + 10 * sd),
            mean=x0, variance=t,
        ))
    if spec_id == "ou":
        theta, mu, sigma = params["theta"], params["mu"], params["sigma"]
        m = mu + (x0 - mu) * math.exp(-theta * t)
        var = sigma**2 * (1.0 - math.exp(-2.0 * theta * t)) / (2.0 * theta)
        sd = math.sqrt(var)
        return _check_normalized(ReferenceKernel(
            name="ou",
            density=lambda y: norm.pdf(y, loc=m, scale=sd),
            cdf=lambda y: norm.cdf(y, loc=m, scale=sd),
            support=(m - 10 * sd, m + 10 * sd),
            mean=m, variance=var,
        ))
    if spec_id == "reflected_bm":
        if x0 < 0:
            raise StmcaError("reflected BM lives on [0, inf)")
        sd = math.sqrt(t)

        def density(y):
            y = np.asarray(y, dtype=float)
            val = norm.pdf(y, loc=x0, scale=sd) + norm.pdf(y, loc=-x0, scale=sd)
            return np.where(y >= 0, val, 0.0)

        def cdf(y):
            y = np.asarray(y, dtype=float)
            val = norm.cdf(y, loc=x0, scale=sd) - norm.cdf(-y, loc=x0, scale=sd)
            return np.where(y >= 0, val, 0.0)

        return _check_normalized(ReferenceKernel(
            name="reflected_bm", density=density, cdf=cdf,
            support=(0.0, x0 + 10 * sd),
        ))
    if spec_id == "skew_bm":
        beta = params["beta"]
        sd = math.sqrt(t)
        skew = 2.0 * beta - 1.0
        ax0 = abs(x0)

        def density(y):
            y = np.asarray(y, dtype=float)
            return norm.pdf(y, loc=x0, scale=sd) + np.sign(y) * skew * norm.pdf(
                np.abs(y) + ax0, scale=sd
            )

        def cdf(y):
            y = np.asarray(y, dtype=float)
            base = norm.cdf(y, loc=x0, scale=sd)
            neg = -skew * norm.cdf(np.minimum(y, 0.0), loc=ax0, scale=sd)
            neg0 = -skew * norm.cdf(0.0, loc=ax0, scale=sd)
            pos = skew * (norm.cdf(np.maximum(y, 0.0), loc=-ax0, scale=sd)
                          - norm.cdf(0.0, loc=-ax0, scale=sd))
            return base + np.where(y <= 0, neg, neg0 + pos)

        return _check_normalized(ReferenceKernel(
            name="skew_bm", density=density, cdf=cdf,
            support=(x0 - 10 * sd, x0 + 10 * sd), kinks=(0.0,),
        ))
    if spec_id == "sticky_bm":
        rho = params["rho"]
        if x0 != 0.0:
            raise UnsupportedMethodError(
                "sticky BM reference kernel is implemented for x0 = 0 only"
            )
        theta = rho / 2.0
        root = math.sqrt(2.0 * t)
        atom_mass = float(erfcx(root / theta))

        def density(y):
            y = np.abs(np.asarray(y, dtype=float))
            u = y / root + root / theta
            return erfcx(u) * np.exp(-y * y / (2.0 * t)) / theta

        support = (-10.0 * root, 10.0 * root)
        cdf = _numeric_cdf(density, support, atom=(0.0, atom_mass))
        return _check_normalized(ReferenceKernel(
            name="sticky_bm", density=density, cdf=cdf,
            support=support, atom=(0.0, atom_mass), mean=0.0, kinks=(0.0,),
        ))
    if spec_id == "cir":
        theta, mu, sigma = params["theta"], params["mu"], params["sigma"]
        if x0 <= 0:
            raise StmcaError("CIR needs x0 > 0")
        c = 2.0 * theta / (sigma**2 * (1.0 - math.exp(-theta * t)))
        df = 4.0 * theta * mu / sigma**2
        nc = 2.0 * c * x0 * math.exp(-theta * t)
        dist = ncx2(df, nc)
        m = mu + (x0 - mu) * math.exp(-theta * t)
        var = (x0 * sigma**2 / theta * (math.exp(-theta * t) - math.exp(-2 * theta * t))
               + mu * sigma**2 / (2 * theta) * (1 - math.exp(-theta * t)) ** 2)

        def density(y):
            y = np.asarray(y, dtype=float)
            return np.where(y > 0, 2.0 * c * dist.pdf(2.0 * c * np.maximum(y, 1e-300)), 0.0)

        def cdf(y):
            y = np.asarray(y, dtype=float)
            return np.where(y > 0, dist.cdf(2.0 * c * np.maximum(y, 0.0)), 0.0)

        hi = float(dist.ppf(1.0 - 1e-12)) / (2.0 * c)
        return _check_normalized(ReferenceKernel(
            name="cir", density=density, cdf=cdf,
            support=(0.0, hi), mean=m, variance=var,
        ))
    raise UnsupportedMethodError(f"no reference kernel for {spec_id!r}")


def wasserstein_to_kernel(law: EmpiricalLaw, kernel: ReferenceKernel, n_mesh: int = 8001) -> float:
    """W_1 between an empirical law and a reference kernel via the CDF-area formula.

    W_1 = int |F_emp - F_ref|; the mesh is the union of the sample points and
    a fine uniform grid over the joint support, with F_emp constant and F_ref
    read at interval midpoints.
    """
    lo = min(kernel.support[0], float(law.samples[0]))
    hi = max(kernel.support[1], float(law.samples[-1]))
    xs = np.unique(np.concatenate([np.linspace(lo, hi, n_mesh), law.samples]))
    mids = 0.5 * (xs[:-1] + xs[1:])
    widths = np.diff(xs)
    f_emp = np.searchsorted(law.samples, mids, side="right") / len(law.samples)
    f_ref = np.asarray(kernel.cdf(mids), dtype=float)
    return float(np.sum(np.abs(f_emp - f_ref) * widths))


@dataclass(frozen=True)
class RateFit:
    """Log-log least-squares fit of error against a grid metric."""

    points: tuple
    slope: float
    intercept: float
    r2: float


def rate_fit(points: Sequence[Tuple[float, float]]) -> RateFit:
    """Fit log(error) = slope * log(metric) + intercept over >= 3 grid sizes."""
    pts = tuple((float(m), float(e)) for m, e in points)
    if len(pts) < 3:
        raise StmcaError("rate fit needs at least 3 points")
    metrics = np.array([p[0] for p in pts])
    errors = np.array([p[1] for p in pts])
    if np.any(np.diff(metrics) >= 0):
        raise StmcaError("metric values must be strictly decreasing")
    if np.any(errors <= 0) or np.any(metrics <= 0):
        raise StmcaError("rate fit needs positive metrics and errors")
    lx, ly = np.log(metrics), np.log(errors)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(points=pts, slope=float(slope), intercept=float(intercept), r2=r2)
