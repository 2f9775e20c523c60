"""Scale functions, speed measures and diffusion specifications.

A one-dimensional regular diffusion is determined by a strictly increasing
scale function s and a locally finite speed measure m (density plus atoms).
This module builds the (s, m) pair from SDE coefficients, changes a spec to
natural scale, classifies finite boundaries and checks the non-explosion
condition. Everything is immutable after construction and safe to share
between worker threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import (
    ClassificationError,
    InvalidCoefficientError,
    QuadratureError,
    StmcaError,
)
from .quadrature import integrate, nodes_weights, panel_breakpoints

UNREACHABLE = "unreachable"
ABSORBING = "absorbing"
REFLECTING = "reflecting"

EXIT = "exit"
REGULAR = "regular"
NATURAL = "natural"
ENTRANCE = "entrance"


@dataclass(frozen=True)
class Interval:
    """State interval, possibly with closed (attainable) finite endpoints."""

    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = False

    def __post_init__(self):
        if not self.lower < self.upper:
            raise StmcaError(f"empty interval [{self.lower}, {self.upper}]")
        if self.lower_closed and not math.isfinite(self.lower):
            raise StmcaError("closed lower endpoint must be finite")
        if self.upper_closed and not math.isfinite(self.upper):
            raise StmcaError("closed upper endpoint must be finite")

    def contains(self, x: float, strict: bool = False) -> bool:
        lo_ok = x > self.lower or (not strict and self.lower_closed and x == self.lower)
        hi_ok = x < self.upper or (not strict and self.upper_closed and x == self.upper)
        return lo_ok and hi_ok

    @property
    def length(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ScaleFunction:
    """Strictly increasing s with right-derivative s'.

    kind is one of identity | piecewise-analytic | sde-derived | tabulated;
    tabulated scales carry monotone (PCHIP) interpolation semantics. An
    explicit inverse is optional; natural-scale transforms fall back to
    bracketed root finding when it is absent.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    kind: str = "piecewise-analytic"
    inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x):
        return self.eval(x)


IDENTITY_SCALE = ScaleFunction(
    eval=lambda x: np.asarray(x, dtype=float),
    deriv=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    kind="identity",
    inverse=lambda y: np.asarray(y, dtype=float),
)


@dataclass(frozen=True)
class SpeedMeasure:
    """Absolutely continuous part (density w.r.t. dx) plus point atoms."""

    density: Callable[[np.ndarray], np.ndarray]
    atoms: tuple = ()

    def __post_init__(self):
        locs = [a[0] for a in self.atoms]
        if sorted(locs) != locs or len(set(locs)) != len(locs):
            raise StmcaError("atoms must be sorted with distinct locations")
        if any(a[1] <= 0 for a in self.atoms):
            raise StmcaError("atom masses must be positive")

    def atom_mass(self, lo: float, hi: float, include_lower=False, include_upper=False) -> float:
        total = 0.0
        for loc, mass in self.atoms:
            if (lo < loc < hi) or (include_lower and loc == lo) or (include_upper and loc == hi):
                total += mass
        return total

    def mass_of(
        self,
        lo: float,
        hi: float,
        include_lower: bool = False,
        include_upper: bool = False,
        n_panels: int = 64,
    ) -> float:
        """m((lo, hi)) with optional endpoint atoms; density part by quadrature."""
        if hi < lo:
            raise StmcaError(f"reversed interval ({lo}, {hi})")
        dens = 0.0
        if hi > lo:
            kinks = tuple(a[0] for a in self.atoms if lo < a[0] < hi)
            dens = integrate(self.density, lo, hi, n_panels=n_panels, kinks=kinks)
        return dens + self.atom_mass(lo, hi, include_lower, include_upper)


@dataclass(frozen=True)
class BoundaryBehavior:
    kind: str = UNREACHABLE

    def __post_init__(self):
        if self.kind not in (UNREACHABLE, ABSORBING, REFLECTING):
            raise StmcaError(f"unknown boundary kind {self.kind!r}")


@dataclass(frozen=True)
class BoundaryClass:
    """Feller type of a finite endpoint."""

    kind: str

    def __post_init__(self):
        if self.kind not in (EXIT, REGULAR, NATURAL, ENTRANCE):
            raise StmcaError(f"unknown boundary class {self.kind!r}")


@dataclass(frozen=True)
class DiffusionSpec:
    """The (s, m) pair plus boundary behaviors; fully determines the law."""

    domain: Interval
    scale: ScaleFunction
    speed: SpeedMeasure
    left_boundary: BoundaryBehavior = BoundaryBehavior(UNREACHABLE)
    right_boundary: BoundaryBehavior = BoundaryBehavior(UNREACHABLE)
    preset: Optional[str] = None
    params: dict = field(default_factory=dict)
    drift: Optional[Callable] = None
    diffusivity: Optional[Callable] = None
    # points where scale or speed density are non-smooth (e.g. a skew point);
    # quadrature meshes must place panel breaks there
    kinks: tuple = ()

    def __post_init__(self):
        for loc, _ in self.speed.atoms:
            if not self.domain.contains(loc):
                raise StmcaError(f"atom at {loc} outside the domain")
        for bb, closed, name in (
            (self.left_boundary, self.domain.lower_closed, "lower"),
            (self.right_boundary, self.domain.upper_closed, "upper"),
        ):
            if bb.kind != UNREACHABLE and not closed:
                raise StmcaError(
                    f"{bb.kind} behavior requires a finite closed {name} endpoint"
                )


def _cumulative_gauss(f, xs: np.ndarray, anchor: Optional[float] = None) -> np.ndarray:
    """Cumulative integral of f over the mesh xs (per-interval Gauss rule).

    With an anchor (which must be a mesh point) the sum runs outward from it
    in both directions. This keeps resolution near the anchor even when the
    integrand spans many orders of magnitude toward the window edges, where a
    single left-to-right cumsum would swamp the small increments and break
    strict monotonicity.
    """
    nodes, weights = nodes_weights(xs, order=8)
    per = (np.asarray(f(nodes), dtype=float) * weights).reshape(len(xs) - 1, 8).sum(axis=1)
    if not np.all(np.isfinite(per)):
        raise QuadratureError("non-finite scale integrand on the tabulation mesh")
    vals = np.zeros(len(xs))
    if anchor is None:
        vals[1:] = np.cumsum(per)
        return vals
    ia = int(np.searchsorted(xs, anchor))
    if ia >= len(xs) or xs[ia] != anchor:
        raise StmcaError("anchor must be a tabulation mesh point")
    vals[ia + 1:] = np.cumsum(per[ia:])
    vals[:ia] = -np.cumsum(per[:ia][::-1])[::-1]
    return vals


def from_sde(
    drift: Callable,
    diffusivity: Callable,
    domain: Interval,
    anchor: float,
    tab_window: Optional[tuple] = None,
    tab_points: int = 8001,
) -> DiffusionSpec:
    """Build (s, m) from SDE coefficients mu, sigma.

    s'(x) = exp(-int_anchor^x 2 mu / sigma^2) and m has density 2/(s' sigma^2),
    no atoms. With tab_window given, s and the inner exponent are tabulated on
    a dense mesh (eagerly, at construction) and interpolated monotonically;
    otherwise every evaluation integrates from the anchor (slow but windowless).
    """
    if not domain.contains(anchor):
        raise StmcaError(f"anchor {anchor} outside the domain")

    def sigma2(x):
        s = np.asarray(diffusivity(np.asarray(x, dtype=float)), dtype=float)
        return s * s

    def log_sprime_integrand(x):
        return 2.0 * np.asarray(drift(np.asarray(x, dtype=float)), dtype=float) / sigma2(x)

    if tab_window is not None:
        lo, hi = float(tab_window[0]), float(tab_window[1])
        if not (domain.contains(lo) and domain.contains(hi) and lo < anchor < hi):
            raise StmcaError("tab_window must lie in the domain and contain the anchor")
        xs = np.unique(np.concatenate([np.linspace(lo, hi, tab_points), [anchor]]))
        sig = np.asarray(diffusivity(xs), dtype=float)
        if np.any(sig <= 0):
            raise InvalidCoefficientError(
                f"sigma <= 0 at x={xs[sig <= 0][0]!r}"
            )
        exponent = _cumulative_gauss(log_sprime_integrand, xs, anchor=anchor)
        exp_interp = PchipInterpolator(xs, exponent, extrapolate=True)

        def sprime(x):
            return np.exp(-exp_interp(np.asarray(x, dtype=float)))

        s_vals = _cumulative_gauss(sprime, xs, anchor=anchor)
        s_interp = PchipInterpolator(xs, s_vals, extrapolate=True)
        inv_interp = PchipInterpolator(s_vals, xs, extrapolate=True)
        scale = ScaleFunction(
            eval=lambda x: s_interp(np.asarray(x, dtype=float)),
            deriv=sprime,
            kind="tabulated",
            inverse=lambda y: inv_interp(np.asarray(y, dtype=float)),
        )
    else:
        def sprime_scalar(x):
            if x == anchor:
                return 1.0
            a, b = (anchor, x) if x > anchor else (x, anchor)
            val = integrate(log_sprime_integrand, a, b, n_panels=64)
            return math.exp(-val if x > anchor else val)

        def sprime(x):
            x = np.asarray(x, dtype=float)
            if x.ndim == 0:
                return sprime_scalar(float(x))
            return np.array([sprime_scalar(v) for v in x.ravel()]).reshape(x.shape)

        def s_scalar(x):
            if x == anchor:
                return 0.0
            a, b = (anchor, x) if x > anchor else (x, anchor)
            val = integrate(sprime, a, b, n_panels=64)
            return val if x > anchor else -val

        def s_eval(x):
            x = np.asarray(x, dtype=float)
            if x.ndim == 0:
                return s_scalar(float(x))
            return np.array([s_scalar(v) for v in x.ravel()]).reshape(x.shape)

        scale = ScaleFunction(eval=s_eval, deriv=sprime, kind="sde-derived")

    def density(x):
        x = np.asarray(x, dtype=float)
        sig2 = sigma2(x)
        if np.any(sig2 <= 0):
            raise InvalidCoefficientError(
                f"sigma <= 0 at x={x[np.atleast_1d(sig2 <= 0)][0]!r}"
                if x.ndim else f"sigma <= 0 at x={float(x)}"
            )
        return 2.0 / (np.asarray(scale.deriv(x), dtype=float) * sig2)

    return DiffusionSpec(
        domain=domain,
        scale=scale,
        speed=SpeedMeasure(density=density),
        drift=drift,
        diffusivity=diffusivity,
    )


def _numeric_inverse(scale: ScaleFunction, domain: Interval):
    """Bracketed inversion of a strictly increasing scale."""

    def inv_scalar(y: float) -> float:
        lo = domain.lower if math.isfinite(domain.lower) else -1.0
        hi = domain.upper if math.isfinite(domain.upper) else 1.0
        width = max(hi - lo, 1.0)
        for _ in range(200):
            if scale.eval(lo) <= y <= scale.eval(hi):
                break
            if y < scale.eval(lo):
                if math.isfinite(domain.lower):
                    raise StmcaError(f"value {y} below the scale image")
                lo -= width
            else:
                if math.isfinite(domain.upper):
                    raise StmcaError(f"value {y} above the scale image")
                hi += width
            width *= 2.0
        else:
            raise StmcaError(f"could not bracket scale inverse at {y}")
        return brentq(lambda x: float(scale.eval(x)) - y, lo, hi, xtol=1e-14)

    def inverse(y):
        y = np.asarray(y, dtype=float)
        if y.ndim == 0:
            return inv_scalar(float(y))
        return np.array([inv_scalar(v) for v in y.ravel()]).reshape(y.shape)

    return inverse


def to_natural_scale(spec: DiffusionSpec):
    """Rewrite a DiffusionSpec in the coordinate y = s(x); returns (spec, forward, inverse).

    The transformed diffusion has identity scale, domain s(I) and speed equal
    to the pushforward of m (density m_c(s^-1)/s'(s^-1), atoms moved with
    unchanged mass).
    """
    if spec.scale.kind == "identity":
        ident = lambda v: np.asarray(v, dtype=float)
        return spec, ident, ident
    forward = spec.scale.eval
    inverse = spec.scale.inverse or _numeric_inverse(spec.scale, spec.domain)

    def edge(x, closed):
        if math.isfinite(x):
            try:
                v = float(forward(x))
            except Exception:
                return math.copysign(math.inf, x), False
            return (v, closed) if math.isfinite(v) else (math.copysign(math.inf, x), False)
        return math.copysign(math.inf, x), False

    lo, lo_closed = edge(spec.domain.lower, spec.domain.lower_closed)
    hi, hi_closed = edge(spec.domain.upper, spec.domain.upper_closed)
    new_domain = Interval(lo, hi, lo_closed, hi_closed)

    def new_density(y):
        x = np.asarray(inverse(y), dtype=float)
        return np.asarray(spec.speed.density(x), dtype=float) / np.asarray(
            spec.scale.deriv(x), dtype=float
        )

    new_atoms = tuple((float(forward(loc)), mass) for loc, mass in spec.speed.atoms)
    new_spec = DiffusionSpec(
        domain=new_domain,
        scale=IDENTITY_SCALE,
        speed=SpeedMeasure(density=new_density, atoms=new_atoms),
        left_boundary=spec.left_boundary,
        right_boundary=spec.right_boundary,
    )
    return new_spec, forward, inverse


def _feller_integrals(spec: DiffusionSpec, endpoint: float, probe_c: float, offset: float):
    """Truncated Feller integrals over the interval at distance `offset` from the endpoint.

    With the region translated to the endpoint, both double integrals reduce to
    single m-integrals: I weighs m by the scale distance to the endpoint, II by
    the scale distance to the probe.
    """
    s = spec.scale.eval
    dens = spec.speed.density
    if probe_c > endpoint:
        lo, hi = endpoint + offset, probe_c
        s_lo = float(s(lo))
        s_hi = float(s(hi))
        w_one = lambda x: np.asarray(s(x), dtype=float) - s_lo
        w_two = lambda x: s_hi - np.asarray(s(x), dtype=float)
    else:
        lo, hi = probe_c, endpoint - offset
        s_lo = float(s(lo))
        s_hi = float(s(hi))
        w_one = lambda x: s_hi - np.asarray(s(x), dtype=float)
        w_two = lambda x: np.asarray(s(x), dtype=float) - s_lo
    kinks = tuple(a[0] for a in spec.speed.atoms if lo < a[0] < hi)
    one = integrate(lambda x: w_one(x) * np.asarray(dens(x), dtype=float), lo, hi, kinks=kinks)
    two = integrate(lambda x: w_two(x) * np.asarray(dens(x), dtype=float), lo, hi, kinks=kinks)
    for loc, mass in spec.speed.atoms:
        if lo < loc < hi:
            one += mass * float(w_one(loc))
            two += mass * float(w_two(loc))
    return one, two


_DIVERGENCE_CAP = 1e12
_STABLE_RTOL = 1e-3


def classify_boundary(spec: DiffusionSpec, endpoint: float, probe_c: float) -> BoundaryClass:
    """Four-way Feller classification of a finite endpoint.

    Each integral is scanned over shrinking offsets (relative 1e-2 halving down
    to 1e-10); a scan that stabilizes is finite, one that blows past 1e12 is
    infinite, anything else raises instead of guessing.
    """
    if not math.isfinite(endpoint):
        raise StmcaError("classify_boundary needs a finite endpoint")
    span = abs(probe_c - endpoint)
    if span <= 0 or not spec.domain.contains(probe_c):
        raise StmcaError("probe must lie strictly inside the domain near the endpoint")
    eps = 1e-2
    ones, twos = [], []
    while eps >= 1e-10:
        one, two = _feller_integrals(spec, endpoint, probe_c, eps * span)
        ones.append(one)
        twos.append(two)
        eps *= 0.5

    def verdict(seq, name):
        last, prev = seq[-1], seq[-2]
        if abs(last - prev) <= _STABLE_RTOL * max(abs(last), 1e-300):
            return False  # finite
        if last > _DIVERGENCE_CAP:
            return True  # infinite
        # still growing at the smallest offset: clear divergence even if the
        # absolute cap was not reached (e.g. 1/x^2 blow-up over a short probe)
        tail = seq[-6:]
        if all(b > a * 1.02 for a, b in zip(tail, tail[1:])):
            return True
        raise ClassificationError(
            f"integral {name} neither stabilized nor diverged (last={last:.3e})"
        )

    one_inf = verdict(ones, "I")
    two_inf = verdict(twos, "II")
    if one_inf and two_inf:
        return BoundaryClass(NATURAL)
    if one_inf:
        return BoundaryClass(ENTRANCE)
    if two_inf:
        return BoundaryClass(EXIT)
    return BoundaryClass(REGULAR)


def check_nonexplosion(spec: DiffusionSpec, k1: float, sample_points) -> bool:
    """True iff m_c(x) >= k1 s'(x) / (1 + s(x)^2) at every sample point.

    On natural scale this is the condition m(dx) >= k1 dx/(1+x^2); atoms only
    add mass and are ignored.
    """
    xs = np.asarray(sample_points, dtype=float)
    dens = np.asarray(spec.speed.density(xs), dtype=float)
    s = np.asarray(spec.scale.eval(xs), dtype=float)
    sp = np.asarray(spec.scale.deriv(xs), dtype=float)
    return bool(np.all(dens >= k1 * sp / (1.0 + s * s)))
