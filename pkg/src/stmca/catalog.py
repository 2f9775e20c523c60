"""Preset diffusion specifications with analytic scale/speed pairs.

Each preset carries its name and parameters so the moments module can pick
the matching closed forms. All callables are numpy-vectorized.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfi

from .measure import (
    ABSORBING,
    REFLECTING,
    BoundaryBehavior,
    DiffusionSpec,
    IDENTITY_SCALE,
    Interval,
    ScaleFunction,
    SpeedMeasure,
    _cumulative_gauss,
)
from scipy.interpolate import PchipInterpolator


def bm() -> DiffusionSpec:
    """Standard Brownian motion: s = id, m(dx) = 2 dx."""
    return DiffusionSpec(
        domain=Interval(-math.inf, math.inf),
        scale=IDENTITY_SCALE,
        speed=SpeedMeasure(density=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0)),
        preset="bm",
        drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        diffusivity=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    )


def sticky_bm(rho: float) -> DiffusionSpec:
    """Brownian motion with a sticky point at 0: m(dx) = 2 dx + rho delta_0."""
    if rho <= 0:
        raise ValueError("stickiness rho must be positive")
    return DiffusionSpec(
        domain=Interval(-math.inf, math.inf),
        scale=IDENTITY_SCALE,
        speed=SpeedMeasure(
            density=lambda x: np.full_like(np.asarray(x, dtype=float), 2.0),
            atoms=((0.0, float(rho)),),
        ),
        preset="sticky_bm",
        params={"rho": float(rho)},
    )


def skew_bm(beta: float) -> DiffusionSpec:
    """Skew Brownian motion at 0 with upward probability beta."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    b, bc = float(beta), 1.0 - float(beta)

    def s_eval(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, x / b, x / bc)

    def s_deriv(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 1.0 / b, 1.0 / bc)

    def s_inverse(y):
        y = np.asarray(y, dtype=float)
        return np.where(y >= 0, y * b, y * bc)

    def density(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 2.0 * b, 2.0 * bc)

    return DiffusionSpec(
        domain=Interval(-math.inf, math.inf),
        scale=ScaleFunction(eval=s_eval, deriv=s_deriv, inverse=s_inverse),
        speed=SpeedMeasure(density=density),
        preset="skew_bm",
        params={"beta": b},
        kinks=(0.0,),
    )


def ou(theta: float, mu: float, sigma: float) -> DiffusionSpec:
    """Ornstein-Uhlenbeck: dX = theta (mu - X) dt + sigma dB.

    The scale is the imaginary error function erfi(sqrt(theta)/sigma (x - mu))
    in the standard 2/sqrt(pi) normalization; any constant factor cancels in
    scale-difference ratios. Evaluations overflow once the argument exceeds
    about 26, so working windows should keep sqrt(theta)|x - mu|/sigma below that.
    """
    if theta <= 0 or sigma <= 0:
        raise ValueError("theta and sigma must be positive")
    c = math.sqrt(theta) / sigma
    two_over_sqrt_pi = 2.0 / math.sqrt(math.pi)

    def s_eval(x):
        return erfi(c * (np.asarray(x, dtype=float) - mu))

    def s_deriv(x):
        z = c * (np.asarray(x, dtype=float) - mu)
        return c * two_over_sqrt_pi * np.exp(z * z)

    def density(x):
        return 2.0 / (s_deriv(x) * sigma**2)

    return DiffusionSpec(
        domain=Interval(-math.inf, math.inf),
        scale=ScaleFunction(eval=s_eval, deriv=s_deriv),
        speed=SpeedMeasure(density=density),
        preset="ou",
        params={"theta": float(theta), "mu": float(mu), "sigma": float(sigma)},
        drift=lambda x: theta * (mu - np.asarray(x, dtype=float)),
        diffusivity=lambda x: np.full_like(np.asarray(x, dtype=float), float(sigma)),
    )


def cir(theta: float, mu: float, sigma: float, window: tuple, tab_points: int = 20001) -> DiffusionSpec:
    """Cox-Ingersoll-Ross: dX = theta (mu - X) dt + sigma sqrt(X) dB on (0, inf).

    s'(y) = y^(-2 theta mu / sigma^2) exp(2 theta y / sigma^2) up to a constant
    (normalized at y = mu to tame the dynamic range); s itself has no closed
    form and is tabulated over `window`, which must cover every grid used later.
    """
    if theta <= 0 or mu <= 0 or sigma <= 0:
        raise ValueError("theta, mu, sigma must be positive")
    lo, hi = float(window[0]), float(window[1])
    if not 0.0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    q = 2.0 * theta * mu / sigma**2
    k = 2.0 * theta / sigma**2
    c0 = -q * math.log(mu) + k * mu

    def s_deriv(y):
        y = np.asarray(y, dtype=float)
        return np.exp(-q * np.log(y) + k * y - c0)

    anchor = min(max(mu, lo), hi)
    xs = np.unique(np.concatenate([np.linspace(lo, hi, tab_points), [anchor]]))
    # sum outward from the anchor: s' spans many orders of magnitude toward
    # the window edges and a one-sided cumsum would lose strict monotonicity
    s_vals = _cumulative_gauss(s_deriv, xs, anchor=anchor)
    s_interp = PchipInterpolator(xs, s_vals, extrapolate=True)
    inv_interp = PchipInterpolator(s_vals, xs, extrapolate=True)

    def density(y):
        y = np.asarray(y, dtype=float)
        return 2.0 / (s_deriv(y) * sigma**2 * y)

    return DiffusionSpec(
        domain=Interval(0.0, math.inf),
        scale=ScaleFunction(
            eval=lambda x: s_interp(np.asarray(x, dtype=float)),
            deriv=s_deriv,
            kind="tabulated",
            inverse=lambda y: inv_interp(np.asarray(y, dtype=float)),
        ),
        speed=SpeedMeasure(density=density),
        preset="cir",
        params={"theta": float(theta), "mu": float(mu), "sigma": float(sigma)},
        drift=lambda x: theta * (mu - np.asarray(x, dtype=float)),
        diffusivity=lambda x: sigma * np.sqrt(np.asarray(x, dtype=float)),
    )


def bessel(delta: float, boundary: str = REFLECTING) -> DiffusionSpec:
    """Bessel process of dimension delta in (0, 2) on [0, inf).

    s(x) = x^(2-delta)/(2-delta), m(dx) = 2 x^(delta-1) dx; 0 is attainable
    and must carry an explicit reflecting or absorbing behavior.
    """
    if not 0.0 < delta < 2.0:
        raise ValueError("delta must lie in (0, 2)")
    if boundary not in (REFLECTING, ABSORBING):
        raise ValueError("boundary must be reflecting or absorbing")
    p = 2.0 - delta

    def s_eval(x):
        x = np.asarray(x, dtype=float)
        return np.abs(x) ** p / p

    def s_deriv(x):
        x = np.asarray(x, dtype=float)
        return np.abs(x) ** (p - 1.0)

    def s_inverse(y):
        y = np.asarray(y, dtype=float)
        return (p * np.maximum(y, 0.0)) ** (1.0 / p)

    def density(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.abs(x) ** (delta - 1.0)

    return DiffusionSpec(
        domain=Interval(0.0, math.inf, lower_closed=True),
        scale=ScaleFunction(eval=s_eval, deriv=s_deriv, inverse=s_inverse),
        speed=SpeedMeasure(density=density),
        left_boundary=BoundaryBehavior(boundary),
        preset="bessel",
        params={"delta": float(delta)},
        drift=lambda x: (delta - 1.0) / (2.0 * np.asarray(x, dtype=float)),
        diffusivity=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    )


def skew_bessel(delta: float, beta: float) -> DiffusionSpec:
    """Skew (partially reflected) Bessel process of dimension delta on all of R."""
    if not 0.0 < delta < 2.0:
        raise ValueError("delta must lie in (0, 2)")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    p = 2.0 - delta
    b, bc = float(beta), 1.0 - float(beta)

    def s_eval(x):
        x = np.asarray(x, dtype=float)
        mag = np.abs(x) ** p / p
        return np.where(x > 0, mag / b, -mag / bc)

    def s_deriv(x):
        x = np.asarray(x, dtype=float)
        mag = np.abs(x) ** (p - 1.0)
        return np.where(x > 0, mag / b, mag / bc)

    def s_inverse(y):
        y = np.asarray(y, dtype=float)
        mag = (p * np.abs(y) * np.where(y > 0, b, bc)) ** (1.0 / p)
        return np.where(y > 0, mag, -mag)

    def density(x):
        x = np.asarray(x, dtype=float)
        mag = 2.0 * np.abs(x) ** (delta - 1.0)
        return np.where(x > 0, b * mag, bc * mag)

    return DiffusionSpec(
        domain=Interval(-math.inf, math.inf),
        scale=ScaleFunction(eval=s_eval, deriv=s_deriv, inverse=s_inverse),
        speed=SpeedMeasure(density=density),
        preset="skew_bessel",
        params={"delta": float(delta), "beta": b},
        kinks=(0.0,),
    )


PRESETS = {
    "bm": bm,
    "sticky_bm": sticky_bm,
    "skew_bm": skew_bm,
    "ou": ou,
    "cir": cir,
    "bessel": bessel,
    "skew_bessel": skew_bessel,
}
