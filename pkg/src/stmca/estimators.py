"""Local-time statistic and stickiness-parameter estimation.

From discrete observations X_{(i-1)/n} of a path, the scaled statistic
L_hat[g, alpha] = (n^alpha / n) * sum g(n^alpha * X) approximates the local
time at the atom, and rho_hat = 2 lambda(g) / L_hat * (occupation fraction of
the atom) estimates the stickiness parameter. Paths whose statistic is zero
carry no information and are counted as rejections rather than errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import StmcaError
from .quadrature import integrate
from .walk import PathRecord, values_at

_LAMBDA_TOL = 1e-10


@dataclass(frozen=True)
class TestFunction:
    """Nonnegative integrable g vanishing near 0, with its exact integral."""

    __test__ = False  # not a pytest collectible despite the name

    eval: Callable[[np.ndarray], np.ndarray]
    lambda_g: float
    support_note: str = ""

    def __call__(self, x):
        return self.eval(x)


def validate_lambda(g: TestFunction, lo: float, hi: float, kinks=()) -> float:
    """Quadrature check of lambda_g over [lo, hi] (must cover the support)."""
    val = integrate(lambda x: np.asarray(g.eval(x), dtype=float), lo, hi,
                    n_panels=256, kinks=tuple(kinks))
    if abs(val - g.lambda_g) > _LAMBDA_TOL * max(1.0, abs(g.lambda_g)):
        raise StmcaError(
            f"declared integral {g.lambda_g} disagrees with quadrature {val}"
        )
    return val


def indicator_band(inner: float = 1.0, outer: float = 5.0, height: Optional[float] = None) -> TestFunction:
    """g = height * 1{inner < |x| < outer}; default height makes lambda(g) = 1."""
    if not 0.0 < inner < outer:
        raise StmcaError("need 0 < inner < outer")
    if height is None:
        height = 1.0 / (2.0 * (outer - inner))
    if height <= 0:
        raise StmcaError("height must be positive")
    lam = 2.0 * (outer - inner) * height

    def g_eval(x):
        ax = np.abs(np.asarray(x, dtype=float))
        return np.where((ax > inner) & (ax < outer), height, 0.0)

    g = TestFunction(
        eval=g_eval,
        lambda_g=lam,
        support_note=f"{height} on {inner} < |x| < {outer}",
    )
    validate_lambda(g, -outer - 1.0, outer + 1.0,
                    kinks=(-outer, -inner, inner, outer))
    return g


def sample_times(n: int, t: float) -> np.ndarray:
    """Observation times (i-1)/n for i = 1 .. floor(n t)."""
    if n < 1 or t <= 0:
        raise StmcaError("need n >= 1 and t > 0")
    m = int(math.floor(n * t))
    if m < 1:
        raise StmcaError("horizon too short: no observation times")
    return np.arange(m, dtype=float) / n


def path_samples(path: PathRecord, n: int, t: float) -> np.ndarray:
    return values_at(path, sample_times(n, t))


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise StmcaError(f"alpha must lie in (0, 1), got {alpha}")


def local_time_stat(
    path: PathRecord,
    n: int,
    alpha: float,
    g: TestFunction,
    t: float,
    samples: Optional[np.ndarray] = None,
) -> float:
    """(n^alpha / n) * sum_{i=1}^{floor(nt)} g(n^alpha * X_{(i-1)/n})."""
    _check_alpha(alpha)
    xs = path_samples(path, n, t) if samples is None else samples
    scale = float(n) ** alpha
    return scale / n * float(np.sum(np.asarray(g.eval(scale * xs), dtype=float)))


def observation_fraction(
    path: PathRecord,
    n: int,
    alpha: float,
    g: TestFunction,
    t: float,
    samples: Optional[np.ndarray] = None,
) -> float:
    """Fraction of observations that land in the support of g(n^alpha *)."""
    _check_alpha(alpha)
    xs = path_samples(path, n, t) if samples is None else samples
    scale = float(n) ** alpha
    vals = np.asarray(g.eval(scale * xs), dtype=float)
    return float(np.count_nonzero(vals)) / len(xs)


def stickiness_estimator(
    path: PathRecord,
    n: int,
    alpha: float,
    g: TestFunction,
    t: float,
    atom: float = 0.0,
    samples: Optional[np.ndarray] = None,
) -> Optional[float]:
    """2 lambda(g) / L_hat * (1/n) sum 1{X = atom}; None when L_hat = 0 (rejection)."""
    xs = path_samples(path, n, t) if samples is None else samples
    l_hat = local_time_stat(path, n, alpha, g, t, samples=xs)
    if l_hat == 0.0:
        return None
    occupation = float(np.count_nonzero(xs == atom)) / n
    return 2.0 * g.lambda_g / l_hat * occupation


@dataclass(frozen=True)
class EstimationReport:
    """Monte Carlo summary of the stickiness estimator over one path set."""

    rho_hat_mc: float
    s2_mc: float
    sigma_mc: float
    acc_hat: float
    rej_count: int
    n_mc: int

    @property
    def rejected_all(self) -> bool:
        return self.rej_count == self.n_mc

    def __post_init__(self):
        if not 0 <= self.rej_count <= self.n_mc:
            raise StmcaError("rej_count out of range")
        if not self.rejected_all and not 0.0 <= self.acc_hat <= 1.0 + 1e-12:
            raise StmcaError("acc_hat out of [0, 1]")


def mc_report(
    estimates: Sequence[Optional[float]],
    acc_values: Sequence[float],
) -> EstimationReport:
    """Aggregate per-path estimates (None = rejected) and observation fractions."""
    if len(estimates) == 0:
        raise StmcaError("empty estimate list")
    if len(acc_values) != len(estimates):
        raise StmcaError("acc_values must align with estimates")
    kept = np.asarray([e for e in estimates if e is not None], dtype=float)
    n_mc = len(estimates)
    rej = n_mc - len(kept)
    acc = float(np.mean(np.asarray(acc_values, dtype=float)))
    if len(kept) == 0:
        return EstimationReport(
            rho_hat_mc=math.nan, s2_mc=math.nan, sigma_mc=math.nan,
            acc_hat=acc, rej_count=rej, n_mc=n_mc,
        )
    mean = float(np.mean(kept))
    s2 = float(np.var(kept, ddof=1)) if len(kept) > 1 else 0.0
    return EstimationReport(
        rho_hat_mc=mean, s2_mc=s2, sigma_mc=math.sqrt(s2),
        acc_hat=acc, rej_count=rej, n_mc=n_mc,
    )


def estimate_over_paths(
    paths: Sequence[PathRecord],
    n: int,
    alpha: float,
    g: TestFunction,
    t: float,
    atom: float = 0.0,
) -> EstimationReport:
    """Run the estimator over a path set and aggregate."""
    estimates = []
    accs = []
    for path in paths:
        xs = path_samples(path, n, t)
        estimates.append(stickiness_estimator(path, n, alpha, g, t, atom=atom, samples=xs))
        accs.append(observation_fraction(path, n, alpha, g, t, samples=xs))
    return mc_report(estimates, accs)
