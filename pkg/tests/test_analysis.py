"""Empirical laws, Wasserstein distances, reference kernels, rate fits."""
import math

import numpy as np
import pytest
from scipy.stats import norm

from stmca.analysis import (
    EmpiricalLaw,
    rate_fit,
    reference_kernel,
    wasserstein_1d,
    wasserstein_to_kernel,
)
from stmca.errors import StmcaError, UnsupportedMethodError

RNG = np.random.default_rng(99)


def _law(samples):
    return EmpiricalLaw(np.asarray(samples, float), horizon=1.0)


def test_empirical_law_validation():
    with pytest.raises(StmcaError):
        EmpiricalLaw(np.array([]), 1.0)
    with pytest.raises(StmcaError):
        EmpiricalLaw(np.array([1.0, np.nan]), 1.0)
    law = _law([3.0, 1.0, 2.0])
    assert np.array_equal(law.samples, [1.0, 2.0, 3.0])


def test_wasserstein_examples():
    u = _law(RNG.normal(size=100))
    assert wasserstein_1d(u, u) == 0.0
    v = _law(u.samples + 0.7)
    for p in (1.0, 2.0, 3.0):
        assert abs(wasserstein_1d(u, v, p) - 0.7) < 1e-12
    assert abs(wasserstein_1d(_law([0.0, 1.0]), _law([0.0, 3.0])) - 1.0) < 1e-15
    with pytest.raises(StmcaError):
        wasserstein_1d(u, v, 0.5)


def test_wasserstein_metric_properties():
    for _ in range(10):
        a = _law(RNG.normal(size=64))
        b = _law(RNG.normal(size=64) + RNG.uniform(-1, 1))
        c = _law(RNG.normal(size=64) * RNG.uniform(0.5, 2.0))
        dab = wasserstein_1d(a, b)
        assert abs(dab - wasserstein_1d(b, a)) < 1e-14
        assert dab + wasserstein_1d(b, c) >= wasserstein_1d(a, c) - 1e-12
        assert wasserstein_1d(a, b) <= wasserstein_1d(a, b, 2.0) + 1e-14


def test_wasserstein_unequal_sizes():
    u = _law(RNG.normal(size=200))
    v = _law(u.samples[::2])  # every other sorted sample: nearly the same law
    assert wasserstein_1d(u, v) < 0.05


@pytest.mark.parametrize("spec_id,params,x0", [
    ("bm", {}, 0.3),
    ("ou", {"theta": 1.0, "mu": 0.0, "sigma": 1.0}, 1.0),
    ("reflected_bm", {}, 0.5),
    ("skew_bm", {"beta": 0.9}, 0.0),
    ("skew_bm", {"beta": 0.3}, 0.4),
    ("sticky_bm", {"rho": 1.0}, 0.0),
    ("cir", {"theta": 5.0, "mu": 5.0, "sigma": 1.0}, 1.0),
])
def test_kernels_normalized(spec_id, params, x0):
    k = reference_kernel(spec_id, params, x0, 1.0)
    assert abs(k.total_mass() - 1.0) < 1e-8


def test_kernel_moments():
    k = reference_kernel("bm", {}, 0.3, 2.0)
    assert k.mean == 0.3 and k.variance == 2.0
    k = reference_kernel("ou", {"theta": 1.0, "mu": 0.0, "sigma": 1.0}, 1.0, 1.0)
    assert abs(k.mean - math.exp(-1.0)) < 1e-12
    assert abs(k.variance - (1.0 - math.exp(-2.0)) / 2.0) < 1e-12
    k = reference_kernel("cir", {"theta": 5.0, "mu": 5.0, "sigma": 1.0}, 1.0, 1.0)
    assert abs(k.mean - (5.0 - 4.0 * math.exp(-5.0))) < 1e-12  # 4.973052...


def test_kernel_cdf_consistent_with_density():
    k = reference_kernel("skew_bm", {"beta": 0.7}, 0.2, 1.0)
    xs = np.linspace(-3.0, 3.0, 25)
    h = 1e-6
    num = (np.asarray(k.cdf(xs + h)) - np.asarray(k.cdf(xs - h))) / (2 * h)
    assert np.max(np.abs(num - np.asarray(k.density(xs)))) < 1e-5
    assert abs(float(k.cdf(50.0)) - 1.0) < 1e-12


def test_sticky_atom_monotonicity():
    masses_t = [reference_kernel("sticky_bm", {"rho": 1.0}, 0.0, t).atom[1]
                for t in (0.5, 1.0, 2.0)]
    assert masses_t[0] > masses_t[1] > masses_t[2]
    masses_r = [reference_kernel("sticky_bm", {"rho": r}, 0.0, 1.0).atom[1]
                for r in (0.5, 1.0, 2.0)]
    assert masses_r[0] < masses_r[1] < masses_r[2]


def test_sticky_kernel_restricted_to_atom_start():
    with pytest.raises(UnsupportedMethodError):
        reference_kernel("sticky_bm", {"rho": 1.0}, 0.5, 1.0)
    with pytest.raises(UnsupportedMethodError):
        reference_kernel("geometric_bm", {}, 1.0, 1.0)


def test_wasserstein_to_kernel_gaussian():
    k = reference_kernel("bm", {}, 0.0, 1.0)
    n = 20000
    # samples placed exactly at the Gaussian quantiles: W1 is near its floor
    q = norm.ppf((np.arange(n) + 0.5) / n)
    law = EmpiricalLaw(q, 1.0)
    assert wasserstein_to_kernel(law, k) < 2e-3
    shifted = EmpiricalLaw(q + 0.5, 1.0)
    assert abs(wasserstein_to_kernel(shifted, k) - 0.5) < 5e-3


def test_rate_fit_power_laws():
    ms = [0.4, 0.2, 0.1, 0.05]
    fit = rate_fit([(m, 3.0 * m) for m in ms])
    assert abs(fit.slope - 1.0) < 1e-12 and abs(fit.r2 - 1.0) < 1e-12
    fit_half = rate_fit([(m, math.sqrt(m)) for m in ms])
    assert abs(fit_half.slope - 0.5) < 1e-12


def test_rate_fit_validation():
    with pytest.raises(StmcaError):
        rate_fit([(0.2, 1.0), (0.1, 0.5)])
    with pytest.raises(StmcaError):
        rate_fit([(0.1, 1.0), (0.2, 0.5), (0.05, 0.2)])
    with pytest.raises(StmcaError):
        rate_fit([(0.4, 1.0), (0.2, 0.0), (0.1, 0.2)])
