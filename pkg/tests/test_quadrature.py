"""Composite quadrature: exactness, kink splitting, graded singularities."""
import numpy as np
import pytest

from stmca.errors import QuadratureError
from stmca.quadrature import integrate, nodes_weights, panel_breakpoints


def test_polynomial_exactness():
    # order-10 Gauss integrates degree-19 polynomials exactly per panel
    val = integrate(lambda x: 7.0 * x**6 - 3.0 * x**2 + 1.0, -1.0, 2.0, n_panels=4)
    exact = (2.0**7 - (-1.0) ** 7) - (2.0**3 - (-1.0) ** 3) + 3.0
    assert abs(val - exact) < 1e-12


def test_kink_splitting_is_exact_for_piecewise_linear():
    f = lambda x: np.where(np.asarray(x) < 0.3, 1.0, 5.0)
    val = integrate(f, 0.0, 1.0, n_panels=8, kinks=(0.3,))
    assert abs(val - (0.3 + 5.0 * 0.7)) < 1e-12


def test_graded_mesh_resolves_endpoint_singularity():
    # integral of x^(-1/2) over (0, 1) is 2; nodes never touch the endpoint
    val = integrate(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, n_panels=64)
    assert abs(val - 2.0) < 1e-4
    # without grading the plain composite rule is far worse
    coarse = integrate(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, n_panels=64,
                       grade_left=False, grade_right=False)
    assert abs(val - 2.0) < 0.01 * abs(coarse - 2.0)


def test_nonfinite_integrand_reports_abscissa():
    with pytest.raises(QuadratureError, match="non-finite"):
        integrate(lambda x: np.where(np.asarray(x) > 0.5, np.inf, 1.0), 0.0, 1.0)


def test_empty_interval_is_zero():
    assert integrate(lambda x: np.ones_like(x), 1.0, 1.0) == 0.0
    assert integrate(lambda x: np.ones_like(x), 2.0, 1.0) == 0.0


def test_nodes_strictly_interior_and_weights_sum():
    breaks = panel_breakpoints(0.0, 1.0, n_panels=16, kinks=(0.25,))
    assert 0.25 in breaks.tolist()
    nodes, weights = nodes_weights(breaks)
    assert np.all(nodes > 0.0) and np.all(nodes < 1.0)
    assert abs(np.sum(weights) - 1.0) < 1e-13


def test_reversed_breakpoints_rejected():
    with pytest.raises(QuadratureError):
        panel_breakpoints(1.0, 0.0)
