"""Coefficient expression compiler: grammar, precedence, vectorization."""
import math

import numpy as np
import pytest

from stmca.errors import ConfigError
from stmca.expressions import compile_expression


def test_basic_arithmetic():
    f = compile_expression("2 * x + 1")
    assert f(3.0) == 7.0
    g = compile_expression("(x - 1) / 4")
    assert g(9.0) == 2.0


def test_caret_means_power_with_usual_precedence():
    f = compile_expression("x^2 + 1")
    assert f(4.0) == 17.0  # not x^(2+1) = 64
    g = compile_expression("2*x^2")
    assert g(3.0) == 18.0
    h = compile_expression("x**2 + 1")
    assert h(4.0) == 17.0


def test_functions_and_constants():
    f = compile_expression("exp(-x^2 / 2) / sqrt(2 * pi)")
    assert abs(f(0.0) - 1.0 / math.sqrt(2 * math.pi)) < 1e-15
    assert abs(compile_expression("log(e)")(0.0) - 1.0) < 1e-15
    assert compile_expression("abs(x)")(-3.5) == 3.5
    assert compile_expression("-x")(2.0) == -2.0
    assert compile_expression("+x")(2.0) == 2.0


def test_vectorized_evaluation():
    f = compile_expression("x^2 - x")
    xs = np.linspace(-2.0, 2.0, 9)
    assert np.allclose(f(xs), xs**2 - xs)


def test_rejects_unknown_syntax():
    for bad in (
        "y + 1",            # unknown name
        "sin(x)",           # unknown function
        "__import__('os')", # call on a name
        "x // 2",           # floor division
        "x if x > 0 else 0",
        "x and 1",
        "[1, 2]",
        "'abc'",
        "",
        "x +",
    ):
        with pytest.raises(ConfigError):
            compile_expression(bad)
