"""Tiny arithmetic expression compiler for drift/diffusivity coefficients.

Grammar: numbers, the variable x, constants pi and e, binary + - * / ^
(caret means power), unary minus, and the functions exp, log, sqrt, abs.
Parsed with the ast module and compiled to a numpy-vectorized callable; any
other syntax is rejected, so config files cannot execute arbitrary code.
"""
from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np

from .errors import ConfigError

_FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_CONSTANTS = {
    "pi": math.pi,
    "e": math.e,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _compile_node(node):
    if isinstance(node, ast.Expression):
        return _compile_node(node.body)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            val = float(node.value)
            return lambda x: val
        raise ConfigError(f"unsupported literal {node.value!r}")
    if isinstance(node, ast.Name):
        if node.id == "x":
            return lambda x: x
        if node.id in _CONSTANTS:
            val = _CONSTANTS[node.id]
            return lambda x: val
        raise ConfigError(f"unknown name {node.id!r} (only x, pi, e)")
    if isinstance(node, ast.UnaryOp):
        inner = _compile_node(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda x: -inner(x)
        if isinstance(node.op, ast.UAdd):
            return inner
        raise ConfigError("unsupported unary operator")
    if isinstance(node, ast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ConfigError(f"unsupported operator {type(node.op).__name__}")
        left = _compile_node(node.left)
        right = _compile_node(node.right)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords or len(node.args) != 1:
            raise ConfigError("only single-argument calls to exp/log/sqrt/abs")
        fn = _FUNCTIONS.get(node.func.id)
        if fn is None:
            raise ConfigError(f"unknown function {node.func.id!r}")
        arg = _compile_node(node.args[0])
        return lambda x: fn(arg(x))
    raise ConfigError(f"unsupported expression element {type(node).__name__}")


def compile_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an expression in the variable x to a vectorized callable."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("expression must be a nonempty string")
    try:
        # rewrite caret to ** before parsing: ast would otherwise give ^ the
        # (lower) xor precedence, so x^2 + 1 would parse as x^(2+1)
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from exc
    fn = _compile_node(tree)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        out = fn(x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy() if np.ndim(out) == 0 and x.ndim else np.asarray(out, dtype=float)

    return evaluate
