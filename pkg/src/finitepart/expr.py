"""Tiny arithmetic expression strings for config files and CLI flags.

Grammar: ``+ - * / ^``, parentheses, numeric literals, one free variable
(``x`` or ``z``) and the functions ``ln``, ``exp``, ``sin``, ``cos``, ``abs``,
``re``, ``im`` and ``cutoff(v, R)`` (1 inside ``|v| <= R``, 0 outside).
Expressions are validated against a whitelist of AST nodes, so arbitrary
Python cannot sneak in through a config file.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

from .errors import ExpressionError

__all__ = ["compile_expression"]


def _cutoff(v, radius):
    return np.where(np.abs(v) <= radius, 1.0, 0.0)


_FUNCTIONS = {
    "ln": np.log,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "re": np.real,
    "im": np.imag,
    "cutoff": _cutoff,
}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


def _validate(node: ast.AST, variable: str) -> None:
    if isinstance(node, ast.Expression):
        _validate(node.body, variable)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        _validate(node.left, variable)
        _validate(node.right, variable)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        _validate(node.operand, variable)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError(f"unknown function in expression: {ast.dump(node.func)}")
        if node.keywords:
            raise ExpressionError("keyword arguments are not part of the grammar")
        for arg in node.args:
            _validate(arg, variable)
    elif isinstance(node, ast.Name):
        if node.id != variable:
            raise ExpressionError(
                f"unknown name {node.id!r}; the free variable here is {variable!r}"
            )
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"literal {node.value!r} is not a number")
    else:
        raise ExpressionError(f"unsupported syntax: {type(node).__name__}")


def compile_expression(text: str, variable: str = "x") -> Callable:
    """Compile ``text`` into a callable of one numeric (scalar or array) argument."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _validate(tree, variable)
    code = compile(tree, "<expression>", "eval")
    env = dict(_FUNCTIONS)

    def evaluate(value):
        local = dict(env)
        local[variable] = value
        try:
            out = eval(code, {"__builtins__": {}}, local)  # noqa: S307 - whitelisted AST
        except (ArithmeticError, ValueError) as exc:
            raise ExpressionError(f"expression {text!r} failed at {value!r}: {exc}") from None
        return out

    evaluate.__name__ = f"expr_{variable}"
    evaluate.expression = text  # type: ignore[attr-defined]
    return evaluate
