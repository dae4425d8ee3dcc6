"""Restricted arithmetic used in catalog fields and layout documents.

Only numbers, names bound in the environment, the four arithmetic operators,
powers, unary signs, parentheses and whitelisted function calls are
accepted.  Unit suffixes are handled by the caller before evaluation.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Callable, Mapping

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.Mod: operator.mod,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}

BASE_FUNCTIONS: dict[str, Callable[..., float]] = {
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "asin": math.asin,
    "acos": math.acos,
    "atan": math.atan,
    "degrees": math.degrees,
    "radians": math.radians,
    "abs": abs,
    "min": min,
    "max": max,
}

BASE_NAMES = {"pi": math.pi}


class ExpressionError(ValueError):
    """Raised for syntax errors, unknown names and illegal constructs."""


def evaluate(
    text: str | float | int,
    names: Mapping[str, float] | None = None,
    functions: Mapping[str, Callable[..., float]] | None = None,
) -> float:
    if isinstance(text, bool):
        raise ExpressionError("booleans are not numbers")
    if isinstance(text, (int, float)):
        return float(text)
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"invalid expression {text!r}") from None
    env = dict(BASE_NAMES)
    env.update(names or {})
    funcs = dict(BASE_FUNCTIONS)
    funcs.update(functions or {})
    try:
        value = _eval(tree.body, env, funcs)
    except ZeroDivisionError:
        raise ExpressionError(f"division by zero in {text!r}") from None
    except (ValueError, OverflowError, TypeError) as exc:
        if isinstance(exc, ExpressionError):
            raise
        raise ExpressionError(f"{text!r}: {exc}") from None
    value = float(value)
    if not math.isfinite(value):
        raise ExpressionError(f"{text!r} is not finite")
    return value


def _eval(node, env, funcs):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        raise ExpressionError(f"unsupported literal {node.value!r}")
    if isinstance(node, ast.Name):
        try:
            return env[node.id]
        except KeyError:
            raise ExpressionError(f"unknown name {node.id!r}") from None
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, env, funcs), _eval(node.right, env, funcs))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval(node.operand, env, funcs))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = funcs.get(node.func.id)
        if fn is None:
            raise ExpressionError(f"unknown function {node.func.id!r}")
        return fn(*(_eval(a, env, funcs) for a in node.args))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:40]}")


def free_names(text: str) -> set[str]:
    """Names referenced by an expression (used for dependency checks)."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ExpressionError(f"invalid expression {text!r}") from None
    called = {n.func.id for n in ast.walk(tree) if isinstance(n, ast.Call) and isinstance(n.func, ast.Name)}
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} - called
