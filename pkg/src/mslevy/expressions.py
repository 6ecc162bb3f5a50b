"""Small arithmetic grammar for user-defined scalar coefficients.

Accepted: +, -, *, /, pow, sin, cos, arctan, exp, abs, numeric literals,
and the variables the hosting coefficient declares (x, y, z as
appropriate). Unicode minus/times/divide signs are normalized so
expressions copied from documents parse unchanged. Anything outside the
grammar is rejected at load time.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigurationError

__all__ = ["compile_expression"]

_REWRITES = str.maketrans({"−": "-", "×": "*", "⋅": "*", "÷": "/"})

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "arctan": np.arctan,
    "exp": np.exp,
    "abs": np.abs,
}

_MAX_INT_POW = 8


def _pow(base, exponent):
    # integer powers unrolled to repeated multiplication: np.power on a
    # float64 array with an integer exponent is an order of magnitude
    # slower than chained multiplies on some BLAS/libm builds.
    if isinstance(exponent, (int, float)) and float(exponent).is_integer():
        k = int(exponent)
        if 0 <= k <= _MAX_INT_POW:
            out = 1.0 if k == 0 else base
            for _ in range(k - 1):
                out = out * base
            return out
        if -_MAX_INT_POW <= k < 0:
            return 1.0 / _pow(base, -k)
    return np.power(base, exponent)


def _build(node: ast.AST, variables: tuple[str, ...]):
    if isinstance(node, ast.Expression):
        return _build(node.body, variables)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            value = float(node.value)
            return lambda env: value
        raise ConfigurationError(f"literal {node.value!r} is not a number")
    if isinstance(node, ast.Name):
        if node.id in variables:
            name = node.id
            return lambda env: env[name]
        raise ConfigurationError(
            f"unknown variable {node.id!r}; allowed here: {', '.join(variables)}"
        )
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _build(node.operand, variables)
        if isinstance(node.op, ast.UAdd):
            return inner
        return lambda env: -inner(env)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            base = _build(node.left, variables)
            if not isinstance(node.right, ast.Constant):
                raise ConfigurationError("exponent of ** must be a numeric literal")
            expo = node.right.value
            return lambda env: _pow(base(env), expo)
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ConfigurationError(f"operator {type(node.op).__name__} not in grammar")
        left = _build(node.left, variables)
        right = _build(node.right, variables)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ConfigurationError("only plain calls to grammar functions are allowed")
        fname = node.func.id
        if fname == "pow":
            if len(node.args) != 2:
                raise ConfigurationError("pow takes exactly two arguments")
            base = _build(node.args[0], variables)
            if isinstance(node.args[1], ast.Constant):
                expo = node.args[1].value
                return lambda env: _pow(base(env), expo)
            expof = _build(node.args[1], variables)
            return lambda env: np.power(base(env), expof(env))
        fn = _FUNCS.get(fname)
        if fn is None:
            raise ConfigurationError(f"function {fname!r} not in grammar")
        if len(node.args) != 1:
            raise ConfigurationError(f"{fname} takes exactly one argument")
        arg = _build(node.args[0], variables)
        return lambda env: fn(arg(env))
    raise ConfigurationError(f"syntax {type(node).__name__} not in grammar")


def compile_expression(text: str, variables: tuple[str, ...]):
    """Compile an expression string to fn(env) -> ndarray.

    `env` maps each declared variable name to a float array; all arrays
    must broadcast together. The compiled function is pure.
    """
    if not isinstance(text, str) or not text.strip():
        raise ConfigurationError("coefficient expression must be a nonempty string")
    source = text.translate(_REWRITES)
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse expression {text!r}: {exc}") from exc
    fn = _build(tree, tuple(variables))

    def evaluate(env):
        out = fn(env)
        return np.asarray(out, dtype=float)

    evaluate.source = text
    evaluate.variables = tuple(variables)
    return evaluate
