import numpy as np
import pytest

from mslevy.errors import ConfigurationError
from mslevy.expressions import compile_expression


def test_unicode_operators_normalized():
    fn = compile_expression("−pow(x,3)+x×y÷2", ("x", "y"))
    x = np.array([1.0, -2.0])
    y = np.array([4.0, 6.0])
    np.testing.assert_allclose(fn({"x": x, "y": y}), -x**3 + x * y / 2)


def test_functions_and_pow_operator():
    fn = compile_expression("sin(x) + cos(y) - arctan(x)*exp(-y) + abs(x)**3", ("x", "y"))
    x = np.array([0.3, -1.2])
    y = np.array([0.5, 2.0])
    want = np.sin(x) + np.cos(y) - np.arctan(x) * np.exp(-y) + np.abs(x) ** 3
    np.testing.assert_allclose(fn({"x": x, "y": y}), want)


def test_constant_expression_broadcasts():
    fn = compile_expression("1", ("x", "y"))
    out = fn({"x": np.zeros(5), "y": np.zeros(5)})
    assert float(out) == 1.0


def test_negative_integer_power():
    fn = compile_expression("pow(x, -2)", ("x",))
    np.testing.assert_allclose(fn({"x": np.array([2.0])}), [0.25])


@pytest.mark.parametrize(
    "bad",
    [
        "__import__('os')",
        "x.real",
        "lambda: 1",
        "tan(x)",
        "w + 1",
        "x % 2",
        "pow(x)",
        "sin(x, y)",
        "[1, 2]",
        "",
        "x ** y",
    ],
)
def test_grammar_rejections(bad):
    with pytest.raises(ConfigurationError):
        compile_expression(bad, ("x", "y"))


def test_compiled_function_is_pure():
    fn = compile_expression("x*x + y", ("x", "y"))
    env = {"x": np.array([2.0]), "y": np.array([1.0])}
    a = fn(env)
    b = fn(env)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(env["x"], [2.0])
