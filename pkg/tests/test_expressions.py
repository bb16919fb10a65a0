"""
测试数据表达式解析
"""
import numpy as np
import pytest

from src.mixed_ns.errors import ConfigValidationError
from src.mixed_ns.expressions import compile_expression, eval_scalar, eval_vector


def test_scalar_expression():
    expr = compile_expression('sin(pi*y)*t')
    assert not expr.is_vector
    assert float(expr(0.0, 0.5, 1.0)) == pytest.approx(1.0)


def test_power_and_scientific_notation():
    expr = compile_expression('2^3 + 1e-3*x')
    assert float(expr(1.0, 0.0)) == pytest.approx(8.001)


def test_vector_expression():
    expr = compile_expression('x, -y', components=2)
    assert expr.is_vector
    u, v = expr(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    np.testing.assert_allclose(u, [1.0, 2.0])
    np.testing.assert_allclose(v, [-3.0, -4.0])


def test_constant_broadcasts():
    expr = compile_expression('3')
    values = eval_scalar(expr, np.zeros((2, 3)), np.zeros((2, 3)))
    assert values.shape == (2, 3)
    assert np.all(values == 3.0)
    assert compile_expression('0, 0').is_zero


def test_eval_vector_shape():
    expr = compile_expression('1, y')
    values = eval_vector(expr, np.zeros((4, 3)), np.ones((4, 3)))
    assert values.shape == (4, 3, 2)
    assert np.all(values[..., 1] == 1.0)


@pytest.mark.parametrize('text', ['foo(x)', 'x + z', 'x; y', '', 'log(x)'])
def test_rejected_expressions(text):
    with pytest.raises(ConfigValidationError):
        compile_expression(text, 'data.f')


def test_component_count():
    with pytest.raises(ConfigValidationError) as exc:
        compile_expression('x', 'data.h1', components=2)
    assert exc.value.field == 'data.h1'
