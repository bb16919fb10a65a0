"""
数据表达式：运行配置中 f、φᵢ、hᵢ、v₀ 的算术表达式

语法：+ - * / ^，函数 sin cos exp，常数 pi e，变量 x y t。
向量数据写成两个用逗号分隔的表达式。
"""
import re
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from src.mixed_ns.errors import ConfigValidationError


X, Y, T = sympy.symbols('x y t', real=True)

NAMESPACE = {
    'x': X, 'y': Y, 't': T,
    'pi': sympy.pi, 'e': sympy.E,
    'sin': sympy.sin, 'cos': sympy.cos, 'exp': sympy.exp,
}

_TRANSFORMS = standard_transformations + (convert_xor,)
_IDENT = re.compile(r'[A-Za-z_][A-Za-z_0-9]*')
_ALLOWED_CHARS = re.compile(r'^[0-9A-Za-z_.+\-*/^()\s]*$')


def parse_scalar(text: str, name: str = 'expression') -> sympy.Expr:
    """解析一个标量表达式，只允许白名单中的名字"""
    text = text.strip()
    if not text:
        raise ConfigValidationError(name, "表达式为空")
    if not _ALLOWED_CHARS.match(text):
        raise ConfigValidationError(name, f"表达式含有非法字符: {text!r}")
    # 科学计数法（1e-3）中的 e 属于数字
    stripped = re.sub(r'\d+\.?\d*[eE][+-]?\d+', '0', text)
    unknown = sorted(set(_IDENT.findall(stripped)) - set(NAMESPACE))
    if unknown:
        raise ConfigValidationError(name, f"未知名字 {', '.join(unknown)}；可用: x y t pi e sin cos exp")
    try:
        expr = parse_expr(text, local_dict=dict(NAMESPACE), transformations=_TRANSFORMS)
    except (SyntaxError, TypeError, ValueError, sympy.SympifyError) as e:
        raise ConfigValidationError(name, f"无法解析表达式 {text!r}: {e}")
    if not isinstance(expr, sympy.Expr) or expr.free_symbols - {X, Y, T}:
        raise ConfigValidationError(name, f"表达式 {text!r} 不是 x, y, t 的标量函数")
    return expr


def _compile(expr: sympy.Expr) -> Callable:
    func = sympy.lambdify((X, Y, T), expr, modules='numpy')

    def evaluate(x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        value = np.asarray(func(x, y, t), dtype=float)
        return np.broadcast_to(value, np.broadcast(x, y).shape).copy()

    return evaluate


@dataclass(frozen=True)
class DataExpression:
    """已编译的数据表达式，调用形式 expr(x, y, t)"""
    text: str
    exprs: Tuple[sympy.Expr, ...]
    funcs: Tuple[Callable, ...]

    @property
    def is_vector(self) -> bool:
        return len(self.exprs) == 2

    @property
    def is_zero(self) -> bool:
        return all(e == 0 for e in self.exprs)

    def __call__(self, x, y, t=0.0):
        if self.is_vector:
            return tuple(f(x, y, t) for f in self.funcs)
        return self.funcs[0](x, y, t)

    def at(self, t: float) -> Callable:
        """固定时间的函数 (x, y)"""
        return lambda x, y: self(x, y, t)


def compile_expression(text: str, name: str = 'expression', components: int = None) -> DataExpression:
    """
    编译标量或向量表达式

    Args:
        text: 表达式文本
        name: 配置项名称（用于报错）
        components: 1 或 2；None 时按逗号个数推断
    """
    parts = [p for p in text.split(',')]
    if components is not None and len(parts) != components:
        kind = '标量' if components == 1 else '向量（两个分量用逗号分隔）'
        raise ConfigValidationError(name, f"需要{kind}，得到 {len(parts)} 个分量")
    if len(parts) not in (1, 2):
        raise ConfigValidationError(name, f"表达式分量个数应为 1 或 2，得到 {len(parts)}")
    exprs = tuple(parse_scalar(p, name) for p in parts)
    return DataExpression(text=text.strip(), exprs=exprs, funcs=tuple(_compile(e) for e in exprs))


def from_sympy(exprs, text: str = None) -> DataExpression:
    """由 sympy 表达式直接构造（用于制造解）"""
    exprs = tuple(sympy.sympify(e) for e in (exprs if isinstance(exprs, (tuple, list)) else (exprs,)))
    text = text or ', '.join(str(e) for e in exprs)
    return DataExpression(text=text, exprs=exprs, funcs=tuple(_compile(e) for e in exprs))


def eval_scalar(func, x, y, t=0.0) -> np.ndarray:
    """按 x 的形状计算标量数据"""
    x = np.asarray(x, dtype=float)
    value = np.asarray(func(x, np.asarray(y, dtype=float), t), dtype=float)
    if value.ndim == x.ndim + 1 and value.shape[-1] == 1:
        value = value[..., 0]
    return np.broadcast_to(value, x.shape).copy()


def eval_vector(func, x, y, t=0.0) -> np.ndarray:
    """按 x 的形状计算向量数据，返回 (..., 2)"""
    x = np.asarray(x, dtype=float)
    value = func(x, np.asarray(y, dtype=float), t)
    if isinstance(value, (tuple, list)):
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in value], axis=-1)
    value = np.asarray(value, dtype=float)
    return np.broadcast_to(value, x.shape + (2,)).copy()
