"""
边界恒等式验证

在解析曲线的 Gauss 点上检查应变、旋度、法向导数之间的边界恒等式：

    strain_rot     (ε(v)n, τ) = ½ rot v - k (v·τ)            （要求 v·n = 0）
    rot_normal     rot v = (∂v/∂n, τ) + k (v·τ)              （要求 v·n = 0）
    strain_normal  (ε(v)n, τ) = ½ (∂v/∂n, τ) - ½ k (v·τ)     （要求 v·n = 0）
    normal_trace   (ε(v)n, n) = (∂v/∂n, n) = -k (v·n)        （要求 v_τ = 0, div v = 0）

二维中 (rot v × n, τ) 就是标量旋度 rot v = ∂₁v₂ - ∂₂v₁。
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

import config
from src.mixed_ns.errors import HypothesisViolationError
from src.mixed_ns.geometry import AnalyticBoundary, circle, line


logger = logging.getLogger(__name__)

IDENTITIES = ('strain_rot', 'rot_normal', 'strain_normal', 'normal_trace')


@dataclass(frozen=True)
class AnalyticField:
    """
    解析向量场

    value(x, y) → (m,2)，jacobian(x, y) → (m,2,2)，J[i,j] = ∂_j v_i
    """
    name: str
    value: Callable
    jacobian: Callable

    def __call__(self, x, y) -> np.ndarray:
        return np.asarray(self.value(x, y), dtype=float)

    def grad(self, x, y) -> np.ndarray:
        return np.asarray(self.jacobian(x, y), dtype=float)

    def divergence(self, x, y) -> np.ndarray:
        J = self.grad(x, y)
        return J[:, 0, 0] + J[:, 1, 1]

    def curl(self, x, y) -> np.ndarray:
        J = self.grad(x, y)
        return J[:, 1, 0] - J[:, 0, 1]

    def strain(self, x, y) -> np.ndarray:
        J = self.grad(x, y)
        return 0.5 * (J + np.swapaxes(J, 1, 2))

    def self_check(self, points: np.ndarray, step: float = 1e-5) -> float:
        """中心差分检查梯度，返回最大相对误差"""
        x, y = points[:, 0], points[:, 1]
        J = self.grad(x, y)
        fd = np.empty_like(J)
        fd[:, :, 0] = (self(x + step, y) - self(x - step, y)) / (2 * step)
        fd[:, :, 1] = (self(x, y + step) - self(x, y - step)) / (2 * step)
        error = np.max(np.abs(fd - J)) / max(1.0, np.max(np.abs(J)))
        if error > config.FIELD_SELF_CHECK_TOL:
            logger.warning("场 %s 的梯度与差分不一致: %.3e", self.name, error)
        return float(error)


def curve_samples(curve: AnalyticBoundary, samples: int = None):
    """曲线参数范围上的 Gauss-Legendre 点：返回 (点, 法向, 切向, 曲率)"""
    samples = samples or config.IDENTITY_SAMPLES
    x, _ = np.polynomial.legendre.leggauss(samples)
    s0, s1 = curve.s_range
    s = s0 + 0.5 * (x + 1.0) * (s1 - s0)
    n, tau, k = curve.frame(s)
    points = np.atleast_2d(curve.point(s))
    return points, n, tau, k


def signed_residuals(field: AnalyticField, curve: AnalyticBoundary, samples: int = None) -> Dict[str, np.ndarray]:
    """
    各恒等式的逐点残差（不检查前提条件）

    normal_trace 取两组残差中绝对值较大者。
    """
    points, n, tau, k = curve_samples(curve, samples)
    x, y = points[:, 0], points[:, 1]
    v = field(x, y)
    J = field.grad(x, y)
    eps_n = np.einsum('mij,mj->mi', field.strain(x, y), n)
    dv_dn = np.einsum('mij,mj->mi', J, n)
    rot = field.curl(x, y)
    v_tau = np.sum(v * tau, axis=1)
    v_n = np.sum(v * n, axis=1)

    en_tau = np.sum(eps_n * tau, axis=1)
    dn_tau = np.sum(dv_dn * tau, axis=1)
    en_n = np.sum(eps_n * n, axis=1)
    dn_n = np.sum(dv_dn * n, axis=1)

    trace_a = en_n - dn_n
    trace_b = dn_n + k * v_n
    return {
        'strain_rot': en_tau - 0.5 * rot + k * v_tau,
        'rot_normal': rot - dn_tau - k * v_tau,
        'strain_normal': en_tau - 0.5 * dn_tau + 0.5 * k * v_tau,
        'normal_trace': np.where(np.abs(trace_a) >= np.abs(trace_b), trace_a, trace_b),
    }


def _check_hypothesis(field: AnalyticField, curve: AnalyticBoundary, samples: int, identity: str):
    points, n, tau, _ = curve_samples(curve, samples)
    x, y = points[:, 0], points[:, 1]
    v = field(x, y)
    tol = config.HYPOTHESIS_TOL
    if identity == 'normal_trace':
        tangential = np.max(np.abs(np.sum(v * tau, axis=1)))
        div = np.max(np.abs(field.divergence(x, y)))
        if tangential > tol:
            raise HypothesisViolationError(
                f"{field.name} 在 {curve.name} 上 v_τ ≠ 0（最大 {tangential:.3e}）")
        if div > tol:
            raise HypothesisViolationError(
                f"{field.name} 在 {curve.name} 上 div v ≠ 0（最大 {div:.3e}）")
    else:
        normal = np.max(np.abs(np.sum(v * n, axis=1)))
        if normal > tol:
            raise HypothesisViolationError(
                f"{field.name} 在 {curve.name} 上 v·n ≠ 0（最大 {normal:.3e}）")


def _residual(identity: str, field, curve, samples) -> float:
    _check_hypothesis(field, curve, samples, identity)
    return float(np.max(np.abs(signed_residuals(field, curve, samples)[identity])))


def residual_identity_strain_rot(field: AnalyticField, curve: AnalyticBoundary, samples: int = None) -> float:
    """max |(ε(v)n, τ) - ½ rot v + k(v·τ)|"""
    return _residual('strain_rot', field, curve, samples)


def residual_identity_rot_normal(field: AnalyticField, curve: AnalyticBoundary, samples: int = None) -> float:
    """max |rot v - (∂v/∂n, τ) - k(v·τ)|"""
    return _residual('rot_normal', field, curve, samples)


def residual_identity_strain_normal(field: AnalyticField, curve: AnalyticBoundary, samples: int = None) -> float:
    """max |(ε(v)n, τ) - ½(∂v/∂n, τ) + ½k(v·τ)|"""
    return _residual('strain_normal', field, curve, samples)


def residual_identity_normal_trace(field: AnalyticField, curve: AnalyticBoundary, samples: int = None) -> float:
    """max(|(ε(v)n,n) - (∂v/∂n,n)|, |(∂v/∂n,n) + k(v·n)|)"""
    return _residual('normal_trace', field, curve, samples)


RESIDUALS = {
    'strain_rot': residual_identity_strain_rot,
    'rot_normal': residual_identity_rot_normal,
    'strain_normal': residual_identity_strain_normal,
    'normal_trace': residual_identity_normal_trace,
}


# ============ 内置解析场 ============

def rigid_rotation() -> AnalyticField:
    """v = (-y, x)"""
    def value(x, y):
        return np.column_stack([-y, x])

    def jac(x, y):
        J = np.zeros((len(x), 2, 2))
        J[:, 0, 1] = -1.0
        J[:, 1, 0] = 1.0
        return J

    return AnalyticField('rotation(-y,x)', value, jac)


def scaled_rotation() -> AnalyticField:
    """v = ψ(x,y)·(-y, x)，ψ = 1 + x² + 3xy - y³"""
    def psi(x, y):
        return 1.0 + x ** 2 + 3.0 * x * y - y ** 3

    def psi_grad(x, y):
        return 2.0 * x + 3.0 * y, 3.0 * x - 3.0 * y ** 2

    def value(x, y):
        p = psi(x, y)
        return np.column_stack([-y * p, x * p])

    def jac(x, y):
        p = psi(x, y)
        px, py = psi_grad(x, y)
        J = np.empty((len(x), 2, 2))
        J[:, 0, 0] = -y * px
        J[:, 0, 1] = -y * py - p
        J[:, 1, 0] = x * px + p
        J[:, 1, 1] = x * py
        return J

    return AnalyticField('psi*(-y,x)', value, jac)


def radial_field() -> AnalyticField:
    """v = (x, y)/r²（无散、无旋）"""
    def value(x, y):
        r2 = x ** 2 + y ** 2
        return np.column_stack([x / r2, y / r2])

    def jac(x, y):
        r2 = x ** 2 + y ** 2
        J = np.empty((len(x), 2, 2))
        J[:, 0, 0] = (r2 - 2 * x * x) / r2 ** 2
        J[:, 0, 1] = -2 * x * y / r2 ** 2
        J[:, 1, 0] = -2 * x * y / r2 ** 2
        J[:, 1, 1] = (r2 - 2 * y * y) / r2 ** 2
        return J

    return AnalyticField('radial(x,y)/r^2', value, jac)


def shear_field() -> AnalyticField:
    """v = (y, 0)"""
    def value(x, y):
        return np.column_stack([y, np.zeros_like(x)])

    def jac(x, y):
        J = np.zeros((len(x), 2, 2))
        J[:, 0, 1] = 1.0
        return J

    return AnalyticField('shear(y,0)', value, jac)


def constant_field() -> AnalyticField:
    """v = (1, 0)"""
    def value(x, y):
        return np.column_stack([np.ones_like(x), np.zeros_like(x)])

    def jac(x, y):
        return np.zeros((len(x), 2, 2))

    return AnalyticField('constant(1,0)', value, jac)


@dataclass(frozen=True)
class IdentityCase:
    identity: str
    field: AnalyticField
    curve: AnalyticBoundary


def builtin_suite() -> List[IdentityCase]:
    """内置的 (恒等式, 场, 曲线) 组合"""
    unit = circle(1.0, name='circle(R=1)')
    big = circle(2.0, name='circle(R=2)')
    inner = circle(config.ANNULUS_INNER_RADIUS, side=-1, name='annulus inner circle')
    flat = line((0.0, 0.0), (1.0, 0.0), name='y=0 (domain y>0)')

    tangential_cases = [
        (rigid_rotation(), unit), (rigid_rotation(), big),
        (scaled_rotation(), unit), (scaled_rotation(), big),
        (shear_field(), flat), (constant_field(), flat),
    ]
    cases = [IdentityCase(identity, fld, crv)
             for identity in ('strain_rot', 'rot_normal', 'strain_normal')
             for fld, crv in tangential_cases]
    cases += [IdentityCase('normal_trace', radial_field(), crv) for crv in (unit, big, inner)]
    return cases


def verify_identities(samples: int = None) -> pd.DataFrame:
    """
    运行内置验证集

    Returns:
        DataFrame，列为 identity, field, curve, max_residual, passed
    """
    rows = []
    for case in builtin_suite():
        residual = RESIDUALS[case.identity](case.field, case.curve, samples)
        rows.append({
            'identity': case.identity,
            'field': case.field.name,
            'curve': case.curve.name,
            'max_residual': residual,
            'passed': residual < config.HYPOTHESIS_TOL,
        })
    df = pd.DataFrame(rows)
    logger.info("边界恒等式验证: %d/%d 通过", int(df['passed'].sum()), len(df))
    return df
