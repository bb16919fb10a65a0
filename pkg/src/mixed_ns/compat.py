"""
初始时刻相容性检查

    ⟨w̄, u⟩ = ⟨f(0),u⟩ + Σ⟨φᵢ(0),u_n⟩ + Σ⟨φᵢ(0),u⟩
             - [A₀ z₀ + k(z₀,u) + ⟨(z₀·∇)z₀,u⟩ (+ ⟨(W·∇)z₀,u⟩ + ⟨(z₀·∇)W,u⟩)]

标准模式 z₀ = v₀（w0bar / w1bar），扰动模式 z₀ 为初始扰动、W 为基础解（w2bar / w3）。
泛函是否属于 H 由离散 L₂-Riesz 范数在网格加密下的增长指数判定。
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.sparse.linalg as spla

import config
from src.mixed_ns.coercivity import compute_shift
from src.mixed_ns.fem import interpolate
from src.mixed_ns.forms import ProblemSpec, assemble_convection, data_functional
from src.mixed_ns.spaces import PROBLEM_I, PROBLEM_II, DofMap


logger = logging.getLogger(__name__)

FUNCTIONALS = {
    (PROBLEM_I, False): 'w0bar', (PROBLEM_II, False): 'w1bar',
    (PROBLEM_I, True): 'w2bar', (PROBLEM_II, True): 'w3',
}
VERDICTS = ('in_H', 'not_in_H', 'inconclusive')


def functional_id(variant: str, perturbation: bool) -> str:
    return FUNCTIONALS[(variant, bool(perturbation))]


def _initial_vector(setup, func: Optional[Callable]) -> np.ndarray:
    if func is None:
        return np.zeros(setup.dofmap.n_velocity)
    return interpolate(setup.dofmap.topo, func, 0.0)


def assemble_compat_functional(spec: ProblemSpec, setup, shift_k: float,
                               base: Optional[Callable] = None) -> np.ndarray:
    """
    在约束空间的测试函数上装配 w̄（返回约化向量）

    Args:
        spec: 问题描述；v0 在扰动模式下是初始扰动 z₀
        setup: ProblemSetup
        shift_k: 平移常数
        base: 扰动模式下的基础解 W(x, y, t)；None 为标准模式
    """
    system, dofmap = setup.system, setup.dofmap
    z0 = _initial_vector(setup, spec.v0)
    out = data_functional(system, spec, 0.0)
    c1, _ = assemble_convection(z0, system)
    out -= system.principal @ z0 + shift_k * (system.mass @ z0) + c1 @ z0
    if base is not None:
        W0 = _initial_vector(setup, base)
        cw1, cw2 = assemble_convection(W0, system)
        out -= cw1 @ z0 + cw2 @ z0
    return dofmap.reduce(out)


def operator_form_functional(spec: ProblemSpec, setup, shift_k: float, lifting) -> np.ndarray:
    """
    w₀ = F(0) - (A + kM + A_U(0) + B(0)) z₀，z₀ = v₀ - U(0)

    与 w̄₀ 只差 -(U′(0),·) + k(U(0),·)
    """
    system, dofmap = setup.system, setup.dofmap
    U, dU = lifting.terms(0)
    z0 = _initial_vector(setup, spec.v0) - U
    cu1, cu2 = assemble_convection(U, system)
    cz1, _ = assemble_convection(z0, system)
    F0 = data_functional(system, spec, 0.0) - system.mass @ dU - system.principal @ U - cu1 @ U
    out = F0 - (system.principal @ z0 + shift_k * (system.mass @ z0) + cu1 @ z0 + cu2 @ z0 + cz1 @ z0)
    return dofmap.reduce(out)


def cross_check(spec: ProblemSpec, setup, shift_k: float, lifting) -> float:
    """两种形式的相容性泛函之差（应为舍入误差量级）"""
    system, dofmap = setup.system, setup.dofmap
    U, dU = lifting.terms(0)
    bar = assemble_compat_functional(spec, setup, shift_k)
    op = operator_form_functional(spec, setup, shift_k, lifting)
    expected = bar + dofmap.reduce(-(system.mass @ dU) + shift_k * (system.mass @ U))
    diff = float(np.max(np.abs(op - expected))) if len(op) else 0.0
    return diff / max(1.0, float(np.max(np.abs(op))) if len(op) else 1.0)


def riesz_l2_norm(functional: np.ndarray, dofmap: DofMap, mass) -> float:
    """约束空间上解 M r = b，返回 √(bᵀr)"""
    b = np.asarray(functional, dtype=float)
    if b.shape != (dofmap.n_free,):
        raise ValueError(f"泛函长度 {b.shape} 与约化自由度 {dofmap.n_free} 不匹配")
    if not np.any(b):
        return 0.0
    T = dofmap.T
    reduced = (T.T @ mass @ T).tocsc()
    r = spla.splu(reduced).solve(b)
    return float(np.sqrt(max(float(b @ r), 0.0)))


def growth_exponent(h: Sequence[float], norms: Sequence[float]) -> float:
    """log(范数) 对 log(1/h) 的最小二乘斜率"""
    h = np.asarray(h, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if not np.any(norms):
        return 0.0
    floor = np.finfo(float).tiny
    slope, _ = np.polyfit(np.log(1.0 / h), np.log(np.maximum(norms, floor)), 1)
    return float(slope)


def classify(h: Sequence[float], norms: Sequence[float]) -> str:
    if not np.any(norms):
        return 'in_H'
    if len(norms) < config.COMPAT_MIN_LEVELS:
        return 'inconclusive'
    slope = growth_exponent(h, norms)
    if slope <= config.COMPAT_IN_H_SLOPE:
        return 'in_H'
    if slope >= config.COMPAT_NOT_IN_H_SLOPE:
        return 'not_in_H'
    return 'inconclusive'


@dataclass(frozen=True)
class CompatibilityReport:
    """相容性报告"""
    variant: str
    functional: str
    h: List[float]
    norms: List[float]
    growth_exponent: float
    verdict: str
    shift_k: List[float] = field(default_factory=list)
    cross_check: Optional[float] = None

    @property
    def finest_norm(self) -> float:
        return float(self.norms[-1]) if self.norms else 0.0

    def to_lines(self) -> List[str]:
        lines = [
            f"variant = {self.variant}",
            f"functional = {self.functional}",
            f"levels = {len(self.norms)}",
        ]
        for i, (h, norm) in enumerate(zip(self.h, self.norms)):
            lines.append(f"level.{i}.h = {h:.12e}")
            lines.append(f"level.{i}.riesz_l2_norm = {norm:.12e}")
        for i, k in enumerate(self.shift_k):
            lines.append(f"level.{i}.shift_k = {k:.12e}")
        lines += [
            f"growth_exponent = {self.growth_exponent:.12e}",
            f"verdict = {self.verdict}",
            f"finest_norm = {self.finest_norm:.12e}",
            "note = norm values depend on the discrete shift constant",
        ]
        if self.cross_check is not None:
            lines.append(f"operator_form_cross_check = {self.cross_check:.12e}")
        return lines


def compat_verdict(spec: ProblemSpec, meshes: Sequence, base: Optional[Callable] = None,
                   analytic: Optional[Dict] = None, shift_k: Optional[float] = None,
                   with_cross_check: bool = False) -> CompatibilityReport:
    """
    在一组逐步加密的网格上计算 Riesz 范数并给出判定

    Args:
        spec: 问题描述
        meshes: 由粗到细的网格
        base: 扰动模式的基础解 W(x, y, t)
        analytic: 解析边界
        shift_k: 指定平移常数；None 时每层网格单独计算
        with_cross_check: 在最细网格上比较两种形式的泛函（需要构造提升）
    """
    from src.mixed_ns.evolution import prepare
    from src.mixed_ns.lifting import build_lifting

    perturbation = base is not None
    fid = functional_id(spec.variant, perturbation)
    hs, norms, shifts = [], [], []
    setup, k = None, 0.0
    for mesh in meshes:
        setup = prepare(spec, mesh, analytic)
        if shift_k is None:
            w0 = _initial_vector(setup, base) if perturbation else None
            k = compute_shift(setup.system, setup.dofmap, setup.frames, base_field=w0).shift_k
        else:
            k = float(shift_k)
        b = assemble_compat_functional(spec, setup, k, base)
        hs.append(mesh.h)
        norms.append(riesz_l2_norm(b, setup.dofmap, setup.system.mass))
        shifts.append(k)
        logger.info("相容性 %s: h=%.4e, ‖%s‖ = %.6e", mesh.name, mesh.h, fid, norms[-1])

    check = None
    if with_cross_check and setup is not None and not perturbation:
        short = spec.with_data(t_final=2.0 * spec.dt)
        lifting = build_lifting(short, setup.mesh, setup.frames, setup.dofmap, setup.system)
        check = cross_check(spec, setup, k, lifting)

    slope = growth_exponent(hs, norms)
    verdict = classify(hs, norms)
    report = CompatibilityReport(variant=spec.variant, functional=fid, h=hs, norms=norms,
                                 growth_exponent=slope, verdict=verdict, shift_k=shifts,
                                 cross_check=check)
    if verdict != 'in_H':
        logger.warning("相容性判定 %s（增长指数 %.3f）", verdict, slope)
    return report


def single_level_report(spec: ProblemSpec, setup, shift_k: float) -> CompatibilityReport:
    """
    只用当前网格的相容性报告

    范数为 0 时判定 in_H，否则为 inconclusive（判定需要网格族，见 compat_verdict）。
    """
    b = assemble_compat_functional(spec, setup, shift_k)
    norm = riesz_l2_norm(b, setup.dofmap, setup.system.mass)
    h = [float(setup.mesh.h)]
    return CompatibilityReport(variant=spec.variant, functional=functional_id(spec.variant, False),
                               h=h, norms=[norm], growth_exponent=0.0 if norm == 0.0 else float('nan'),
                               verdict=classify(h, [norm]), shift_k=[float(shift_k)])
