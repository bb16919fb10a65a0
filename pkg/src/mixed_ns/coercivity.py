"""
强制性：Korn 常数 β 与平移常数 k

主部 A₀ 满足 ⟨A₀u,u⟩ ≥ δ‖u‖²_{H¹} - k‖u‖²_{L₂}，取 δ = β/2；
k 由 (A₀ - δG, M) 的最小广义特征值给出。边界平直且无摩擦时 k = 0。

β 取自含 ν 的体积项。α = 0 时整个矩阵束与 ν 成正比，k - SHIFT_SAFETY 也与 ν 成正比，
于是 k/ν（viscous_shift）= 常数 + SHIFT_SAFETY/ν，随 ν 增大不增。
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import config
from src.mixed_ns.errors import CoercivityError
from src.mixed_ns.forms import BOUNDARY_TERMS, DiscreteSystem
from src.mixed_ns.geometry import BoundaryFrame
from src.mixed_ns.spaces import PROBLEM_I, PROBLEM_II, DofMap


logger = logging.getLogger(__name__)

SHIFT_SYMBOLS = {
    (PROBLEM_I, False): 'k0', (PROBLEM_II, False): 'k1',
    (PROBLEM_I, True): 'k2', (PROBLEM_II, True): 'k3',
}


@dataclass(frozen=True)
class CoercivityReport:
    """强制性报告"""
    variant: str
    korn_beta: float
    shift_k: float
    margin_delta: float
    flat_shortcut: bool
    perturbation: bool = False
    eig_metadata: Dict[str, object] = field(default_factory=dict)
    nu: float = 1.0

    @property
    def shift_symbol(self) -> str:
        return SHIFT_SYMBOLS[(self.variant, self.perturbation)]

    @property
    def viscous_shift(self) -> float:
        """k/ν"""
        return self.shift_k / self.nu

    def to_lines(self) -> List[str]:
        """键值文本块"""
        lines = [
            f"variant = {self.variant}",
            f"korn_beta = {self.korn_beta:.12e}",
            f"margin_delta = {self.margin_delta:.12e}",
            f"shift_symbol = {self.shift_symbol}",
            f"shift_k = {self.shift_k:.12e}",
            f"viscous_shift = {self.viscous_shift:.12e}",
            f"flat_shortcut = {str(self.flat_shortcut).lower()}",
        ]
        for key in sorted(self.eig_metadata):
            value = self.eig_metadata[key]
            if isinstance(value, float):
                value = f"{value:.12e}"
            lines.append(f"eig.{key} = {value}")
        return lines


def _reduce(matrix, dofmap: DofMap) -> sp.csr_matrix:
    T = dofmap.T
    reduced = (T.T @ sp.csr_matrix(matrix) @ T).tocsr()
    return (0.5 * (reduced + reduced.T)).tocsr()


def _start_vector(n: int) -> np.ndarray:
    return np.random.default_rng(config.EIG_SEED).standard_normal(n)


def smallest_eigenvalue(A: sp.spmatrix, B: sp.spmatrix, definite: bool = True,
                        preconditioner: Optional[sp.spmatrix] = None) -> Dict[str, object]:
    """
    对称广义特征问题 A x = λ B x 的最小特征值

    小规模用稠密 eigh；否则 definite（A 半正定）时用 eigsh 位移求逆，
    不定时用 lobpcg，预条件子为 preconditioner 的 LU 分解。
    """
    n = A.shape[0]
    if n == 0:
        raise CoercivityError("约束后没有自由度")
    if n <= config.DENSE_EIG_LIMIT:
        values, vectors = sla.eigh(A.toarray(), B.toarray(), subset_by_index=[0, 0])
        lam, x = float(values[0]), vectors[:, 0]
        method, iterations = 'dense_eigh', 0
    elif definite:
        scale = abs(A.diagonal()).max() / max(abs(B.diagonal()).max(), np.finfo(float).tiny)
        sigma = -1e-3 * scale
        try:
            values, vectors = spla.eigsh(A.tocsc(), k=1, M=B.tocsc(), sigma=sigma, which='LM',
                                         v0=_start_vector(n), tol=config.EIG_TOL,
                                         maxiter=config.EIG_MAX_ITERS)
        except spla.ArpackNoConvergence as e:
            raise CoercivityError(f"eigsh 未收敛: {e}")
        lam, x = float(values[0]), vectors[:, 0]
        method, iterations = 'eigsh_shift_invert', -1
    else:
        lu = spla.splu(sp.csc_matrix(preconditioner))
        M = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        X0 = _start_vector(n).reshape(-1, 1)
        values, vectors, history = spla.lobpcg(
            A, X0, B=B, M=M, largest=False, tol=config.EIG_TOL,
            maxiter=config.EIG_MAX_ITERS, retResidualNormsHistory=True)
        lam, x = float(values[0]), vectors[:, 0]
        method, iterations = 'lobpcg', len(history)

    Ax, Bx = A @ x, B @ x
    residual = float(np.linalg.norm(Ax - lam * Bx) / max(np.linalg.norm(Ax), np.linalg.norm(lam * Bx),
                                                            np.finfo(float).tiny))
    if method == 'lobpcg' and residual > np.sqrt(config.EIG_TOL):
        raise CoercivityError(f"lobpcg 未收敛（相对残差 {residual:.3e}）")
    return {'value': lam, 'method': method, 'iterations': iterations, 'residual': residual}


def estimate_korn(dofmap: DofMap, system: DiscreteSystem) -> float:
    """
    Korn 常数：体积项（I: 应变，II: 梯度）相对 H¹ Gram 矩阵的最小广义特征值

    Raises:
        CoercivityError: 约束空间中存在刚体模态
    """
    return _korn(dofmap, system)['value']


def _korn(dofmap: DofMap, system: DiscreteSystem) -> Dict[str, object]:
    A = _reduce(system.volume, dofmap)
    G = _reduce(system.gram, dofmap)
    result = smallest_eigenvalue(A, G, definite=True)
    if result['value'] / system.nu < config.RIGID_MODE_TOL:
        raise CoercivityError(
            f"约束空间中存在刚体模态（β/ν = {result['value'] / system.nu:.3e}），Korn 不等式不成立"
        )
    logger.info("Korn 常数 β = %.6e (%s)", result['value'], result['method'])
    return result


def is_flat(system: DiscreteSystem) -> bool:
    """所有曲率/形状项所在段都平直，且摩擦项为零"""
    quad = system.quad
    for name, (label, kernel, _, _) in BOUNDARY_TERMS[system.variant].items():
        if kernel == 'friction':
            mat = system.boundary.get(name)
            if mat is not None and np.any(mat.data != 0.0):
                return False
            continue
        k = quad.curvature[quad.labels == label]
        if k.size and not np.all(np.abs(k) <= config.FLAT_CURVATURE_TOL):
            return False
    return True


def compute_shift(system: DiscreteSystem, dofmap: DofMap, frames: List[BoundaryFrame] = None,
                  variant: str = None, base_field: Optional[np.ndarray] = None,
                  delta: Optional[float] = None) -> CoercivityReport:
    """
    计算平移常数

    Args:
        system: 装配好的系统
        dofmap: 自由度映射
        frames: 边界标架（曲率已包含在 system.quad 中，此参数只用于日志）
        variant: 问题类型，默认取 system.variant
        base_field: 扰动模式下的基础解 W(0) 速度系数
        delta: 覆盖 δ = β/2

    Returns:
        CoercivityReport

    Raises:
        CoercivityError: 存在刚体模态、特征值求解不收敛，或平移后仍不满足强制性
    """
    variant = variant or system.variant
    if variant != system.variant:
        raise CoercivityError(f"问题类型 {variant} 与系统 {system.variant} 不一致")

    korn = _korn(dofmap, system)
    beta = korn['value']
    margin = beta / 2.0 if delta is None else float(delta)
    perturbation = base_field is not None
    meta = {'korn_method': korn['method'], 'korn_residual': korn['residual']}
    if frames is not None:
        meta['corner_nodes'] = sum(1 for f in frames if f.corner)

    operator = system.principal
    if perturbation:
        c1, c2 = system.convection(base_field)
        conv = c1 + c2
        operator = operator + 0.5 * (conv + conv.T)

    if not perturbation and is_flat(system):
        shift = 0.0
        flat = True
        meta['method'] = 'flat_shortcut'
    else:
        flat = False
        P = _reduce(operator - margin * system.gram, dofmap)
        M = _reduce(system.mass, dofmap)
        result = smallest_eigenvalue(P, M, definite=False, preconditioner=_reduce(system.gram, dofmap))
        lam = result['value']
        shift = max(0.0, -lam) + config.SHIFT_SAFETY
        meta.update({'method': result['method'], 'iterations': result['iterations'],
                     'residual': result['residual'], 'lambda_min': lam})

    shifted = _reduce(operator + shift * system.mass, dofmap)
    post = smallest_eigenvalue(shifted, _reduce(system.gram, dofmap), definite=True)
    meta['post_shift_min'] = post['value']
    if post['value'] < margin - 1e-8:
        raise CoercivityError(
            f"平移后最小特征值 {post['value']:.6e} 小于 δ = {margin:.6e}（k = {shift:.6e}）"
        )

    report = CoercivityReport(variant=variant, korn_beta=beta, shift_k=shift, margin_delta=margin,
                              flat_shortcut=flat, perturbation=perturbation, eig_metadata=meta,
                              nu=system.nu)
    logger.info("强制性: β=%.6e, δ=%.6e, %s=%.6e, 平直=%s",
                beta, margin, report.shift_symbol, shift, flat)
    return report
