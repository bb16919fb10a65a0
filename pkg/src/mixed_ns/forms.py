"""
双线性型、三线性型与线性泛函的装配

问题 I（应变形式）:
    2ν(ε(v),ε(u)) + 2ν(k v,u)_Γ₂ + 2ν(k v_τ,u_τ)_Γ₃ + 2(α v,u)_Γ₅ + ν(k v,u)_Γ₇
问题 II（梯度形式）:
    ν(∇v,∇u) + ν(k v,u)_Γ₂ + ν(k v_τ,u_τ)_Γ₃ + 2(α v,u)_Γ₅ - ν(k v_τ,u_τ)_Γ₅

二维中形状算子退化为曲率，(Sṽ,ũ) = k (v·τ)(u·τ)。
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.mixed_ns.errors import AssemblyError, ConfigValidationError
from src.mixed_ns.expressions import eval_scalar, eval_vector
from src.mixed_ns.fem import (ElementData, assemble_local, assemble_vector, element_data,
                              field_at_points, gradient_at_points, p2_edge_values,
                              vector_element_dofs, velocity_dofs)
from src.mixed_ns.geometry import BoundaryFrame, EdgeQuadrature, Mesh, edge_quadrature
from src.mixed_ns.spaces import PROBLEM_I, PROBLEM_II, DofMap, check_variant


logger = logging.getLogger(__name__)

# 与 u·n 配对的标量数据段 / 与 u 配对的向量数据段
SCALAR_DATA_LABELS = {PROBLEM_I: (2, 4, 7), PROBLEM_II: (2, 4)}
VECTOR_DATA_LABELS = {PROBLEM_I: (3, 5, 6), PROBLEM_II: (3, 5, 7)}
TRACE_DATA_LABELS = (1, 4, 5)

# 边界项：名称 → (标签, 核类型, 系数是否乘 ν, 系数)
BOUNDARY_TERMS = {
    PROBLEM_I: {
        'curvature_2': (2, 'curvature', True, 2.0),
        'shape_3': (3, 'shape', True, 2.0),
        'friction_5': (5, 'friction', False, 2.0),
        'curvature_7': (7, 'curvature', True, 1.0),
    },
    PROBLEM_II: {
        'curvature_2': (2, 'curvature', True, 1.0),
        'shape_3': (3, 'shape', True, 1.0),
        'friction_5': (5, 'friction', False, 2.0),
        'shape_5': (5, 'shape', True, -1.0),
    },
}


@dataclass
class ProblemSpec:
    """
    问题描述

    数据均为可调用对象 (x, y, t)：标量段返回数组，向量段返回 (分量1, 分量2)。
    alpha 为常数 2×2 矩阵或 (x, y) → (..., 2, 2) 的函数。
    """
    variant: str
    nu: float
    t_final: float = 1.0
    dt: float = 0.1
    alpha: object = None
    f: Optional[Callable] = None
    v0: Optional[Callable] = None
    phi: Dict[int, Callable] = field(default_factory=dict)
    h: Dict[int, Callable] = field(default_factory=dict)

    def __post_init__(self):
        check_variant(self.variant)
        if not self.nu > 0:
            raise ConfigValidationError('nu', f"粘性系数必须为正，得到 {self.nu}")
        if not self.dt > 0:
            raise ConfigValidationError('dt', f"时间步长必须为正，得到 {self.dt}")
        if not self.t_final > 0:
            raise ConfigValidationError('t_final', f"终止时间必须为正，得到 {self.t_final}")
        if abs(self.end_time - self.t_final) > 1e-9 * self.t_final:
            logger.warning("t_final = %g 不是 dt = %g 的整数倍，按 %d 步推进到 t = %g",
                           self.t_final, self.dt, self.n_steps, self.end_time)
        allowed = set(SCALAR_DATA_LABELS[self.variant]) | set(VECTOR_DATA_LABELS[self.variant])
        for label in self.phi:
            if label not in allowed:
                raise ConfigValidationError(f'phi{label}', f"问题 {self.variant} 没有 φ{label}")
        for label in self.h:
            if label not in TRACE_DATA_LABELS:
                raise ConfigValidationError(f'h{label}', "只有 h1, h4, h5")
        if self.alpha is not None and not callable(self.alpha):
            self.alpha = np.asarray(self.alpha, dtype=float).reshape(2, 2)
            if not np.allclose(self.alpha, self.alpha.T, atol=1e-14):
                logger.warning("摩擦矩阵 α 不对称，边界矩阵将不对称")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))

    @property
    def end_time(self) -> float:
        """实际终止时刻 n_steps·dt（均匀步长）"""
        return self.n_steps * self.dt

    @property
    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.end_time, self.n_steps + 1)

    def check_segments(self, labels) -> None:
        """数据所在的边界段必须出现在网格中"""
        present = set(labels)
        for kind, data in (('phi', self.phi), ('h', self.h)):
            for label in data:
                if label not in present:
                    raise AssemblyError(f"给出了 {kind}{label}，但网格中没有 Γ{label}")
        if self.alpha is not None and 5 not in present:
            logger.info("网格中没有 Γ₅，忽略摩擦矩阵 α")

    def alpha_at(self, points: np.ndarray) -> np.ndarray:
        """积分点上的摩擦矩阵 (..., 2, 2)"""
        shape = points.shape[:-1]
        if self.alpha is None:
            return np.zeros(shape + (2, 2))
        if callable(self.alpha):
            value = np.asarray(self.alpha(points[..., 0], points[..., 1]), dtype=float)
            return np.broadcast_to(value, shape + (2, 2))
        return np.broadcast_to(self.alpha, shape + (2, 2))

    @property
    def friction_active(self) -> bool:
        if self.alpha is None:
            return False
        if callable(self.alpha):
            return True
        return bool(np.any(self.alpha != 0.0))

    def with_data(self, **changes) -> 'ProblemSpec':
        """复制并替换部分字段"""
        values = {name: getattr(self, name) for name in
                  ('variant', 'nu', 't_final', 'dt', 'alpha', 'f', 'v0', 'phi', 'h')}
        values.update(changes)
        return ProblemSpec(**values)


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """装配好的稀疏算子"""
    variant: str
    nu: float
    mesh: Mesh
    dofmap: DofMap
    elements: ElementData
    quad: EdgeQuadrature
    strain: sp.csr_matrix
    gradient: sp.csr_matrix
    boundary: Dict[str, sp.csr_matrix]
    mass: sp.csr_matrix
    gram: sp.csr_matrix
    divergence: sp.csr_matrix
    principal: sp.csr_matrix

    @property
    def volume(self) -> sp.csr_matrix:
        """问题对应的体积项（I: 应变，II: 梯度）"""
        return self.strain if self.variant == PROBLEM_I else self.gradient

    def convection(self, w: np.ndarray) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
        return assemble_convection(w, self)

    def l2_norm(self, velocity: np.ndarray) -> float:
        return float(np.sqrt(max(velocity @ (self.mass @ velocity), 0.0)))

    def h1_norm(self, velocity: np.ndarray) -> float:
        return float(np.sqrt(max(velocity @ (self.gram @ velocity), 0.0)))

    def strain_energy(self, velocity: np.ndarray) -> float:
        """‖ε(v)‖²"""
        return float(velocity @ (self.strain @ velocity)) / (2.0 * self.nu)


def _volume_matrices(ed: ElementData, n_velocity: int, n_pressure: int, nu: float):
    w = ed.weights
    vdofs = vector_element_dofs(ed)
    n_tri = len(w)
    eye = np.eye(2)

    gg = np.einsum('tiqk,tjqk,tq->tij', ed.grad, ed.grad, w)
    mm = np.einsum('iq,jq,tq->tij', ed.phi, ed.phi, w)
    cross = np.einsum('tiqd,tjqc,tq->ticjd', ed.grad, ed.grad, w)

    def vec(local):
        return np.einsum('tij,cd->ticjd', local, eye).reshape(n_tri, 12, 12)

    shape = (n_velocity, n_velocity)
    strain = assemble_local(vdofs, vdofs, nu * (vec(gg) + cross.reshape(n_tri, 12, 12)), shape)
    gradient = assemble_local(vdofs, vdofs, nu * vec(gg), shape)
    mass = assemble_local(vdofs, vdofs, vec(mm), shape)
    gram = assemble_local(vdofs, vdofs, vec(gg + mm), shape)

    div_local = -np.einsum('aq,tjqd,tq->tajd', ed.psi, ed.grad, w).reshape(n_tri, 3, 12)
    divergence = assemble_local(ed.pdofs, vdofs, div_local, (n_pressure, n_velocity))
    return strain, gradient, mass, gram, divergence


def _edge_velocity_dofs(dofmap: DofMap, mesh: Mesh) -> np.ndarray:
    """边界边的速度自由度 (E,6)：起点、中点、终点"""
    nodes = np.column_stack([mesh.boundary_edges[:, 0], dofmap.topo.boundary_mid,
                             mesh.boundary_edges[:, 1]])
    return velocity_dofs(nodes).reshape(len(nodes), 6)


def boundary_matrix(mesh: Mesh, dofmap: DofMap, quad: EdgeQuadrature, label: int,
                    kernel: str, coeff: float, spec: Optional[ProblemSpec] = None) -> sp.csr_matrix:
    """
    边界项矩阵

    kernel: curvature → c∫k v·u；shape → c∫k (v·τ)(u·τ)；friction → c∫(α v)·u
    """
    n = dofmap.n_velocity
    edges = np.flatnonzero(quad.labels == label)
    if len(edges) == 0 or coeff == 0.0:
        return sp.csr_matrix((n, n))

    phi = p2_edge_values(quad.s)
    w = quad.weights[edges]
    if kernel == 'friction':
        weight = spec.alpha_at(quad.points[edges])
    else:
        k = quad.curvature[edges]
        if np.any(~np.isfinite(k)):
            raise AssemblyError(f"Γ{label} 上有边界边缺少曲率所需的标架")
        if kernel == 'curvature':
            weight = k[..., None, None] * np.eye(2)
        else:
            tau = quad.tangents[edges]
            weight = k[..., None, None] * np.einsum('eqc,eqd->eqcd', tau, tau)

    local = coeff * np.einsum('iq,jq,eq,eqcd->eicjd', phi, phi, w, weight)
    dofs = _edge_velocity_dofs(dofmap, mesh)[edges]
    return assemble_local(dofs, dofs, local.reshape(len(edges), 6, 6), (n, n))


def assemble_principal(mesh: Mesh, frames: List[BoundaryFrame], dofmap: DofMap,
                       spec: ProblemSpec, analytic: Optional[Dict] = None) -> DiscreteSystem:
    """
    装配主部：体积项与边界项之和

    Args:
        mesh: 网格
        frames: 边界标架
        dofmap: 自由度映射
        spec: 问题描述
        analytic: 按标签指定的解析边界

    Returns:
        DiscreteSystem
    """
    if spec.variant != dofmap.variant:
        raise AssemblyError(f"问题类型 {spec.variant} 与空间 {dofmap.variant} 不一致")
    spec.check_segments(mesh.labels_present)

    ed = element_data(mesh, dofmap.topo)
    quad = edge_quadrature(mesh, frames, analytic)
    strain, gradient, mass, gram, divergence = _volume_matrices(
        ed, dofmap.n_velocity, dofmap.n_pressure, spec.nu)

    boundary = {}
    for name, (label, kernel, scaled, coeff) in BOUNDARY_TERMS[spec.variant].items():
        if kernel == 'friction' and not spec.friction_active:
            continue
        c = coeff * spec.nu if scaled else coeff
        boundary[name] = boundary_matrix(mesh, dofmap, quad, label, kernel, c, spec)

    volume = strain if spec.variant == PROBLEM_I else gradient
    principal = volume.copy()
    for mat in boundary.values():
        principal = principal + mat

    logger.info("装配完成: 问题 %s，ν=%g，边界项 %s，非零元 %d",
                spec.variant, spec.nu, sorted(boundary), principal.nnz)
    return DiscreteSystem(variant=spec.variant, nu=spec.nu, mesh=mesh, dofmap=dofmap,
                          elements=ed, quad=quad, strain=strain, gradient=gradient,
                          boundary=boundary, mass=mass, gram=gram, divergence=divergence,
                          principal=principal.tocsr())


def assemble_convection(w: np.ndarray, system: DiscreteSystem) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """
    对流矩阵

    C₁(w): ⟨(w·∇)v, u⟩，C₂(w): ⟨(v·∇)w, u⟩；非线性项 B(v) = C₁(v) v
    """
    ed = system.elements
    n = system.dofmap.n_velocity
    w = np.asarray(getattr(w, 'velocity', w), dtype=float)
    n_tri = len(ed.weights)
    vdofs = vector_element_dofs(ed)

    wq = field_at_points(ed, w)
    gw = gradient_at_points(ed, w)
    adv = np.einsum('tqk,tjqk->tjq', wq, ed.grad)
    c1 = np.einsum('iq,tjq,tq->tij', ed.phi, adv, ed.weights)
    c1 = np.einsum('tij,cd->ticjd', c1, np.eye(2)).reshape(n_tri, 12, 12)
    c2 = np.einsum('iq,jq,tqcd,tq->ticjd', ed.phi, ed.phi, gw, ed.weights).reshape(n_tri, 12, 12)
    return (assemble_local(vdofs, vdofs, c1, (n, n)),
            assemble_local(vdofs, vdofs, c2, (n, n)))


def trilinear(system: DiscreteSystem, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """⟨(a·∇)b, c⟩"""
    c1, _ = assemble_convection(a, system)
    return float(c @ (c1 @ b))


def body_force_vector(system: DiscreteSystem, f: Callable, t: float) -> np.ndarray:
    ed = system.elements
    values = eval_vector(f, ed.points[..., 0], ed.points[..., 1], t)
    local = np.einsum('iq,tqc,tq->tic', ed.phi, values, ed.weights)
    return assemble_vector(vector_element_dofs(ed), local.reshape(len(local), 12), system.dofmap.n_velocity)


def boundary_data_vector(system: DiscreteSystem, label: int, func: Callable, t: float,
                         scalar: bool) -> np.ndarray:
    """标量数据 ∫φ (u·n)，或向量数据 ∫φ·u"""
    quad = system.quad
    edges = np.flatnonzero(quad.labels == label)
    out = np.zeros(system.dofmap.n_velocity)
    if len(edges) == 0:
        return out
    pts = quad.points[edges]
    if scalar:
        values = eval_scalar(func, pts[..., 0], pts[..., 1], t)[..., None] * quad.normals[edges]
    else:
        values = eval_vector(func, pts[..., 0], pts[..., 1], t)
    phi = p2_edge_values(quad.s)
    local = np.einsum('iq,eqc,eq->eic', phi, values, quad.weights[edges])
    dofs = _edge_velocity_dofs(system.dofmap, system.mesh)[edges]
    np.add.at(out, dofs.ravel(), local.reshape(len(edges), 6).ravel())
    return out


def data_functional(system: DiscreteSystem, spec: ProblemSpec, t: float) -> np.ndarray:
    """⟨f,u⟩ + Σ⟨φᵢ,u_n⟩ + Σ⟨φᵢ,u⟩（不含提升项与指数权重）"""
    out = np.zeros(system.dofmap.n_velocity)
    if spec.f is not None:
        out += body_force_vector(system, spec.f, t)
    for label, func in sorted(spec.phi.items()):
        scalar = label in SCALAR_DATA_LABELS[spec.variant]
        out += boundary_data_vector(system, label, func, t, scalar)
    return out


def lifting_functional(system: DiscreteSystem, U: np.ndarray, dU: np.ndarray) -> np.ndarray:
    """-(U',u) - A₀(U,u) - ⟨(U·∇)U,u⟩"""
    c1, _ = assemble_convection(U, system)
    return -(system.mass @ dU) - (system.principal @ U) - (c1 @ U)


def assemble_rhs(system: DiscreteSystem, spec: ProblemSpec, t: float,
                 lifting_terms: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                 shift_k: float = 0.0) -> np.ndarray:
    """
    右端泛函 F(t) = e^{-k t}[数据配对 + 提升项]

    Args:
        lifting_terms: (U(t), U'(t)) 系数；None 表示没有提升
        shift_k: 平移常数 k
    """
    spec.check_segments(system.mesh.labels_present)
    out = data_functional(system, spec, t)
    if lifting_terms is not None:
        U, dU = lifting_terms
        out += lifting_functional(system, np.asarray(U, dtype=float), np.asarray(dU, dtype=float))
    return np.exp(-shift_k * t) * out
