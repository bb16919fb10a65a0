"""
无散提升 U(t)

对每个时间采样点解一个定常 Stokes 问题（梯度形式，单位粘性），
边界值取 h₁、h₄、h₅；U′ 由二阶差分得到。
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse.linalg as spla

import config
from src.mixed_ns.errors import AssemblyError, FluxIncompatibilityError
from src.mixed_ns.expressions import eval_scalar, eval_vector
from src.mixed_ns.fem import interpolate
from src.mixed_ns.forms import DiscreteSystem, ProblemSpec
from src.mixed_ns.spaces import DofMap, Field, apply_constraints, essential_values


logger = logging.getLogger(__name__)

FLUX_LABELS = (1, 5)


def time_derivative(samples: np.ndarray, dt: float) -> np.ndarray:
    """中心差分，端点用二阶单侧差分；只有两个采样点时退化为一阶"""
    n = len(samples)
    out = np.zeros_like(samples)
    if n < 2:
        return out
    if n == 2:
        out[:] = (samples[1] - samples[0]) / dt
        return out
    out[1:-1] = (samples[2:] - samples[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * dt)
    out[-1] = (3.0 * samples[-1] - 4.0 * samples[-2] + samples[-3]) / (2.0 * dt)
    return out


@dataclass(frozen=True, eq=False)
class LiftingField:
    """
    时间采样的提升场（扰动模式下也用来保存基础解 W）

    samples[k] 与 derivatives[k] 为 t_k 处的速度系数
    """
    times: np.ndarray
    samples: np.ndarray
    derivatives: np.ndarray
    dofmap_id: int
    flux: pd.DataFrame = field(default_factory=pd.DataFrame)
    divergence: np.ndarray = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def is_zero(self) -> bool:
        return not np.any(self.samples) and not np.any(self.derivatives)

    def at(self, index: int) -> Field:
        return Field(self.samples[index].copy(), np.zeros(0), self.dofmap_id)

    def terms(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """(U(t_k), U′(t_k))"""
        return self.samples[index], self.derivatives[index]

    def second_differences(self) -> np.ndarray:
        if len(self.times) < 3:
            return np.zeros((0, self.samples.shape[1]))
        dt = self.dt
        return (self.samples[2:] - 2.0 * self.samples[1:-1] + self.samples[:-2]) / dt ** 2

    def norm_report(self, system: DiscreteSystem) -> Dict[str, float]:
        """
        𝒲 范数的离散替代：‖U‖_{L₂(H¹)}、‖U′‖_{L₂(H¹)}，以及二阶差分的 ‖U″‖_{L₂(L₂)}（代理量）
        """
        dt = self.dt if len(self.times) > 1 else 1.0
        weights = np.full(len(self.times), dt)
        if len(self.times) > 1:
            weights[[0, -1]] = 0.5 * dt
        h1 = np.array([system.h1_norm(u) for u in self.samples])
        dh1 = np.array([system.h1_norm(u) for u in self.derivatives])
        dd = self.second_differences()
        l2_dd = np.array([system.l2_norm(u) for u in dd])
        report = {
            'U_L2H1': float(np.sqrt(np.sum(weights * h1 ** 2))),
            'dU_L2H1': float(np.sqrt(np.sum(weights * dh1 ** 2))),
            'ddU_L2L2_proxy': float(np.sqrt(np.sum(dt * l2_dd ** 2))),
        }
        report['W_norm_proxy'] = report['U_L2H1'] + report['dU_L2H1'] + report['ddU_L2L2_proxy']
        return report

    @classmethod
    def from_function(cls, func: Callable, times: np.ndarray, dofmap: DofMap) -> 'LiftingField':
        """在 P2 节点上插值已知场 func(x, y, t) → (u, v)，用于扰动模式的基础解"""
        times = np.asarray(times, dtype=float)
        samples = np.array([interpolate(dofmap.topo, lambda x, y: func(x, y, t)) for t in times])
        dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
        return cls(times=times, samples=samples, derivatives=time_derivative(samples, dt),
                   dofmap_id=dofmap.id)


def flux_report(system: DiscreteSystem, spec: ProblemSpec, t: float) -> pd.DataFrame:
    """
    各速度给定段的外法向通量

    signed_flux 为 ∫ g·n（Γ₁ 上 g = h₁，Γ₅ 上 g·n = h₅），inflow 为负通量边之和取正。
    """
    quad = system.quad
    rows = []
    for label in FLUX_LABELS:
        edges = np.flatnonzero(quad.labels == label)
        if len(edges) == 0:
            continue
        func = spec.h.get(label)
        if func is None:
            per_edge = np.zeros(len(edges))
        else:
            pts = quad.points[edges]
            if label == 1:
                g = eval_vector(func, pts[..., 0], pts[..., 1], t)
                gn = np.sum(g * quad.normals[edges], axis=-1)
            else:
                gn = eval_scalar(func, pts[..., 0], pts[..., 1], t)
            per_edge = np.sum(gn * quad.weights[edges], axis=1)
        rows.append({
            't': float(t),
            'label': label,
            'signed_flux': float(per_edge.sum()),
            'inflow': float(-per_edge[per_edge < 0].sum()),
            'total_abs': float(np.abs(per_edge).sum()),
        })
    return pd.DataFrame(rows, columns=['t', 'label', 'signed_flux', 'inflow', 'total_abs'])


def check_flux(report: pd.DataFrame, dofmap: DofMap, t: float):
    """没有法向自由段时，净通量必须为零"""
    if not dofmap.pressure_multiplier or report.empty:
        return
    net = report['signed_flux'].sum()
    scale = max(1.0, report['total_abs'].sum())
    if abs(net) > config.FLUX_TOL * scale:
        raise FluxIncompatibilityError(
            f"t = {t:g}: 区域没有出流段，但给定速度的净通量为 {net:.6e}"
        )


def build_lifting(spec: ProblemSpec, mesh, frames, dofmap: DofMap,
                  system: Optional[DiscreteSystem] = None) -> LiftingField:
    """
    构造提升 U

    Args:
        spec: 问题描述（h₁、h₄、h₅ 与时间网格）
        mesh: 网格
        frames: 边界标架
        dofmap: 自由度映射
        system: 已装配的系统；None 时重新装配

    Raises:
        FluxIncompatibilityError: 封闭区域上净通量不为零
        ConstraintError: 共享节点上的边界值矛盾
    """
    if system is None:
        from src.mixed_ns.forms import assemble_principal
        system = assemble_principal(mesh, frames, dofmap, spec)

    times = spec.time_grid
    traces = {label: spec.h[label] for label in sorted(spec.h)}
    flux_frames = []
    for t in times:
        report = flux_report(system, spec, t)
        check_flux(report, dofmap, t)
        flux_frames.append(report)
    flux = pd.concat(flux_frames, ignore_index=True) if flux_frames else pd.DataFrame()

    samples = np.zeros((len(times), dofmap.n_velocity))
    divergence = np.zeros(len(times))
    if traces:
        stokes = system.gradient / system.nu
        base = apply_constraints(stokes, dofmap, None, divergence=system.divergence)
        try:
            lu = spla.splu(base.matrix)
        except RuntimeError as e:
            raise AssemblyError(f"提升的 Stokes 系统奇异: {e}")
        T, B = dofmap.T, system.divergence
        extra = np.zeros(1 if dofmap.pressure_multiplier else 0)
        for k, t in enumerate(times):
            g = dofmap.constrained_part(essential_values(dofmap, traces, t).velocity)
            rhs = np.concatenate([T.T @ (-(stokes @ g)), -(B @ g), extra])
            x = lu.solve(rhs)
            samples[k] = T @ x[:dofmap.n_free] + g
            divergence[k] = float(np.linalg.norm(B @ samples[k]))

    dt = spec.dt
    lifting = LiftingField(times=times, samples=samples, derivatives=time_derivative(samples, dt),
                           dofmap_id=dofmap.id, flux=flux, divergence=divergence)
    if not flux.empty:
        first = flux[flux['t'] == times[0]]
        logger.info("提升: t=0 通量 %s，最大离散散度 %.3e",
                    dict(zip(first['label'], first['signed_flux'])), divergence.max())
    return lifting


def check_initial_compatibility(lifting: LiftingField, v0: Field, dofmap: DofMap) -> Tuple[bool, float]:
    """
    检查 U(0) - v₀ 是否满足空间的全部本质约束

    Returns:
        (是否相容, 约束分量范数)
    """
    dofmap.check_field(Field(v0.velocity, np.zeros(dofmap.n_pressure), v0.dofmap_id))
    norm = dofmap.constraint_residual(v0.velocity, lifting.samples[0])
    ok = norm <= config.INITIAL_COMPAT_TOL
    if not ok:
        logger.warning("初始场与提升在本质边界上不一致，约束分量范数 %.3e", norm)
    return ok, norm
