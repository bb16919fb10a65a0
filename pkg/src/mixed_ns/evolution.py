"""
时间推进

求解重标度后的问题
    M z′ + (A + kM + C₁(U) + C₂(U)) z + e^{kt} C₁(z) z + Bᵀp̂ = F(t),  B z = 0
其中 F(t) = e^{-kt}[数据 - M U′ - A U - C₁(U) U]。物理解 v = e^{kt} z + U，p = e^{kt} p̂。

扰动模式把 U 换成给定的基础解 W，右端只含扰动数据，z̄ = e^{kt} z。
非线性项用 Picard 迭代：输运场取上一迭代值。
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp

import config
from src.mixed_ns.coercivity import CoercivityReport, compute_shift
from src.mixed_ns.errors import AssemblyError, ConfigValidationError, PicardDivergenceError
from src.mixed_ns.expressions import eval_vector
from src.mixed_ns.fem import field_at_points, interpolate
from src.mixed_ns.forms import (DiscreteSystem, ProblemSpec, assemble_convection,
                                assemble_principal, assemble_rhs, trilinear)
from src.mixed_ns.geometry import BoundaryFrame, Mesh, build_frames
from src.mixed_ns.lifting import LiftingField, build_lifting, check_initial_compatibility
from src.mixed_ns.logger import NormLogger
from src.mixed_ns.spaces import DofMap, Field, apply_constraints, build_spaces


logger = logging.getLogger(__name__)

SCHEMES = {'implicit_euler': 1.0, 'crank_nicolson': 0.5}
PICARD_STARTS = ('previous', 'zero', 'lifting')
STANDARD = 'standard'
PERTURBATION = 'perturbation'


@dataclass(frozen=True)
class SolveConfig:
    """时间推进参数"""
    picard_tol: float = config.PICARD_TOL
    max_picard_iters: int = config.MAX_PICARD_ITERS
    scheme: str = config.DEFAULT_SCHEME
    linear_tol: float = config.LINEAR_TOL
    growth_limit: int = config.PICARD_GROWTH_LIMIT
    picard_start: str = 'previous'

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise ConfigValidationError('picard_tol', f"必须为正，得到 {self.picard_tol}")
        if not self.linear_tol > 0:
            raise ConfigValidationError('linear_tol', f"必须为正，得到 {self.linear_tol}")
        if int(self.max_picard_iters) < 1:
            raise ConfigValidationError('max_picard_iters', f"至少为 1，得到 {self.max_picard_iters}")
        if int(self.growth_limit) < 1:
            raise ConfigValidationError('growth_limit', f"至少为 1，得到 {self.growth_limit}")
        if self.scheme not in SCHEMES:
            raise ConfigValidationError('scheme', f"未知格式 {self.scheme}，可用: {', '.join(SCHEMES)}")
        if self.picard_start not in PICARD_STARTS:
            raise ConfigValidationError('picard_start', f"未知初值 {self.picard_start}")

    @property
    def theta(self) -> float:
        return SCHEMES[self.scheme]


@dataclass(frozen=True, eq=False)
class ProblemSetup:
    """一次运行共用的网格、标架、空间与装配结果"""
    mesh: Mesh
    frames: List[BoundaryFrame]
    dofmap: DofMap
    system: DiscreteSystem
    analytic: Optional[Dict] = None


def prepare(spec: ProblemSpec, mesh: Mesh, analytic: Optional[Dict] = None) -> ProblemSetup:
    """网格 → 标架 → 空间 → 装配"""
    frames = build_frames(mesh, analytic)
    dofmap = build_spaces(mesh, frames, spec.variant, analytic)
    system = assemble_principal(mesh, frames, dofmap, spec, analytic)
    return ProblemSetup(mesh, frames, dofmap, system, analytic)


@dataclass
class EvolutionState:
    """
    推进状态

    z 为重标度未知量的速度系数（位于齐次约束空间），pressure 为 p̂。
    transport 在标准模式下是提升 U，扰动模式下是基础解 W。
    """
    index: int
    times: np.ndarray
    z: np.ndarray
    pressure: np.ndarray
    shift_k: float
    transport: LiftingField
    mode: str = STANDARD
    history: List[float] = field(default_factory=list)
    converged: bool = True

    @property
    def t(self) -> float:
        return float(self.times[self.index])

    def physical(self, dofmap: DofMap) -> Field:
        """v = e^{kt} z + U（或 W），p = e^{kt} p̂"""
        scale = np.exp(self.shift_k * self.t)
        velocity = scale * self.z + self.transport.samples[self.index]
        return Field(velocity, scale * self.pressure, dofmap.id)

    def rescaled(self) -> np.ndarray:
        """z̄ = e^{kt} z"""
        return np.exp(self.shift_k * self.t) * self.z


def _linear_part(system: DiscreteSystem, state: EvolutionState, index: int) -> sp.csr_matrix:
    """A + kM + C₁(W) + C₂(W)"""
    W = state.transport.samples[index]
    op = system.principal + state.shift_k * system.mass
    if np.any(W):
        c1, c2 = assemble_convection(W, system)
        op = op + c1 + c2
    return op.tocsr()


def _forcing(system: DiscreteSystem, spec: ProblemSpec, state: EvolutionState, index: int) -> np.ndarray:
    t = float(state.times[index])
    lifting_terms = None
    if state.mode == STANDARD and not state.transport.is_zero:
        lifting_terms = state.transport.terms(index)
    return assemble_rhs(system, spec, t, lifting_terms=lifting_terms, shift_k=state.shift_k)


def step(state: EvolutionState, system: DiscreteSystem, spec: ProblemSpec,
         config: SolveConfig) -> EvolutionState:
    """
    推进一步（θ 格式，θ=1 为隐式 Euler，θ=½ 为 Crank-Nicolson）

    Raises:
        PicardDivergenceError: 残差连续增长 growth_limit 次，或达到最大迭代次数
    """
    if not state.converged:
        raise AssemblyError("上一步未收敛，不能继续推进")
    dofmap = system.dofmap
    n0, n1 = state.index, state.index + 1
    if n1 >= len(state.times):
        raise AssemblyError("已到达时间网格终点")
    t0, t1 = float(state.times[n0]), float(state.times[n1])
    dt = t1 - t0
    theta = config.theta
    k = state.shift_k

    M, B, T = system.mass, system.divergence, dofmap.T
    L1 = _linear_part(system, state, n1)
    b = M @ state.z / dt + theta * _forcing(system, spec, state, n1)
    if theta < 1.0:
        c_old, _ = assemble_convection(state.z, system)
        L0 = _linear_part(system, state, n0)
        explicit = L0 @ state.z + np.exp(k * t0) * (c_old @ state.z)
        b = b + (1.0 - theta) * (_forcing(system, spec, state, n0) - explicit)
    base = (M / dt + theta * L1).tocsr()
    scale = max(float(np.linalg.norm(T.T @ b)), np.finfo(float).tiny)
    weight = theta * np.exp(k * t1)

    if config.picard_start == 'zero':
        iterate = np.zeros_like(state.z)
    elif config.picard_start == 'lifting':
        iterate = dofmap.expand(dofmap.reduce(state.transport.samples[n1]))
    else:
        iterate = state.z.copy()

    history: List[float] = []
    growth = 0
    conv, _ = assemble_convection(iterate, system)
    for it in range(1, config.max_picard_iters + 1):
        K = base + weight * conv
        solution = apply_constraints(K, dofmap, None, rhs=b, divergence=B).solve_field()
        z_new, p_new = solution.velocity, solution.pressure

        conv, _ = assemble_convection(z_new, system)
        r = T.T @ ((base + weight * conv) @ z_new + B.T @ p_new - b)
        res_abs = float(np.linalg.norm(r))
        residual = res_abs / scale
        if not np.isfinite(residual):
            raise PicardDivergenceError(f"t = {t1:g} 第 {it} 次迭代出现非有限值",
                                        history, n1)
        if history and residual > history[-1]:
            growth += 1
        else:
            growth = 0
        history.append(residual)
        iterate = z_new

        if residual <= config.picard_tol or res_abs <= config.linear_tol:
            logger.debug("t=%.6g: Picard %d 次收敛，残差 %.3e", t1, it, residual)
            return EvolutionState(index=n1, times=state.times, z=z_new, pressure=p_new,
                                  shift_k=k, transport=state.transport, mode=state.mode,
                                  history=history, converged=True)
        if growth >= config.growth_limit:
            logger.warning("t=%.6g: Picard 残差连续 %d 次增长", t1, growth)
            raise PicardDivergenceError(
                f"t = {t1:g} Picard 残差连续 {growth} 次增长（最后 {residual:.3e}）", history, n1)

    raise PicardDivergenceError(
        f"t = {t1:g} Picard 迭代 {config.max_picard_iters} 次未收敛（残差 {history[-1]:.3e}）",
        history, n1)


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """一次时间推进的全部结果"""
    times: np.ndarray
    velocities: np.ndarray
    pressures: np.ndarray
    rescaled: np.ndarray
    norms: NormLogger
    coercivity: CoercivityReport
    transport: LiftingField
    setup: ProblemSetup
    final_state: EvolutionState
    mode: str = STANDARD
    compat: Optional[object] = None

    def field(self, index: int) -> Field:
        return Field(self.velocities[index], self.pressures[index], self.setup.dofmap.id)

    def l2_errors(self, exact) -> np.ndarray:
        """与解析速度 exact(x, y, t) → (u, v) 的 L₂ 误差"""
        system = self.setup.system
        ed = system.elements
        out = []
        for t, v in zip(self.times, self.velocities):
            diff = field_at_points(ed, v) - eval_vector(exact, ed.points[..., 0], ed.points[..., 1], t)
            out.append(np.sqrt(np.sum(ed.weights * np.sum(diff ** 2, axis=-1))))
        return np.array(out)


def _initial_z(spec: ProblemSpec, setup: ProblemSetup, transport: LiftingField, mode: str) -> np.ndarray:
    dofmap = setup.dofmap
    if spec.v0 is None:
        v0 = transport.samples[0].copy() if mode == STANDARD else np.zeros(dofmap.n_velocity)
    else:
        v0 = interpolate(dofmap.topo, spec.v0, 0.0)
    if mode == STANDARD:
        check_initial_compatibility(transport, Field(v0, np.zeros(dofmap.n_pressure), dofmap.id), dofmap)
        v0 = v0 - transport.samples[0]
    # 去掉约束分量，z(0) 位于齐次空间
    return dofmap.expand(dofmap.reduce(v0))


def _march(state: EvolutionState, setup: ProblemSetup, spec: ProblemSpec,
           config: SolveConfig, coercivity: CoercivityReport, compat=None) -> EvolutionResult:
    system, dofmap = setup.system, setup.dofmap
    times = state.times
    norms = NormLogger()
    velocities = np.zeros((len(times), dofmap.n_velocity))
    pressures = np.zeros((len(times), dofmap.n_pressure))
    rescaled = np.zeros((len(times), dofmap.n_velocity))

    def record(s: EvolutionState, iters: int, residual: float):
        fld = s.physical(dofmap)
        velocities[s.index] = fld.velocity
        pressures[s.index] = fld.pressure
        rescaled[s.index] = s.rescaled()
        diagnostics = {
            'energy': system.l2_norm(fld.velocity) ** 2,
            'strain_energy': system.strain_energy(fld.velocity),
            'skew_defect': abs(trilinear(system, s.z, s.z, s.z)) if np.any(s.z) else 0.0,
            'rescaled_L2': system.l2_norm(rescaled[s.index]),
        }
        if s.index >= 2:
            dd = (rescaled[s.index] - 2 * rescaled[s.index - 1] + rescaled[s.index - 2])
            diagnostics['second_difference'] = system.l2_norm(dd) / float(times[1] - times[0]) ** 2
        norms.log_step(s.t, system.l2_norm(fld.velocity), system.h1_norm(fld.velocity),
                       iters, residual, **diagnostics)

    record(state, 0, 0.0)
    while state.index < len(times) - 1:
        state = step(state, system, spec, config)
        record(state, len(state.history), state.history[-1])
    logger.info("时间推进完成: %d 步，终止时刻 ‖v‖_L2 = %.6e",
                len(times) - 1, norms.rows[-1]['L2_velocity'])
    return EvolutionResult(times=times, velocities=velocities, pressures=pressures,
                           rescaled=rescaled, norms=norms, coercivity=coercivity,
                           transport=state.transport, setup=setup, final_state=state,
                           mode=state.mode, compat=compat)


def run(spec: ProblemSpec, mesh: Mesh, config: SolveConfig = None, setup: ProblemSetup = None,
        shift_k: Optional[float] = None, lifting: Optional[LiftingField] = None,
        compat_report=None, analytic: Optional[Dict] = None) -> EvolutionResult:
    """
    标准模式运行：装配 → 强制性 → 提升 → 相容性 → 推进

    Args:
        spec: 问题描述
        mesh: 网格
        config: 推进参数
        setup: 已准备好的装配结果
        shift_k: 覆盖计算出的平移常数（例如强制取 0）
        lifting: 已构造的提升
        compat_report: 已完成的相容性报告（网格族上的判定）；None 时只用当前网格，
            结果中的 compat 仅在 w̄₀ = 0 时为 in_H，否则为 inconclusive
        analytic: 解析边界

    Returns:
        EvolutionResult
    """
    config = config or SolveConfig()
    setup = setup or prepare(spec, mesh, analytic)
    system, dofmap = setup.system, setup.dofmap

    report = compute_shift(system, dofmap, setup.frames)
    if shift_k is not None:
        report = replace(report, shift_k=float(shift_k),
                         eig_metadata={**report.eig_metadata, 'override': 'user'})
        logger.info("平移常数被指定为 %g", shift_k)
    lifting = lifting or build_lifting(spec, setup.mesh, setup.frames, dofmap, system)

    if compat_report is None:
        from src.mixed_ns.compat import single_level_report
        compat_report = single_level_report(spec, setup, report.shift_k)
        logger.info("相容性（单层网格）: ‖w̄₀‖ = %.6e，判定 %s",
                    compat_report.finest_norm, compat_report.verdict)
    else:
        logger.info("相容性: %s，最细网格范数 %.6e", compat_report.verdict, compat_report.finest_norm)
        if compat_report.verdict != 'in_H':
            logger.warning("相容性判定为 %s，继续求解", compat_report.verdict)

    z0 = _initial_z(spec, setup, lifting, STANDARD)
    state = EvolutionState(index=0, times=spec.time_grid, z=z0, pressure=np.zeros(dofmap.n_pressure),
                           shift_k=report.shift_k, transport=lifting, mode=STANDARD)
    return _march(state, setup, spec, config, report, compat_report)


def run_perturbation(base: LiftingField, spec: ProblemSpec, mesh: Mesh, config: SolveConfig = None,
                     setup: ProblemSetup = None, shift_k: Optional[float] = None,
                     analytic: Optional[Dict] = None) -> EvolutionResult:
    """
    扰动模式：基础解 W 冻结在线性输运项中，右端为扰动数据 (f, φᵢ)

    spec.v0 为初始扰动 z̄(0)（None 时为零）；扰动数据不能包含本质边界值。
    结果中 velocities 为 v = z̄ + W，rescaled 为 z̄。
    """
    config = config or SolveConfig()
    if spec.h:
        raise ConfigValidationError('h', "扰动模式不支持本质边界数据的扰动")
    setup = setup or prepare(spec, mesh, analytic)
    system, dofmap = setup.system, setup.dofmap
    if base.dofmap_id != dofmap.id or base.samples.shape[1] != dofmap.n_velocity:
        raise AssemblyError("基础解与当前空间不匹配")
    if len(base.times) != len(spec.time_grid) or not np.allclose(base.times, spec.time_grid):
        raise AssemblyError("基础解的时间采样与时间网格不一致")

    report = compute_shift(system, dofmap, setup.frames, base_field=base.samples[0])
    if shift_k is not None:
        report = replace(report, shift_k=float(shift_k), flat_shortcut=False,
                         eig_metadata={**report.eig_metadata, 'override': 'user'})

    z0 = _initial_z(spec, setup, base, PERTURBATION)
    state = EvolutionState(index=0, times=spec.time_grid, z=z0, pressure=np.zeros(dofmap.n_pressure),
                           shift_k=report.shift_k, transport=base, mode=PERTURBATION)
    return _march(state, setup, spec, config, report)
