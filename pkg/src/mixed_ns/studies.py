"""
制造解与网格收敛研究

通道 [0, L]×[0, 1]：入口与上下壁为 Γ₁（h₁ 取精确迹），出口 x = L 为 Γ₇。
流函数 ψ = a(t)·x(2L - x)/L²·y³，v = (∂ψ/∂y, -∂ψ/∂x) 在出口上切向分量为零。
外力与出口数据由 sympy 符号推导。

另含圆盘 Γ₃ 上 -(Δv, u) 分解的有限元一致性检查。
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
import sympy

import config
from src.mixed_ns.evolution import SolveConfig, prepare, run
from src.mixed_ns.expressions import DataExpression, T, X, Y, from_sympy
from src.mixed_ns.fem import field_at_points, gradient_at_points, interpolate
from src.mixed_ns.forms import ProblemSpec, boundary_data_vector
from src.mixed_ns.meshgen import generate_mesh
from src.mixed_ns.spaces import PROBLEM_I


logger = logging.getLogger(__name__)

CHANNEL_PLAN = {'all': 1, 'outlet': 7}


@dataclass(frozen=True)
class ManufacturedSolution:
    """制造解：精确速度、压力及其对应的数据"""
    variant: str
    nu: float
    velocity: DataExpression
    grad_u: DataExpression
    grad_v: DataExpression
    pressure: DataExpression
    f: DataExpression
    phi7: DataExpression
    h1: DataExpression

    def spec(self, t_final: float, dt: float) -> ProblemSpec:
        return ProblemSpec(variant=self.variant, nu=self.nu, t_final=t_final, dt=dt,
                           f=self.f, v0=self.velocity, phi={7: self.phi7}, h={1: self.h1})


def manufactured_solution(variant: str = PROBLEM_I, nu: float = 1.0, amplitude: float = 0.5,
                          length: float = None) -> ManufacturedSolution:
    """
    构造制造解

    问题 I 的出口数据为标量 -p + ν(∂v/∂n)·n，问题 II 为向量 -pn + ν∂v/∂n。
    """
    length = length or config.CHANNEL_LENGTH
    nu_s = sympy.nsimplify(nu)
    a = sympy.nsimplify(amplitude) * sympy.exp(-T)
    psi = a * X * (2 * length - X) / length ** 2 * Y ** 3
    u = sympy.diff(psi, Y)
    v = -sympy.diff(psi, X)
    p = a * (X * Y - sympy.Rational(1, 2))

    def lap(w):
        return sympy.diff(w, X, 2) + sympy.diff(w, Y, 2)

    fx = sympy.diff(u, T) - nu_s * lap(u) + u * sympy.diff(u, X) + v * sympy.diff(u, Y) + sympy.diff(p, X)
    fy = sympy.diff(v, T) - nu_s * lap(v) + u * sympy.diff(v, X) + v * sympy.diff(v, Y) + sympy.diff(p, Y)
    fx, fy = sympy.simplify(fx), sympy.simplify(fy)

    # 出口 x = L，外法向 (1, 0)
    if variant == PROBLEM_I:
        phi7 = from_sympy(sympy.simplify(-p + nu_s * sympy.diff(u, X)))
    else:
        phi7 = from_sympy((sympy.simplify(-p + nu_s * sympy.diff(u, X)),
                           sympy.simplify(nu_s * sympy.diff(v, X))))

    return ManufacturedSolution(
        variant=variant, nu=float(nu),
        velocity=from_sympy((u, v)),
        grad_u=from_sympy((sympy.diff(u, X), sympy.diff(u, Y))),
        grad_v=from_sympy((sympy.diff(v, X), sympy.diff(v, Y))),
        pressure=from_sympy(p),
        f=from_sympy((fx, fy)),
        phi7=phi7,
        h1=from_sympy((u, v)),
    )


def velocity_errors(result, solution: ManufacturedSolution, index: int = -1):
    """t_index 处的 (L₂ 误差, H¹ 误差)"""
    system = result.setup.system
    ed = system.elements
    t = float(result.times[index])
    v = result.velocities[index]
    x, y = ed.points[..., 0], ed.points[..., 1]

    exact = np.stack(solution.velocity(x, y, t), axis=-1)
    diff = field_at_points(ed, v) - exact
    l2 = float(np.sqrt(np.sum(ed.weights * np.sum(diff ** 2, axis=-1))))

    grad_exact = np.stack([np.stack(solution.grad_u(x, y, t), axis=-1),
                           np.stack(solution.grad_v(x, y, t), axis=-1)], axis=-2)
    gdiff = gradient_at_points(ed, v) - grad_exact
    semi = float(np.sum(ed.weights * np.sum(gdiff ** 2, axis=(-1, -2))))
    return l2, float(np.sqrt(l2 ** 2 + semi))


def _rates(h: np.ndarray, errors: np.ndarray) -> np.ndarray:
    rates = np.full(len(errors), np.nan)
    for i in range(1, len(errors)):
        if errors[i] > 0 and errors[i - 1] > 0:
            rates[i] = np.log(errors[i - 1] / errors[i]) / np.log(h[i - 1] / h[i])
    return rates


def convergence_study(variant: str = PROBLEM_I, nu: float = 1.0, levels: int = 3,
                      base_resolution: int = 2, t_final: float = 0.1, dt: float = 0.05,
                      time_refinement: str = 'h2', solve_config: Optional[SolveConfig] = None,
                      amplitude: float = 0.5) -> pd.DataFrame:
    """
    制造解上的加密研究

    每层分辨率加倍；time_refinement 为 h2 时 Δt 每层除以 4，h 时除以 2，fixed 时不变。

    Returns:
        DataFrame，列为 level, resolution, h, dt, L2_error, H1_error, L2_rate, H1_rate
    """
    solution = manufactured_solution(variant, nu, amplitude)
    factor = {'h2': 4.0, 'h': 2.0, 'fixed': 1.0}[time_refinement]
    rows: List[dict] = []
    for level in range(levels):
        resolution = base_resolution * 2 ** level
        step = dt / factor ** level
        mesh = generate_mesh('channel', resolution, CHANNEL_PLAN)
        spec = solution.spec(t_final, step)
        result = run(spec, mesh, solve_config)
        l2, h1 = velocity_errors(result, solution)
        rows.append({'level': level, 'resolution': resolution, 'h': mesh.h, 'dt': step,
                     'L2_error': l2, 'H1_error': h1})
        logger.info("收敛研究 第 %d 层: h=%.4e, Δt=%.4e, L2=%.6e, H1=%.6e",
                    level, mesh.h, step, l2, h1)

    df = pd.DataFrame(rows)
    df['L2_rate'] = _rates(df['h'].to_numpy(), df['L2_error'].to_numpy())
    df['H1_rate'] = _rates(df['h'].to_numpy(), df['H1_error'].to_numpy())
    return df


def _disk_fields():
    """圆盘上 v·n = 0 的无散场（ψ 在单位圆上为零）及其 Δv、rot v"""
    psi = (1 - X ** 2 - Y ** 2) * (1 + X)
    u, v = sympy.diff(psi, Y), -sympy.diff(psi, X)
    laplacian = (sympy.diff(u, X, 2) + sympy.diff(u, Y, 2),
                 sympy.diff(v, X, 2) + sympy.diff(v, Y, 2))
    rot = sympy.diff(v, X) - sympy.diff(u, Y)
    return from_sympy((u, v)), from_sympy(laplacian), from_sympy(rot)


def _test_field(x, y, t=0.0):
    return 1.0 + x * y, x - y ** 2


def decomposition_study(variant: str = PROBLEM_I, resolutions=(2, 4, 8)) -> pd.DataFrame:
    """
    圆盘（整条边界为 Γ₃）上 -(Δv, u) 的分解与直接积分的差

    右端：装配的主部 A(v_h, u_h) 减去 Γ₃ 上的 ⟨rot v × n, u_h⟩；
    左端：对精确 Δv 的体积分。u_h 为约束空间中的投影。

    Returns:
        DataFrame，列为 resolution, h, lhs, rhs, defect, rate
    """
    velocity, laplacian, rot = _disk_fields()

    def rot_cross_n(x, y, t=0.0):
        # (ω e_z) × n = ω τ，τ = (-n_y, n_x)，n = (x, y)/r
        r = np.hypot(x, y)
        omega = rot(x, y, t)
        return -omega * y / r, omega * x / r

    rows = []
    for resolution in resolutions:
        mesh = generate_mesh('disk', resolution, 3)
        setup = prepare(ProblemSpec(variant=variant, nu=1.0), mesh)
        system, dofmap = setup.system, setup.dofmap
        ed = system.elements

        v_h = interpolate(dofmap.topo, velocity, 0.0)
        u_h = dofmap.expand(dofmap.reduce(interpolate(dofmap.topo, _test_field)))

        lap = np.stack(laplacian(ed.points[..., 0], ed.points[..., 1], 0.0), axis=-1)
        lhs = -float(np.sum(ed.weights * np.sum(lap * field_at_points(ed, u_h), axis=-1)))
        natural = boundary_data_vector(system, 3, rot_cross_n, 0.0, scalar=False)
        rhs = float(u_h @ (system.principal @ v_h) - u_h @ natural)
        rows.append({'resolution': resolution, 'h': mesh.h, 'lhs': lhs, 'rhs': rhs,
                     'defect': abs(lhs - rhs)})
        logger.info("分解一致性 问题 %s: h=%.4e, 差 %.6e", variant, mesh.h, rows[-1]['defect'])

    df = pd.DataFrame(rows)
    df['rate'] = _rates(df['h'].to_numpy(), df['defect'].to_numpy())
    return df
