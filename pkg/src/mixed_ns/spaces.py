"""
Taylor-Hood 空间与约束

速度 P2（交错排列 2*node + 分量），压力 P1。本质边界条件写成
u = T ŭ + g：T 的列是单位自由方向（内部节点为坐标轴，旋转节点为约束方向的垂直方向），
g 是满足边界值的约束分量。
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import config
from src.mixed_ns.errors import AssemblyError, ConfigValidationError, ConstraintError, MeshLabelError
from src.mixed_ns.fem import P2Topology, build_p2
from src.mixed_ns.geometry import BoundaryFrame, Mesh


logger = logging.getLogger(__name__)

PROBLEM_I = 'I'
PROBLEM_II = 'II'
VARIANTS = (PROBLEM_I, PROBLEM_II)

# 各边界段的本质条件类型：full 全部分量，normal 法向分量，tangent 切向分量
ESSENTIAL_KINDS = {
    PROBLEM_I: {1: 'full', 2: 'tangent', 4: 'tangent', 7: 'tangent', 3: 'normal', 5: 'normal'},
    PROBLEM_II: {1: 'full', 2: 'tangent', 4: 'tangent', 3: 'normal', 5: 'normal'},
}

# 法向速度自由（压力以自然边界条件进入）的边界段
FREE_NORMAL_LABELS = {
    PROBLEM_I: frozenset({2, 4, 6, 7}),
    PROBLEM_II: frozenset({2, 4, 7}),
}

FREE, FIXED, ROTATED = 0, 1, 2

_map_ids = itertools.count(1)


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ConfigValidationError('variant', f"未知问题类型 {variant!r}，可选: I, II")
    return variant


@dataclass(frozen=True)
class ConstraintRow:
    """节点上来自一条边界边的约束"""
    edge: int
    label: int
    kind: str
    direction: Optional[np.ndarray] = None


@dataclass(frozen=True)
class NodeConstraint:
    """
    一个速度节点上的全部约束

    rank = 2 时节点被完全固定；rank = 1 时只固定 direction 分量，free_direction 自由。
    """
    node: int
    rank: int
    rows: Tuple[ConstraintRow, ...]
    direction: Optional[np.ndarray] = None
    free_direction: Optional[np.ndarray] = None

    def rotation(self) -> np.ndarray:
        """(约束方向, 自由方向) 构成的正交矩阵，行向量"""
        if self.rank != 1:
            return np.eye(2)
        return np.vstack([self.direction, self.free_direction])


@dataclass(frozen=True, eq=False)
class DofMap:
    """速度/压力自由度与约束映射"""
    variant: str
    topo: P2Topology
    kinds: np.ndarray
    constraints: Dict[int, NodeConstraint]
    T: sp.csr_matrix
    pressure_mean: np.ndarray
    pressure_multiplier: bool
    labels: Tuple[int, ...]
    id: int = field(default_factory=lambda: next(_map_ids))

    @property
    def n_velocity(self) -> int:
        return 2 * self.topo.num_nodes

    @property
    def n_pressure(self) -> int:
        return self.topo.num_vertices

    @property
    def n_free(self) -> int:
        return self.T.shape[1]

    def classification(self, boundary_values: Optional['Field'] = None) -> List[str]:
        """
        每个速度自由度的分类：free / fixed-zero / fixed-value / rotated-pair
        """
        g = np.zeros(self.n_velocity) if boundary_values is None else self.constrained_part(
            boundary_values.velocity)
        names = []
        for dof, kind in enumerate(self.kinds):
            if kind == FREE:
                names.append('free')
            elif kind == ROTATED:
                names.append('rotated-pair')
            else:
                names.append('fixed-value' if abs(g[dof]) > 0.0 else 'fixed-zero')
        return names

    def reduce(self, full: np.ndarray) -> np.ndarray:
        """投影到约束空间的坐标（T 的列正交归一）"""
        return self.T.T @ full

    def expand(self, reduced: np.ndarray, offset: Optional[np.ndarray] = None) -> np.ndarray:
        full = self.T @ reduced
        if offset is not None:
            full = full + offset
        return full

    def constrained_part(self, velocity: np.ndarray) -> np.ndarray:
        """速度中被本质条件约束的分量 (I - T Tᵀ) u"""
        return velocity - self.T @ (self.T.T @ velocity)

    def constraint_residual(self, velocity: np.ndarray, g: Optional[np.ndarray] = None) -> float:
        """u - g 的约束分量范数"""
        diff = velocity if g is None else velocity - g
        return float(np.linalg.norm(self.constrained_part(diff)))

    def zero_field(self) -> 'Field':
        return Field(np.zeros(self.n_velocity), np.zeros(self.n_pressure), self.id)

    def check_field(self, fld: 'Field'):
        if fld.dofmap_id != self.id or len(fld.velocity) != self.n_velocity \
                or len(fld.pressure) != self.n_pressure:
            raise AssemblyError("场的自由度与 DofMap 不匹配")


@dataclass
class Field:
    """速度（交错排列）与压力系数"""
    velocity: np.ndarray
    pressure: np.ndarray
    dofmap_id: int

    def copy(self) -> 'Field':
        return Field(self.velocity.copy(), self.pressure.copy(), self.dofmap_id)

    def nodal_velocity(self) -> np.ndarray:
        return self.velocity.reshape(-1, 2)


def _edge_frame_at(mesh: Mesh, e: int, point: np.ndarray, analytic) -> Tuple[np.ndarray, np.ndarray]:
    curve = mesh.curve_of_edge(e, analytic)
    if curve is not None:
        n, t, _ = curve.frame(curve.closest_parameter(point[None, :]))
        return n[0], t[0]
    _, tangent, normal = mesh.edge_vectors()
    return normal[e], tangent[e]


def _node_rank(rows: List[ConstraintRow]) -> Tuple[int, Optional[np.ndarray]]:
    kinds = {r.kind for r in rows}
    if 'full' in kinds or {'normal', 'tangent'} <= kinds:
        return 2, None
    d = rows[0].direction
    for r in rows[1:]:
        if abs(d[0] * r.direction[1] - d[1] * r.direction[0]) > config.CONSTRAINT_PARALLEL_TOL:
            return 2, None
    return 1, d / np.linalg.norm(d)


def build_spaces(mesh: Mesh, frames: List[BoundaryFrame], variant: str,
                 analytic: Optional[Dict] = None) -> DofMap:
    """
    构造 Taylor-Hood 空间 V（问题 I）或 V₁（问题 II）

    法向/切向约束混合的节点，或两个约束方向不平行的节点，被完全固定。
    """
    check_variant(variant)
    if variant == PROBLEM_II and 6 in mesh.labels_present:
        raise MeshLabelError("问题 II 要求 Γ₆ 为空")

    topo = build_p2(mesh)
    by_node = {f.node_id: f for f in frames}
    essential = ESSENTIAL_KINDS[variant]

    rows_by_node: Dict[int, List[ConstraintRow]] = {}
    for e, ((a, b), label) in enumerate(zip(mesh.boundary_edges, mesh.edge_labels)):
        kind = essential.get(int(label))
        if kind is None:
            continue
        for node in (int(a), int(topo.boundary_mid[e]), int(b)):
            direction = None
            if kind != 'full':
                frame = by_node.get(node)
                if frame is not None and not frame.corner:
                    n, t = frame.normal, frame.tangent
                else:
                    if node < topo.num_vertices and frame is None:
                        raise AssemblyError(f"边界节点 {node} 缺少标架")
                    n, t = _edge_frame_at(mesh, e, topo.coords[node], analytic)
                direction = np.asarray(n if kind == 'normal' else t, dtype=float)
            rows_by_node.setdefault(node, []).append(ConstraintRow(e, int(label), kind, direction))

    kinds = np.full(2 * topo.num_nodes, FREE, dtype=np.int8)
    constraints: Dict[int, NodeConstraint] = {}
    t_rows, t_cols, t_vals = [], [], []
    col = 0
    for node in range(topo.num_nodes):
        rows = rows_by_node.get(node)
        if rows is None:
            t_rows += [2 * node, 2 * node + 1]
            t_cols += [col, col + 1]
            t_vals += [1.0, 1.0]
            col += 2
            continue
        rank, d = _node_rank(rows)
        if rank == 2:
            constraints[node] = NodeConstraint(node, 2, tuple(rows))
            kinds[2 * node:2 * node + 2] = FIXED
        else:
            free_dir = np.array([-d[1], d[0]])
            constraints[node] = NodeConstraint(node, 1, tuple(rows), d, free_dir)
            kinds[2 * node:2 * node + 2] = ROTATED
            t_rows += [2 * node, 2 * node + 1]
            t_cols += [col, col]
            t_vals += [free_dir[0], free_dir[1]]
            col += 1

    T = sp.csr_matrix((t_vals, (t_rows, t_cols)), shape=(2 * topo.num_nodes, col))

    areas = mesh.signed_areas()
    pressure_mean = np.zeros(topo.num_vertices)
    np.add.at(pressure_mean, mesh.triangles.ravel(), np.repeat(areas / 3.0, 3))
    multiplier = not (set(mesh.labels_present) & FREE_NORMAL_LABELS[variant])

    dofmap = DofMap(variant=variant, topo=topo, kinds=kinds, constraints=constraints, T=T,
                    pressure_mean=pressure_mean, pressure_multiplier=multiplier,
                    labels=mesh.labels_present)
    logger.info("问题 %s: 速度自由度 %d（约束后 %d），压力自由度 %d，压力均值约束 %s",
                variant, dofmap.n_velocity, dofmap.n_free, dofmap.n_pressure, multiplier)
    return dofmap


TraceData = Dict[int, Callable]


def _trace_value(traces: TraceData, label: int, x: float, y: float, t: float):
    func = traces.get(label)
    if func is None:
        return None
    return np.asarray(func(np.array([x]), np.array([y]), t), dtype=float).reshape(-1)


def essential_values(dofmap: DofMap, traces: TraceData, t: float = 0.0) -> Field:
    """
    按本质边界数据构造 g

    traces: 标签 → 函数 (x, y, t)；Γ₁ 返回速度向量 h₁，Γ₄ 返回切向分量 h₄，
    Γ₅ 返回法向分量 h₅。未给出的段取零。

    Raises:
        ConstraintError: 共享节点上不同段的边界值互相矛盾
    """
    g = np.zeros(dofmap.n_velocity)
    coords = dofmap.topo.coords
    for node, nc in dofmap.constraints.items():
        x, y = coords[node]
        mat, rhs = [], []
        for row in nc.rows:
            value = _trace_value(traces, row.label, x, y, t)
            if row.kind == 'full':
                vec = np.zeros(2) if value is None else np.broadcast_to(value, (2,))
                mat += [[1.0, 0.0], [0.0, 1.0]]
                rhs += [float(vec[0]), float(vec[1])]
            else:
                mat.append(row.direction)
                rhs.append(0.0 if value is None else float(value[0]))
        mat = np.asarray(mat, dtype=float)
        rhs = np.asarray(rhs, dtype=float)

        if nc.rank == 1:
            proj = mat @ nc.direction
            implied = rhs / proj
            value = implied[0]
            if np.max(np.abs(implied - value)) > config.CONSTRAINT_CONSISTENCY_TOL * max(1.0, abs(value)):
                raise ConstraintError(
                    f"节点 {node} ({x:.6g}, {y:.6g}) 上标签 {[r.label for r in nc.rows]} 的边界值矛盾"
                )
            g[2 * node:2 * node + 2] = value * nc.direction
        else:
            sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
            residual = np.linalg.norm(mat @ sol - rhs)
            if residual > config.CONSTRAINT_CONSISTENCY_TOL * max(1.0, np.linalg.norm(rhs)):
                raise ConstraintError(
                    f"节点 {node} ({x:.6g}, {y:.6g}) 上标签 {[r.label for r in nc.rows]} 的边界值矛盾"
                    f"（残差 {residual:.3e}）"
                )
            g[2 * node:2 * node + 2] = sol
    return Field(g, np.zeros(dofmap.n_pressure), dofmap.id)


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """
    消去约束后的鞍点系统

    未知量顺序：约化速度 ŭ，压力 p，（可选）压力均值乘子。
    """
    matrix: sp.csc_matrix
    rhs: np.ndarray
    offset: np.ndarray
    dofmap: DofMap
    with_pressure: bool

    def solve(self) -> np.ndarray:
        try:
            x = spla.splu(self.matrix).solve(self.rhs)
        except RuntimeError as e:
            raise AssemblyError(f"线性系统奇异: {e}")
        if not np.all(np.isfinite(x)):
            raise AssemblyError("线性系统求解得到非有限值")
        return x

    def expand(self, x: np.ndarray) -> Field:
        d = self.dofmap
        velocity = d.expand(x[:d.n_free], self.offset)
        pressure = np.zeros(d.n_pressure)
        if self.with_pressure:
            pressure = x[d.n_free:d.n_free + d.n_pressure].copy()
        return Field(velocity, pressure, d.id)

    def solve_field(self) -> Field:
        return self.expand(self.solve())


def apply_constraints(operator, dofmap: DofMap, boundary_values: Optional[Field] = None,
                      rhs: Optional[np.ndarray] = None,
                      divergence: Optional[sp.spmatrix] = None) -> ReducedSystem:
    """
    消去本质约束：矩阵 TᵀKT，右端 Tᵀ(b - K g)

    operator 可以是速度块稀疏矩阵，或带 principal 属性的 DiscreteSystem。
    给出 divergence 时组装鞍点系统，必要时追加压力均值为零的乘子。
    """
    K = getattr(operator, 'principal', operator)
    K = sp.csr_matrix(K)
    if K.shape != (dofmap.n_velocity, dofmap.n_velocity):
        raise AssemblyError(f"矩阵维数 {K.shape} 与自由度 {dofmap.n_velocity} 不匹配")
    if boundary_values is not None:
        dofmap.check_field(boundary_values)
        g = dofmap.constrained_part(boundary_values.velocity)
    else:
        g = np.zeros(dofmap.n_velocity)
    b = np.zeros(dofmap.n_velocity) if rhs is None else np.asarray(rhs, dtype=float)

    T = dofmap.T
    blocks_rhs = [T.T @ (b - K @ g)]
    A = (T.T @ K @ T).tocsr()
    if divergence is None:
        return ReducedSystem(A.tocsc(), blocks_rhs[0], g, dofmap, False)

    B = sp.csr_matrix(divergence)
    BT = (B @ T).tocsr()
    blocks_rhs.append(-(B @ g))
    if dofmap.pressure_multiplier:
        m = sp.csr_matrix(dofmap.pressure_mean.reshape(-1, 1))
        matrix = sp.bmat([[A, BT.T, None], [BT, None, m], [None, m.T, None]], format='csc')
        blocks_rhs.append(np.zeros(1))
    else:
        matrix = sp.bmat([[A, BT.T], [BT, None]], format='csc')
    return ReducedSystem(matrix, np.concatenate(blocks_rhs), g, dofmap, True)
