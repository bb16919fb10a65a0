"""
几何模块 - 网格表示、边界分段 Γ₁…Γ₇ 与边界标架（法向、切向、曲率）
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

import config
from src.mixed_ns.errors import GeometryError, MeshLabelError, MeshParseError, MeshTopologyError


logger = logging.getLogger(__name__)

VALID_LABELS = range(1, 8)


@dataclass(frozen=True)
class AnalyticBoundary:
    """
    解析边界曲线 x(s), y(s)

    side = +1 时外法向为 (y', -x')/|r'|，即沿参数方向行进时区域在左侧；
    side = -1 表示区域在右侧（例如圆环的内圆）。
    """
    name: str
    point: Callable[[np.ndarray], np.ndarray]
    first: Callable[[np.ndarray], np.ndarray]
    second: Callable[[np.ndarray], np.ndarray]
    s_range: Tuple[float, float]
    side: int = 1
    locate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def frame(self, s) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        计算参数 s 处的标架

        Returns:
            (法向 (m,2), 切向 (m,2), 曲率 (m,))
        """
        s = np.atleast_1d(np.asarray(s, dtype=float))
        d1 = np.atleast_2d(self.first(s))
        d2 = np.atleast_2d(self.second(s))
        speed = np.hypot(d1[:, 0], d1[:, 1])
        if np.any(speed <= np.finfo(float).eps):
            raise GeometryError(f"曲线 {self.name} 在参数范围内存在零速度点")

        normal = self.side * np.column_stack([d1[:, 1], -d1[:, 0]]) / speed[:, None]
        tangent = np.column_stack([-normal[:, 1], normal[:, 0]])
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        curvature = self.side * cross / speed ** 3
        return normal, tangent, curvature

    def closest_parameter(self, points) -> np.ndarray:
        """求曲线上距离给定点最近的参数"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.locate is not None:
            return np.asarray(self.locate(points), dtype=float)

        s0, s1 = self.s_range
        grid = np.linspace(s0, s1, 257)
        samples = np.atleast_2d(self.point(grid))
        result = np.empty(len(points))
        for idx, p in enumerate(points):
            j = int(np.argmin(np.sum((samples - p) ** 2, axis=1)))
            lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
            opt = minimize_scalar(
                lambda s: float(np.sum((np.atleast_2d(self.point(np.array([s])))[0] - p) ** 2)),
                bounds=(lo, hi), method='bounded', options={'xatol': 1e-14}
            )
            result[idx] = opt.x
        return result

    def check_regular(self, samples: int = 64):
        """检查曲线在参数范围内为正则曲线"""
        s = np.linspace(*self.s_range, samples)
        self.frame(s)


def circle(radius: float = 1.0, center=(0.0, 0.0), side: int = 1, name: str = None) -> AnalyticBoundary:
    """逆时针参数化的圆"""
    cx, cy = center
    r = float(radius)

    def point(s):
        return np.column_stack([cx + r * np.cos(s), cy + r * np.sin(s)])

    def first(s):
        return np.column_stack([-r * np.sin(s), r * np.cos(s)])

    def second(s):
        return np.column_stack([-r * np.cos(s), -r * np.sin(s)])

    def locate(points):
        return np.mod(np.arctan2(points[:, 1] - cy, points[:, 0] - cx), 2.0 * np.pi)

    return AnalyticBoundary(
        name=name or f"circle(R={r:g})",
        point=point, first=first, second=second,
        s_range=(0.0, 2.0 * np.pi), side=side, locate=locate,
    )


def line(p0, p1, side: int = 1, name: str = None) -> AnalyticBoundary:
    """线段 p0 → p1"""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0

    def point(s):
        s = np.atleast_1d(s)
        return p0[None, :] + s[:, None] * d[None, :]

    def first(s):
        return np.tile(d, (len(np.atleast_1d(s)), 1))

    def second(s):
        return np.zeros((len(np.atleast_1d(s)), 2))

    def locate(points):
        return np.clip((points - p0) @ d / (d @ d), 0.0, 1.0)

    return AnalyticBoundary(
        name=name or f"line({p0.tolist()}->{p1.tolist()})",
        point=point, first=first, second=second,
        s_range=(0.0, 1.0), side=side, locate=locate,
    )


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    三角形网格

    boundary_edges 在构造时被重新定向：沿 a→b 行进时区域位于左侧，
    因而边的外法向为切向顺时针旋转90°。
    """
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_labels: np.ndarray
    curves: Tuple[AnalyticBoundary, ...] = ()
    edge_curve: Optional[np.ndarray] = None
    name: str = 'mesh'
    edge_owner: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        labels = np.ascontiguousarray(self.edge_labels, dtype=np.int64).reshape(-1)
        if self.edge_curve is None:
            edge_curve = np.full(len(edges), -1, dtype=np.int64)
        else:
            edge_curve = np.ascontiguousarray(self.edge_curve, dtype=np.int64).reshape(-1)

        edges, owner = _validate_topology(nodes, triangles, edges, labels)
        if len(edge_curve) != len(edges):
            raise MeshTopologyError("edge_curve 长度与边界边数量不一致")
        if np.any(edge_curve >= len(self.curves)):
            raise MeshTopologyError("edge_curve 引用了不存在的解析曲线")

        for arr in (nodes, triangles, edges, labels, edge_curve, owner):
            arr.setflags(write=False)
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'triangles', triangles)
        object.__setattr__(self, 'boundary_edges', edges)
        object.__setattr__(self, 'edge_labels', labels)
        object.__setattr__(self, 'edge_curve', edge_curve)
        object.__setattr__(self, 'edge_owner', owner)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_boundary_edges(self) -> int:
        return len(self.boundary_edges)

    @property
    def labels_present(self) -> Tuple[int, ...]:
        return tuple(sorted(set(int(x) for x in self.edge_labels)))

    @property
    def h(self) -> float:
        """最大单元边长"""
        tri = self.nodes[self.triangles]
        lengths = np.linalg.norm(tri - np.roll(tri, -1, axis=1), axis=2)
        return float(lengths.max())

    def signed_areas(self) -> np.ndarray:
        return _signed_areas(self.nodes, self.triangles)

    def edge_vectors(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """边界边的 (长度, 单位切向, 单位外法向)"""
        a = self.nodes[self.boundary_edges[:, 0]]
        b = self.nodes[self.boundary_edges[:, 1]]
        d = b - a
        length = np.hypot(d[:, 0], d[:, 1])
        tangent = d / length[:, None]
        normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        return length, tangent, normal

    def curve_of_edge(self, edge_id: int, analytic: Optional[Dict[int, AnalyticBoundary]] = None):
        """边所属的解析曲线（analytic 按标签覆盖网格自带的曲线）"""
        if analytic:
            label = int(self.edge_labels[edge_id])
            if label in analytic:
                return analytic[label]
        idx = int(self.edge_curve[edge_id])
        return self.curves[idx] if idx >= 0 else None

    def summary(self) -> Dict[str, int]:
        return {
            'nodes': self.num_nodes,
            'triangles': self.num_triangles,
            'boundary_edges': self.num_boundary_edges,
        }


def _signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = nodes[triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def triangle_edges(triangles: np.ndarray) -> np.ndarray:
    """每个三角形按逆时针顺序的三条有向边 (T,3,2)：(v0,v1), (v1,v2), (v2,v0)"""
    return np.stack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1)


def topological_boundary(triangles: np.ndarray) -> np.ndarray:
    """只属于一个三角形的有向边"""
    directed = triangle_edges(triangles).reshape(-1, 2)
    keys = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    return directed[counts[inverse] == 1]


def _validate_topology(nodes, triangles, edges, labels):
    """检查网格不变量，返回重新定向的边界边和每条边所属的三角形"""
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise MeshTopologyError("节点坐标必须为 (N,2) 数组")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshTopologyError("三角形必须为 (T,3) 数组")
    if len(triangles) == 0:
        raise MeshTopologyError("网格中没有三角形")
    if triangles.min() < 0 or triangles.max() >= len(nodes):
        raise MeshTopologyError("三角形节点编号越界")
    if len(labels) != len(edges):
        raise MeshTopologyError("边界标签数量与边界边数量不一致")

    bad_labels = sorted(set(int(x) for x in labels) - set(VALID_LABELS))
    if bad_labels:
        raise MeshLabelError(f"边界标签 {bad_labels} 超出 1..7")

    areas = _signed_areas(nodes, triangles)
    if np.any(areas <= 0):
        flipped = np.flatnonzero(areas <= 0)
        raise MeshTopologyError(f"三角形 {flipped[:5].tolist()} 非逆时针（有向面积 ≤ 0）")

    directed = triangle_edges(triangles).reshape(-1, 2)
    keys = np.sort(directed, axis=1)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise MeshTopologyError("存在被三个以上三角形共享的边（非流形网格）")

    lookup = {tuple(k): i for i, k in enumerate(uniq)}
    first_occurrence = np.full(len(uniq), -1, dtype=np.int64)
    first_occurrence[inverse] = np.arange(len(directed))

    oriented = np.empty_like(edges)
    owner = np.empty(len(edges), dtype=np.int64)
    seen = set()
    for e, (i, j) in enumerate(edges):
        key = (min(i, j), max(i, j))
        if key in seen:
            raise MeshTopologyError(f"边界边 {key} 重复出现")
        seen.add(key)
        u = lookup.get(key)
        if u is None:
            raise MeshTopologyError(f"边界边 {key} 不属于任何三角形（悬挂边）")
        if counts[u] != 1:
            raise MeshTopologyError(f"边界边 {key} 属于两个三角形，不在区域边界上")
        d = first_occurrence[u]
        oriented[e] = directed[d]
        owner[e] = d // 3

    n_topo = int(np.sum(counts == 1))
    if n_topo != len(edges):
        raise MeshTopologyError(f"区域边界有 {n_topo} 条边，但只标记了 {len(edges)} 条")

    return oriented, owner


@dataclass(frozen=True)
class BoundaryFrame:
    """边界节点的标架"""
    node_id: int
    normal: np.ndarray
    tangent: np.ndarray
    curvature: float
    corner: bool = False
    labels: Tuple[int, ...] = ()


def _node_edges(mesh: Mesh) -> Dict[int, Tuple[List[int], List[int]]]:
    """每个边界节点的 (入边列表, 出边列表)"""
    incidence: Dict[int, Tuple[List[int], List[int]]] = {}
    for e, (a, b) in enumerate(mesh.boundary_edges):
        incidence.setdefault(int(a), ([], []))[1].append(e)
        incidence.setdefault(int(b), ([], []))[0].append(e)
    return incidence


def build_frames(mesh: Mesh, analytic: Optional[Dict[int, AnalyticBoundary]] = None) -> List[BoundaryFrame]:
    """
    计算每个边界节点的标架

    有解析曲线时由参数化计算法向与曲率；否则法向取相邻边法向的角平分方向，
    曲率取转角除以相邻两边长度和的一半。

    Args:
        mesh: 网格
        analytic: 按边界标签指定的解析曲线（覆盖网格自带的曲线）

    Returns:
        按节点编号排序的 BoundaryFrame 列表
    """
    for curve in set(mesh.curves) | set((analytic or {}).values()):
        curve.check_regular()

    length, tangent, normal = mesh.edge_vectors()
    corner_cos = np.cos(np.deg2rad(config.CORNER_ANGLE_DEG))
    frames = []

    for node, (incoming, outgoing) in sorted(_node_edges(mesh).items()):
        incident = incoming + outgoing
        labels = tuple(sorted(set(int(mesh.edge_labels[e]) for e in incident)))
        curves = {id(mesh.curve_of_edge(e, analytic)) for e in incident}
        curve = mesh.curve_of_edge(incident[0], analytic)

        turning = 0.0
        smooth_pair = len(incoming) == 1 and len(outgoing) == 1
        if smooth_pair:
            t_in, t_out = tangent[incoming[0]], tangent[outgoing[0]]
            cross = t_in[0] * t_out[1] - t_in[1] * t_out[0]
            turning = float(np.arctan2(cross, float(t_in @ t_out)))
        corner = (not smooth_pair or len(labels) > 1 or len(curves) > 1
                  or np.cos(turning) < corner_cos)

        if curve is not None and len(curves) == 1:
            s = curve.closest_parameter(mesh.nodes[node][None, :])
            n, t, k = curve.frame(s)
            frames.append(BoundaryFrame(node, n[0], t[0], float(k[0]), corner, labels))
            continue

        bisector = normal[incident].sum(axis=0)
        norm = np.hypot(*bisector)
        if norm <= np.finfo(float).eps:
            raise GeometryError(f"节点 {node} 的相邻边法向相互抵消，无法确定法向")
        n = bisector / norm
        t = np.array([-n[1], n[0]])
        if corner:
            k = 0.0
        else:
            k = turning / (0.5 * (length[incoming[0]] + length[outgoing[0]]))
        frames.append(BoundaryFrame(node, n, t, float(k), corner, labels))

    if corner_nodes := [f.node_id for f in frames if f.corner]:
        logger.info("边界角点 %d 个", len(corner_nodes))
    return frames


@dataclass(frozen=True)
class EdgeQuadrature:
    """
    边界边上的求积数据

    points/weights/normals/tangents/curvature 的第一维为边界边编号，第二维为求积点。
    weights 已包含边长。s 为边上的局部参数 (0..1)。
    """
    s: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    curvature: np.ndarray
    labels: np.ndarray


def gauss_edge_rule(n_points: int = None) -> Tuple[np.ndarray, np.ndarray]:
    """[0,1] 上的 Gauss-Legendre 公式"""
    n_points = n_points or config.EDGE_QUAD_POINTS
    x, w = np.polynomial.legendre.leggauss(n_points)
    return 0.5 * (x + 1.0), 0.5 * w


def edge_end_curvature(mesh: Mesh, frames: List[BoundaryFrame]) -> np.ndarray:
    """
    每条边两个端点上使用的曲率 (E,2)

    角点没有良定义的曲率：取该边另一端（光滑节点）的值，两端都是角点时取 0。
    缺少端点标架的边记为 NaN，由需要曲率的装配步骤报错。
    """
    by_node = {f.node_id: f for f in frames}
    values = np.zeros((mesh.num_boundary_edges, 2))
    for e, (a, b) in enumerate(mesh.boundary_edges):
        fa, fb = by_node.get(int(a)), by_node.get(int(b))
        if fa is None or fb is None:
            values[e] = np.nan
            continue
        ka = None if fa.corner else fa.curvature
        kb = None if fb.corner else fb.curvature
        if ka is None and kb is None:
            ka = kb = 0.0
        elif ka is None:
            ka = kb
        elif kb is None:
            kb = ka
        values[e] = (ka, kb)
    return values


def edge_quadrature(mesh: Mesh, frames: List[BoundaryFrame],
                    analytic: Optional[Dict[int, AnalyticBoundary]] = None,
                    n_points: int = None) -> EdgeQuadrature:
    """构造所有边界边上的求积点与标架"""
    s, w = gauss_edge_rule(n_points)
    length, tangent, normal = mesh.edge_vectors()
    a = mesh.nodes[mesh.boundary_edges[:, 0]]
    b = mesh.nodes[mesh.boundary_edges[:, 1]]
    points = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    weights = length[:, None] * w[None, :]

    ends = edge_end_curvature(mesh, frames)
    curvature = ends[:, [0]] * (1.0 - s[None, :]) + ends[:, [1]] * s[None, :]
    normals = np.repeat(normal[:, None, :], len(s), axis=1)
    tangents = np.repeat(tangent[:, None, :], len(s), axis=1)

    for e in range(mesh.num_boundary_edges):
        curve = mesh.curve_of_edge(e, analytic)
        if curve is None:
            continue
        params = curve.closest_parameter(points[e])
        n, t, k = curve.frame(params)
        normals[e], tangents[e], curvature[e] = n, t, k

    return EdgeQuadrature(s=s, points=points, weights=weights, normals=normals,
                          tangents=tangents, curvature=curvature,
                          labels=np.asarray(mesh.edge_labels))


def load_mesh(path: str) -> Mesh:
    """
    读取 mesh2d 格式网格文件

    格式：首行 `mesh2d 1`；`nodes N` 后接 N 行 `x y`；`triangles T` 后接 `i j k`；
    `boundary E` 后接 `i j label`。`#` 之后为注释。
    """
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            raw_lines = fh.readlines()
    except OSError as e:
        raise MeshParseError(f"无法读取网格文件 {path}: {e}")

    lines = []
    for lineno, raw in enumerate(raw_lines, 1):
        text = raw.split('#', 1)[0].strip()
        if text:
            lines.append((lineno, text.split()))

    if not lines or lines[0][1] != ['mesh2d', '1']:
        raise MeshParseError("缺少文件头 `mesh2d 1`", lines[0][0] if lines else 1)

    sections = {'nodes': (2, float), 'triangles': (3, int), 'boundary': (3, int)}
    data: Dict[str, list] = {}
    pos = 1
    while pos < len(lines):
        lineno, tokens = lines[pos]
        if len(tokens) != 2 or tokens[0] not in sections:
            raise MeshParseError(f"期望段落头 nodes/triangles/boundary，得到 {' '.join(tokens)}", lineno)
        name = tokens[0]
        if name in data:
            raise MeshParseError(f"段落 {name} 重复", lineno)
        try:
            count = int(tokens[1])
        except ValueError:
            raise MeshParseError(f"段落 {name} 的数量不是整数", lineno)
        width, cast = sections[name]
        rows = []
        for k in range(count):
            pos += 1
            if pos >= len(lines):
                raise MeshParseError(f"段落 {name} 声明 {count} 行，实际只有 {k} 行", lineno)
            row_no, row = lines[pos]
            if len(row) != width:
                raise MeshParseError(f"段落 {name} 每行应有 {width} 个数", row_no)
            try:
                rows.append([cast(v) for v in row])
            except ValueError:
                raise MeshParseError(f"无法解析数值: {' '.join(row)}", row_no)
        data[name] = rows
        pos += 1

    missing = [name for name in sections if name not in data]
    if missing:
        raise MeshParseError(f"缺少段落 {missing}")

    boundary = np.array(data['boundary'], dtype=np.int64).reshape(-1, 3)
    mesh = Mesh(
        nodes=np.array(data['nodes'], dtype=float).reshape(-1, 2),
        triangles=np.array(data['triangles'], dtype=np.int64).reshape(-1, 3),
        boundary_edges=boundary[:, :2],
        edge_labels=boundary[:, 2],
        name=str(path),
    )
    logger.info("读取网格 %s: %s", path, mesh.summary())
    return mesh


def save_mesh(mesh: Mesh, path: str) -> str:
    """以 mesh2d 格式写出网格"""
    out = ['mesh2d 1', f'nodes {mesh.num_nodes}']
    out += [f'{x:.17g} {y:.17g}' for x, y in mesh.nodes]
    out.append(f'triangles {mesh.num_triangles}')
    out += [f'{i} {j} {k}' for i, j, k in mesh.triangles]
    out.append(f'boundary {mesh.num_boundary_edges}')
    out += [f'{i} {j} {lab}' for (i, j), lab in zip(mesh.boundary_edges, mesh.edge_labels)]
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write('\n'.join(out) + '\n')
    return path
