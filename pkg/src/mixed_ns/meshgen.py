"""
测试网格生成：单位正方形、圆盘、圆环、通道
"""
import logging
from typing import Dict, Tuple, Union

import numpy as np
from scipy.spatial import Delaunay

import config
from src.mixed_ns.errors import GeometryError
from src.mixed_ns.geometry import Mesh, circle, topological_boundary


logger = logging.getLogger(__name__)

# 各形状的边界边名称
SHAPE_SIDES = {
    'unit_square': ('bottom', 'right', 'top', 'left'),
    'channel': ('inlet', 'outlet', 'bottom', 'top'),
    'disk': ('boundary',),
    'annulus': ('outer', 'inner'),
}

# 组合名称
SIDE_ALIASES = {
    'walls': ('bottom', 'top'),
}

SegmentPlan = Union[int, Dict[str, int], None]


def resolve_segment_plan(shape: str, segment_plan: SegmentPlan) -> Dict[str, int]:
    """
    把标签分配规则展开为 {边名: 标签}

    segment_plan 可以是单个整数（全部边界同一标签），或字典；
    字典中的 'all' 作为默认值，'walls' 代表通道上下壁。
    """
    sides = SHAPE_SIDES[shape]
    if segment_plan is None:
        segment_plan = 1
    if isinstance(segment_plan, (int, np.integer)):
        return {side: int(segment_plan) for side in sides}

    plan = {side: int(segment_plan.get('all', 1)) for side in sides}
    for key, label in segment_plan.items():
        if key == 'all':
            continue
        targets = SIDE_ALIASES.get(key, (key,))
        for side in targets:
            if side not in sides:
                raise GeometryError(f"形状 {shape} 没有名为 {key} 的边界，可选: {', '.join(sides)}")
            plan[side] = int(label)
    return plan


def _structured_rectangle(nx: int, ny: int, lx: float, ly: float) -> Tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    a = (j * (nx + 1) + i).ravel()
    b = a + 1
    c = a + nx + 2
    d = a + nx + 1
    triangles = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return nodes, triangles


def _rectangle_side(mid: np.ndarray, lx: float, ly: float, names) -> np.ndarray:
    """按边中点位置判断矩形的边（names 依次为下、右、上、左）"""
    bottom, right, top, left = names
    tol = 1e-9 * max(lx, ly)
    sides = np.empty(len(mid), dtype=object)
    sides[np.abs(mid[:, 1]) < tol] = bottom
    sides[np.abs(mid[:, 0] - lx) < tol] = right
    sides[np.abs(mid[:, 1] - ly) < tol] = top
    sides[np.abs(mid[:, 0]) < tol] = left
    return sides


def _disk(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """中心点加 n 圈同心点（第 j 圈 6j 个点），Delaunay 三角化"""
    points = [np.zeros((1, 2))]
    for j in range(1, n + 1):
        theta = 2.0 * np.pi * np.arange(6 * j) / (6 * j)
        if j % 2 == 0:
            theta = theta + np.pi / (6 * j)
        r = j / n
        points.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    nodes = np.vstack(points)

    triangles = Delaunay(nodes).simplices.astype(np.int64)
    p = nodes[triangles]
    area = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flipped = area < 0
    triangles[flipped] = triangles[flipped][:, [0, 2, 1]]
    return nodes, triangles


def _annulus(n: int, r_inner: float) -> Tuple[np.ndarray, np.ndarray]:
    """极坐标结构网格：径向 n 层，周向 8n 段"""
    nr = n
    nt = max(8, 8 * n)
    radii = np.linspace(r_inner, 1.0, nr + 1)
    theta = 2.0 * np.pi * np.arange(nt) / nt
    R, T = np.meshgrid(radii, theta, indexing='ij')
    nodes = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])

    i, k = np.meshgrid(np.arange(nr), np.arange(nt), indexing='ij')
    a = (i * nt + k).ravel()
    b = (i * nt + (k + 1) % nt).ravel()
    c = b + nt
    d = a + nt
    triangles = np.vstack([np.column_stack([a, c, b]), np.column_stack([a, d, c])])
    return nodes, triangles


def generate_mesh(shape: str, resolution: int, segment_plan: SegmentPlan = None) -> Mesh:
    """
    生成测试网格

    Args:
        shape: unit_square / disk / annulus / channel
        resolution: 分辨率（≥1）
        segment_plan: 边界标签分配规则

    Returns:
        Mesh；圆盘和圆环附带解析圆周描述
    """
    if shape not in SHAPE_SIDES:
        raise GeometryError(f"未知形状: {shape}，可选: {', '.join(SHAPE_SIDES)}")
    if int(resolution) < 1:
        raise GeometryError(f"分辨率必须 ≥ 1，得到 {resolution}")
    n = int(resolution)
    plan = resolve_segment_plan(shape, segment_plan)
    curves = ()

    if shape == 'unit_square':
        nodes, triangles = _structured_rectangle(n, n, 1.0, 1.0)
    elif shape == 'channel':
        length = config.CHANNEL_LENGTH
        nodes, triangles = _structured_rectangle(int(round(length * n)), n, length, 1.0)
    elif shape == 'disk':
        nodes, triangles = _disk(n)
        curves = (circle(1.0, name='boundary'),)
    else:
        nodes, triangles = _annulus(n, config.ANNULUS_INNER_RADIUS)
        curves = (circle(1.0, name='outer'),
                  circle(config.ANNULUS_INNER_RADIUS, side=-1, name='inner'))

    edges = topological_boundary(triangles)
    mid = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])

    if shape == 'unit_square':
        sides = _rectangle_side(mid, 1.0, 1.0, SHAPE_SIDES['unit_square'])
    elif shape == 'channel':
        sides = _rectangle_side(mid, config.CHANNEL_LENGTH, 1.0, ('bottom', 'outlet', 'top', 'inlet'))
    elif shape == 'disk':
        sides = np.full(len(edges), 'boundary', dtype=object)
    else:
        radius = np.hypot(nodes[edges, 0], nodes[edges, 1]).mean(axis=1)
        sides = np.where(radius > 0.5 * (1.0 + config.ANNULUS_INNER_RADIUS), 'outer', 'inner')

    labels = np.array([plan[s] for s in sides], dtype=np.int64)
    edge_curve = np.full(len(edges), -1, dtype=np.int64)
    if shape == 'disk':
        edge_curve[:] = 0
    elif shape == 'annulus':
        edge_curve = np.where(sides == 'outer', 0, 1).astype(np.int64)

    mesh = Mesh(nodes=nodes, triangles=triangles, boundary_edges=edges, edge_labels=labels,
                curves=curves, edge_curve=edge_curve, name=f"{shape}-{n}")
    logger.info("生成网格 %s: %s", mesh.name, mesh.summary())
    return mesh
