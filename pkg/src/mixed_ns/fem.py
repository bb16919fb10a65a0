"""
有限元基础：参考单元、数值积分、P2 拓扑与稀疏装配
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from src.mixed_ns.geometry import Mesh


# 6点4阶三角形积分公式（参考三角形重心坐标，权重和为1）
_A, _WA = 0.445948490915965, 0.223381589678011
_B, _WB = 0.091576213509771, 0.109951743655322
TRI_BARY = np.array([
    [1 - 2 * _A, _A, _A], [_A, 1 - 2 * _A, _A], [_A, _A, 1 - 2 * _A],
    [1 - 2 * _B, _B, _B], [_B, 1 - 2 * _B, _B], [_B, _B, 1 - 2 * _B],
])
TRI_WEIGHTS = np.array([_WA, _WA, _WA, _WB, _WB, _WB])

# P2 局部自由度：三个顶点，随后是边 (0,1)、(1,2)、(2,0) 的中点
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def p2_values(bary: np.ndarray) -> np.ndarray:
    """P2 基函数值 (6, Q)"""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.array([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


def p2_ref_gradients(bary: np.ndarray) -> np.ndarray:
    """
    P2 基函数对参考坐标 (ξ, η) 的梯度 (6, Q, 2)

    λ0 = 1 - ξ - η, λ1 = ξ, λ2 = η
    """
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    d_l = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.empty((6, len(bary), 2))
    for i, li in enumerate((l0, l1, l2)):
        grads[i] = (4 * li - 1)[:, None] * d_l[i][None, :]
    for k, (i, j) in enumerate(LOCAL_EDGES):
        li, lj = (l0, l1, l2)[i], (l0, l1, l2)[j]
        grads[3 + k] = 4 * (lj[:, None] * d_l[i][None, :] + li[:, None] * d_l[j][None, :])
    return grads


def p1_values(bary: np.ndarray) -> np.ndarray:
    """P1 基函数值 (3, Q)"""
    return bary.T.copy()


def p2_edge_values(s: np.ndarray) -> np.ndarray:
    """边上 P2 基函数（起点、中点、终点）在局部参数 s 处的值 (3, Q)"""
    return np.array([(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)])


@dataclass(frozen=True)
class P2Topology:
    """
    P2 节点编号：先是网格顶点，再是每条边的中点

    tri_dofs[t] = (v0, v1, v2, m01, m12, m20)
    boundary_mid[e] 为第 e 条边界边中点的节点号
    """
    num_vertices: int
    edges: np.ndarray
    tri_dofs: np.ndarray
    coords: np.ndarray
    boundary_mid: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.coords)


def build_p2(mesh: Mesh) -> P2Topology:
    """构造 P2 拓扑（中点取在弦上）"""
    tri = mesh.triangles
    local = np.stack([tri[:, [i, j]] for i, j in LOCAL_EDGES], axis=1)
    keys = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(len(tri), 3)

    nv = mesh.num_nodes
    tri_dofs = np.hstack([tri, nv + inverse]).astype(np.int64)
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    coords = np.vstack([mesh.nodes, mids])

    lookup = {tuple(k): i for i, k in enumerate(edges)}
    boundary_mid = np.array(
        [nv + lookup[(min(a, b), max(a, b))] for a, b in mesh.boundary_edges], dtype=np.int64
    )
    return P2Topology(num_vertices=nv, edges=edges, tri_dofs=tri_dofs,
                      coords=coords, boundary_mid=boundary_mid)


@dataclass(frozen=True)
class ElementData:
    """
    所有三角形上的积分点数据

    points (T,Q,2)，weights (T,Q)（含面积），phi (6,Q)，grad (T,6,Q,2)，psi (3,Q)
    """
    points: np.ndarray
    weights: np.ndarray
    phi: np.ndarray
    grad: np.ndarray
    psi: np.ndarray
    dofs: np.ndarray
    pdofs: np.ndarray


def element_data(mesh: Mesh, topo: P2Topology) -> ElementData:
    p = mesh.nodes[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.linalg.inv(jac)

    points = np.einsum('qk,tkd->tqd', TRI_BARY, p)
    weights = 0.5 * det[:, None] * TRI_WEIGHTS[None, :]
    ref = p2_ref_gradients(TRI_BARY)
    grad = np.einsum('iqa,tak->tiqk', ref, inv)
    return ElementData(points=points, weights=weights, phi=p2_values(TRI_BARY), grad=grad,
                       psi=p1_values(TRI_BARY), dofs=topo.tri_dofs, pdofs=mesh.triangles)


def velocity_dofs(nodes: np.ndarray) -> np.ndarray:
    """节点 → 交错排列的速度自由度 (…, 2)：2*node + 分量"""
    nodes = np.asarray(nodes, dtype=np.int64)
    return np.stack([2 * nodes, 2 * nodes + 1], axis=-1)


def assemble_local(rows: np.ndarray, cols: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    """把单元矩阵 local (T,a,b) 累加为稀疏矩阵"""
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    mat = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
    mat.sum_duplicates()
    return mat


def assemble_vector(rows: np.ndarray, local: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    np.add.at(out, rows.ravel(), local.ravel())
    return out


def vector_element_dofs(ed: ElementData) -> np.ndarray:
    """单元的速度自由度 (T,12)，顺序为 (基函数 i, 分量 c) → 2*i + c"""
    return velocity_dofs(ed.dofs).reshape(len(ed.dofs), 12)


def field_at_points(ed: ElementData, values: np.ndarray) -> np.ndarray:
    """P2 向量场在积分点的值 (T,Q,2)；values 为交错的系数向量"""
    coef = values.reshape(-1, 2)[ed.dofs]
    return np.einsum('iq,tic->tqc', ed.phi, coef)


def gradient_at_points(ed: ElementData, values: np.ndarray) -> np.ndarray:
    """P2 向量场在积分点的梯度 (T,Q,2,2)，[..., c, d] = ∂_d u_c"""
    coef = values.reshape(-1, 2)[ed.dofs]
    return np.einsum('tiqd,tic->tqcd', ed.grad, coef)


def interpolate(topo: P2Topology, func, *args) -> np.ndarray:
    """在 P2 节点上插值向量函数 func(x, y, *args) → (u, v)，返回交错系数"""
    x, y = topo.coords[:, 0], topo.coords[:, 1]
    u, v = func(x, y, *args)
    out = np.empty(2 * topo.num_nodes)
    out[0::2] = np.broadcast_to(u, x.shape)
    out[1::2] = np.broadcast_to(v, x.shape)
    return out
