"""
测试参考单元、积分公式与 P2 拓扑
"""
import numpy as np
import pytest

from src.mixed_ns.fem import (TRI_BARY, TRI_WEIGHTS, build_p2, element_data, field_at_points,
                              gradient_at_points, interpolate, p2_edge_values,
                              p2_ref_gradients, p2_values)


def test_quadrature_weights():
    assert TRI_WEIGHTS.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(TRI_BARY.sum(axis=1), 1.0)


def test_partition_of_unity():
    np.testing.assert_allclose(p2_values(TRI_BARY).sum(axis=0), 1.0)
    np.testing.assert_allclose(p2_ref_gradients(TRI_BARY).sum(axis=0), 0.0, atol=1e-13)
    s = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose(p2_edge_values(s).sum(axis=0), 1.0)


def test_p2_topology(square_mesh):
    topo = build_p2(square_mesh)
    assert topo.num_vertices == 9
    assert topo.num_nodes == 25
    a = square_mesh.nodes[square_mesh.boundary_edges[:, 0]]
    b = square_mesh.nodes[square_mesh.boundary_edges[:, 1]]
    np.testing.assert_allclose(topo.coords[topo.boundary_mid], 0.5 * (a + b))


def test_element_area(square_mesh):
    ed = element_data(square_mesh, build_p2(square_mesh))
    assert ed.weights.sum() == pytest.approx(1.0)


def test_interpolation_is_exact_for_quadratics(square_mesh):
    topo = build_p2(square_mesh)
    ed = element_data(square_mesh, topo)

    def func(x, y):
        return x * y, 1.0 - y ** 2

    values = interpolate(topo, func)
    x, y = ed.points[..., 0], ed.points[..., 1]
    np.testing.assert_allclose(field_at_points(ed, values), np.stack(func(x, y), axis=-1), atol=1e-13)

    grad = gradient_at_points(ed, values)
    np.testing.assert_allclose(grad[..., 0, 0], y, atol=1e-12)
    np.testing.assert_allclose(grad[..., 0, 1], x, atol=1e-12)
    np.testing.assert_allclose(grad[..., 1, 1], -2.0 * y, atol=1e-12)
