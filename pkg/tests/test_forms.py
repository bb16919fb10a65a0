"""
测试双线性型、对流矩阵与右端泛函
"""
import logging

import numpy as np
import pytest

from src.mixed_ns.errors import AssemblyError, ConfigValidationError
from src.mixed_ns.evolution import prepare
from src.mixed_ns.fem import interpolate
from src.mixed_ns.forms import (ProblemSpec, assemble_convection, assemble_rhs, data_functional,
                                trilinear)
from src.mixed_ns.meshgen import generate_mesh

from conftest import constant_vector


def _rotation(x, y):
    return -y, x


def test_rigid_rotation_has_no_strain(square_setup):
    _, setup = square_setup
    system = setup.system
    v = interpolate(setup.dofmap.topo, _rotation)
    assert abs(system.strain_energy(v)) < 1e-12
    # ν(∇v,∇v) = 2·面积
    assert v @ (system.gradient @ v) == pytest.approx(2.0)


def test_divergence_matrix(square_setup):
    _, setup = square_setup
    B = setup.system.divergence
    topo = setup.dofmap.topo
    np.testing.assert_allclose(B @ interpolate(topo, lambda x, y: (x, -y)), 0.0, atol=1e-12)
    assert np.sum(B @ interpolate(topo, lambda x, y: (x, 0.0 * y))) == pytest.approx(-1.0)


def test_flat_curvature_term_vanishes():
    mesh = generate_mesh('unit_square', 2, {'all': 1, 'bottom': 2})
    spec = ProblemSpec(variant='I', nu=1.0)
    system = prepare(spec, mesh).system
    assert abs(system.boundary['curvature_2']).sum() == 0.0


def test_disk_curvature_term():
    """单位圆 Γ₂ 上 v = u = τ：2ν∫k v·u ≈ 4πν"""
    mesh = generate_mesh('disk', 4, 2)
    spec = ProblemSpec(variant='I', nu=1.0)
    setup = prepare(spec, mesh)
    v = interpolate(setup.dofmap.topo, _rotation)
    value = v @ (setup.system.boundary['curvature_2'] @ v)
    assert value == pytest.approx(4.0 * np.pi, rel=0.03)
    assert value < 4.0 * np.pi


def test_friction_term():
    """α = I，单位长度直边 Γ₅ 上单位切向场：2(αv,u) = 2"""
    mesh = generate_mesh('unit_square', 2, {'all': 1, 'bottom': 5})
    spec = ProblemSpec(variant='I', nu=1.0, alpha=np.eye(2))
    setup = prepare(spec, mesh)
    v = interpolate(setup.dofmap.topo, constant_vector(1.0, 0.0))
    assert v @ (setup.system.boundary['friction_5'] @ v) == pytest.approx(2.0)


def test_problem_two_terms():
    mesh = generate_mesh('unit_square', 2, {'all': 1, 'bottom': 5})
    spec = ProblemSpec(variant='II', nu=1.0, alpha=np.eye(2))
    system = prepare(spec, mesh).system
    assert set(system.boundary) == {'curvature_2', 'shape_3', 'friction_5', 'shape_5'}
    assert abs(system.boundary['shape_5']).sum() == 0.0
    rest = system.principal - system.gradient - system.boundary['friction_5']
    assert abs(rest).max() < 1e-14


def test_convection_zero_field(square_setup):
    _, setup = square_setup
    c1, c2 = assemble_convection(np.zeros(setup.dofmap.n_velocity), setup.system)
    assert abs(c1).sum() == 0.0
    assert abs(c2).sum() == 0.0


def test_convection_constant_fields(square_setup):
    _, setup = square_setup
    w = interpolate(setup.dofmap.topo, constant_vector(1.0, 2.0))
    v = interpolate(setup.dofmap.topo, constant_vector(-1.0, 0.5))
    c1, c2 = assemble_convection(w, setup.system)
    np.testing.assert_allclose(c2 @ v, 0.0, atol=1e-13)
    np.testing.assert_allclose(c1 @ v, 0.0, atol=1e-13)


def test_zero_data(square_setup):
    spec, setup = square_setup
    assert not np.any(data_functional(setup.system, spec, 0.0))


def test_scalar_pairing_with_normal_trace():
    """φ₂ = 1：配对等于 ∫ u·n"""
    mesh = generate_mesh('unit_square', 2, {'all': 1, 'bottom': 2})
    spec = ProblemSpec(variant='I', nu=1.0, phi={2: lambda x, y, t: np.ones_like(x)})
    setup = prepare(spec, mesh)
    u = interpolate(setup.dofmap.topo, constant_vector(0.0, -1.0))
    assert data_functional(setup.system, spec, 0.0) @ u == pytest.approx(1.0)


def test_rhs_shift_weight():
    mesh = generate_mesh('unit_square', 2)
    spec = ProblemSpec(variant='I', nu=1.0, f=constant_vector(1.0, 1.0))
    system = prepare(spec, mesh).system
    plain = assemble_rhs(system, spec, 1.0)
    shifted = assemble_rhs(system, spec, 1.0, shift_k=1.0)
    np.testing.assert_allclose(shifted, np.exp(-1.0) * plain)
    assert plain.sum() == pytest.approx(2.0)


def test_spec_validation():
    with pytest.raises(ConfigValidationError):
        ProblemSpec(variant='I', nu=0.0)
    with pytest.raises(ConfigValidationError):
        ProblemSpec(variant='II', nu=1.0, phi={6: constant_vector(0.0, 0.0)})
    with pytest.raises(ConfigValidationError):
        ProblemSpec(variant='I', nu=1.0, h={2: constant_vector(0.0, 0.0)})
    with pytest.raises(ConfigValidationError):
        ProblemSpec(variant='III', nu=1.0)
    np.testing.assert_allclose(ProblemSpec(variant='I', nu=1.0, t_final=0.1, dt=0.05).time_grid,
                               [0.0, 0.05, 0.1])


def test_datum_on_absent_segment(square_mesh):
    spec = ProblemSpec(variant='I', nu=1.0, phi={7: lambda x, y, t: np.zeros_like(x)})
    with pytest.raises(AssemblyError):
        prepare(spec, square_mesh)


def test_convection_matches_quadrature(square_setup):
    """v = (x, -y)：⟨(v·∇)v, v⟩ = ∫(x² - y²) = 0；⟨(v·∇)b, c⟩ 与手算积分一致"""
    _, setup = square_setup
    topo = setup.dofmap.topo
    v = interpolate(topo, lambda x, y: (x, -y))
    assert abs(trilinear(setup.system, v, v, v)) < 1e-8
    # b = (x², y²)，(v·∇)b = (2x², -2y²)，c = (x, 0)：∫2x³ = 1/2
    b = interpolate(topo, lambda x, y: (x ** 2, y ** 2))
    c = interpolate(topo, lambda x, y: (x, 0.0 * y))
    assert trilinear(setup.system, v, b, c) == pytest.approx(0.5, abs=1e-10)
    _, c2 = assemble_convection(b, setup.system)
    # C₂(b) 的配对为 ⟨(c·∇)b, v⟩
    assert v @ (c2 @ c) == pytest.approx(trilinear(setup.system, c, b, v), abs=1e-12)


def test_body_force_pairing(square_setup):
    """f = (0, -1)，u = (x, y²)：配对为 -∫y² = -1/3"""
    _, setup = square_setup
    spec = ProblemSpec(variant='I', nu=1.0, f=constant_vector(0.0, -1.0))
    u = interpolate(setup.dofmap.topo, lambda x, y: (x, y ** 2))
    assert assemble_rhs(setup.system, spec, 0.0) @ u == pytest.approx(-1.0 / 3.0, abs=1e-10)


def test_viscosity_scaling():
    mesh = generate_mesh('disk', 2, 2)
    one = prepare(ProblemSpec(variant='I', nu=1.0), mesh).system
    two = prepare(ProblemSpec(variant='I', nu=2.0), mesh).system
    assert abs(two.strain - 2.0 * one.strain).max() < 1e-12
    assert abs(two.gradient - 2.0 * one.gradient).max() < 1e-12
    assert abs(two.boundary['curvature_2'] - 2.0 * one.boundary['curvature_2']).max() < 1e-12
    assert abs(two.mass - one.mass).max() == 0.0


def test_time_grid_end_time(caplog):
    with caplog.at_level(logging.WARNING, logger='src.mixed_ns.forms'):
        exact = ProblemSpec(variant='I', nu=1.0, t_final=0.1, dt=0.05)
    assert exact.end_time == pytest.approx(0.1)
    assert 'dt' not in caplog.text

    with caplog.at_level(logging.WARNING, logger='src.mixed_ns.forms'):
        spec = ProblemSpec(variant='I', nu=1.0, t_final=0.23, dt=0.1)
    assert spec.n_steps == 2
    assert spec.time_grid[-1] == pytest.approx(0.2)
    assert '0.23' in caplog.text
