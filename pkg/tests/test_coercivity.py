"""
测试 Korn 常数与平移常数
"""
import numpy as np
import pytest

import config
from src.mixed_ns.coercivity import compute_shift, estimate_korn, is_flat
from src.mixed_ns.errors import CoercivityError
from src.mixed_ns.evolution import prepare
from src.mixed_ns.fem import interpolate
from src.mixed_ns.forms import ProblemSpec
from src.mixed_ns.meshgen import generate_mesh


def _setup(shape, resolution, plan, variant='I', **kwargs):
    spec = ProblemSpec(variant=variant, nu=1.0, **kwargs)
    return prepare(spec, generate_mesh(shape, resolution, plan))


def test_korn_positive_on_dirichlet_square(square_setup):
    _, setup = square_setup
    beta = estimate_korn(setup.dofmap, setup.system)
    assert beta > 0


def test_korn_dense_matches_iterative(square_setup, monkeypatch):
    _, setup = square_setup
    dense = estimate_korn(setup.dofmap, setup.system)
    monkeypatch.setattr(config, 'DENSE_EIG_LIMIT', 0)
    iterative = estimate_korn(setup.dofmap, setup.system)
    assert iterative == pytest.approx(dense, rel=1e-6)


def test_unconstrained_square_has_rigid_mode():
    setup = _setup('unit_square', 2, 6)
    with pytest.raises(CoercivityError):
        estimate_korn(setup.dofmap, setup.system)


def test_flat_shortcut_dirichlet(square_setup):
    _, setup = square_setup
    report = compute_shift(setup.system, setup.dofmap, setup.frames)
    assert report.flat_shortcut
    assert report.shift_k == 0.0
    assert report.eig_metadata['post_shift_min'] >= report.korn_beta / 2 - 1e-8
    assert 'shift_symbol = k0' in report.to_lines()


def test_flat_navier_slip_segment():
    """平直 Γ₂ 且 α = 0：k = 0"""
    setup = _setup('unit_square', 2, {'all': 1, 'bottom': 2})
    assert is_flat(setup.system)
    report = compute_shift(setup.system, setup.dofmap)
    assert report.flat_shortcut
    assert report.shift_k == 0.0


@pytest.mark.parametrize('variant', ['I', 'II'])
def test_disk_curvature_term_is_nonnegative(variant):
    setup = _setup('disk', 2, 2, variant=variant)
    assert not is_flat(setup.system)
    report = compute_shift(setup.system, setup.dofmap, setup.frames)
    assert not report.flat_shortcut
    assert report.eig_metadata['lambda_min'] >= 0.0
    assert report.shift_k == pytest.approx(config.SHIFT_SAFETY)
    assert report.eig_metadata['post_shift_min'] >= report.margin_delta - 1e-8


def test_friction_disables_shortcut():
    setup = _setup('unit_square', 2, {'all': 1, 'bottom': 5}, alpha=np.eye(2))
    assert not is_flat(setup.system)
    report = compute_shift(setup.system, setup.dofmap)
    assert report.shift_k >= 0.0
    assert report.eig_metadata['post_shift_min'] >= report.margin_delta - 1e-8


def test_perturbation_shift(square_setup):
    _, setup = square_setup
    base = interpolate(setup.dofmap.topo, lambda x, y: (-y, x))
    report = compute_shift(setup.system, setup.dofmap, base_field=base)
    assert report.perturbation
    assert report.shift_symbol == 'k2'
    assert not report.flat_shortcut
    assert report.eig_metadata['post_shift_min'] >= report.margin_delta - 1e-8


def test_variant_mismatch(square_setup):
    _, setup = square_setup
    with pytest.raises(CoercivityError):
        compute_shift(setup.system, setup.dofmap, variant='II')


def test_korn_constant_is_mesh_independent():
    betas = [estimate_korn(s.dofmap, s.system)
             for s in (_setup('unit_square', n, 1) for n in (2, 4, 8))]
    assert min(betas) > 0
    assert max(betas) / min(betas) < 1.2


def _annulus_setup(variant, inner, nu, resolution=3):
    spec = ProblemSpec(variant=variant, nu=nu)
    return prepare(spec, generate_mesh('annulus', resolution, {'outer': 1, 'inner': inner}))


@pytest.mark.parametrize('variant, inner', [('I', 3), ('II', 2)])
def test_shift_monotone_in_nu(variant, inner):
    """内圆凹边界，α = 0：k - 安全余量与 ν 成正比，k/ν 随 ν 增大不增"""
    nus = [0.5, 1.0, 2.0, 4.0]
    reports = []
    for nu in nus:
        setup = _annulus_setup(variant, inner, nu)
        reports.append(compute_shift(setup.system, setup.dofmap, setup.frames))
    assert not any(r.flat_shortcut for r in reports)

    core = np.array([(r.shift_k - config.SHIFT_SAFETY) / nu for r, nu in zip(reports, nus)])
    assert core[0] > 0.1
    np.testing.assert_allclose(core, core[0], rtol=1e-8)

    viscous = np.array([r.viscous_shift for r in reports])
    assert np.all(np.diff(viscous) <= 1e-12)
    assert 'viscous_shift = ' + f'{reports[1].viscous_shift:.12e}' in reports[1].to_lines()


@pytest.mark.parametrize('shape, plan', [('disk', 2), ('annulus', {'outer': 1, 'inner': 3})])
def test_shift_is_deterministic(shape, plan):
    setup = _setup(shape, 2, plan)
    first = compute_shift(setup.system, setup.dofmap, setup.frames)
    second = compute_shift(setup.system, setup.dofmap, setup.frames)
    assert abs(first.shift_k - second.shift_k) <= 1e-8


@pytest.mark.parametrize('shape, plan', [('disk', 2), ('annulus', {'outer': 1, 'inner': 3})])
def test_random_vectors_coercive(shape, plan):
    setup = _setup(shape, 2, plan)
    system, dofmap = setup.system, setup.dofmap
    report = compute_shift(system, dofmap, setup.frames)
    shifted = system.principal + report.shift_k * system.mass
    rng = np.random.default_rng(0)
    for _ in range(100):
        u = dofmap.expand(rng.standard_normal(dofmap.n_free))
        lhs = u @ (shifted @ u)
        assert lhs >= (report.margin_delta - 1e-8) * (u @ (system.gram @ u))


def test_unreachable_margin_raises(square_setup):
    _, setup = square_setup
    beta = estimate_korn(setup.dofmap, setup.system)
    with pytest.raises(CoercivityError):
        compute_shift(setup.system, setup.dofmap, delta=2.0 * beta)
