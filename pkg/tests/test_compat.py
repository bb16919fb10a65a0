"""
测试初始相容性判定
"""
import numpy as np
import pytest

from src.mixed_ns.compat import (classify, compat_verdict, functional_id, growth_exponent,
                                 riesz_l2_norm)
from src.mixed_ns.expressions import compile_expression
from src.mixed_ns.fem import interpolate
from src.mixed_ns.forms import ProblemSpec
from src.mixed_ns.meshgen import generate_mesh
from src.mixed_ns.studies import CHANNEL_PLAN


def _family(shape, plan, levels=(2, 4, 8)):
    return [generate_mesh(shape, n, plan) for n in levels]


def test_functional_ids():
    assert functional_id('I', False) == 'w0bar'
    assert functional_id('II', False) == 'w1bar'
    assert functional_id('I', True) == 'w2bar'
    assert functional_id('II', True) == 'w3'


def test_zero_data_is_compatible():
    spec = ProblemSpec(variant='I', nu=1.0)
    report = compat_verdict(spec, _family('unit_square', 1))
    assert report.verdict == 'in_H'
    assert report.norms == [0.0, 0.0, 0.0]
    assert report.growth_exponent == 0.0
    assert report.functional == 'w0bar'


def test_body_force_is_compatible():
    f = compile_expression('sin(pi*y), 0', 'data.f', 2)
    spec = ProblemSpec(variant='I', nu=1.0, f=f)
    report = compat_verdict(spec, _family('unit_square', 1))
    assert report.verdict == 'in_H'
    assert all(norm > 0.0 for norm in report.norms)
    assert report.h[0] > report.h[1] > report.h[2]
    assert report.growth_exponent <= 0.1


def test_boundary_datum_grows_under_refinement():
    """Γ₂ 上 φ₂ = 1 只在 H⁻¹ 中：范数按 h^{-1/2} 增长"""
    spec = ProblemSpec(variant='I', nu=1.0, phi={2: compile_expression('1', 'data.phi2', 1)})
    report = compat_verdict(spec, _family('unit_square', {'all': 1, 'bottom': 2}, (4, 8, 16)))
    assert report.verdict == 'not_in_H'
    assert report.norms[0] < report.norms[1] < report.norms[2]
    assert report.growth_exponent == pytest.approx(0.5, abs=0.1)
    assert 'verdict = not_in_H' in report.to_lines()


def test_cross_check_on_channel():
    h1 = compile_expression('y*(1-y), 0', 'data.h1', 2)
    spec = ProblemSpec(variant='I', nu=1.0, t_final=0.1, dt=0.05, h={1: h1})
    report = compat_verdict(spec, [generate_mesh('channel', 2, CHANNEL_PLAN)],
                            with_cross_check=True)
    assert report.norms == [0.0]
    assert report.cross_check is not None
    assert report.cross_check < 1e-10


def test_perturbation_functional():
    spec = ProblemSpec(variant='I', nu=1.0, t_final=0.1, dt=0.05)
    report = compat_verdict(spec, _family('unit_square', 1),
                            base=lambda x, y, t: (0.1 * np.sin(np.pi * y), 0.0 * x))
    assert report.functional == 'w2bar'
    assert report.verdict == 'in_H'


def test_riesz_norm(square_setup):
    _, setup = square_setup
    dofmap, mass = setup.dofmap, setup.system.mass
    assert riesz_l2_norm(np.zeros(dofmap.n_free), dofmap, mass) == 0.0
    with pytest.raises(ValueError):
        riesz_l2_norm(np.zeros(dofmap.n_free + 1), dofmap, mass)
    b = dofmap.reduce(mass @ np.ones(dofmap.n_velocity))
    assert riesz_l2_norm(b, dofmap, mass) > 0.0

    e = dofmap.reduce(interpolate(dofmap.topo, lambda x, y: (x * (1 - x) * y, x * y * (1 - y))))
    v = dofmap.expand(e)
    b = dofmap.reduce(mass @ v)
    assert riesz_l2_norm(b, dofmap, mass) == pytest.approx(setup.system.l2_norm(v), rel=1e-10)


def test_growth_exponent_and_classify():
    h = np.array([0.5, 0.25, 0.125, 0.0625])
    norms = 3.0 * h ** -0.5
    assert growth_exponent(h, norms) == pytest.approx(0.5)
    assert classify(h, norms) == 'not_in_H'
    assert classify(h, np.full(4, 2.0)) == 'in_H'
    assert classify(h[:2], norms[:2]) == 'inconclusive'
    assert classify(h, h ** -0.25) == 'inconclusive'
    assert classify(h[:2], [0.0, 0.0]) == 'in_H'
