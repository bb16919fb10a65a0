"""
测试运行配置的读取与校验
"""
import numpy as np
import pytest

from src.mixed_ns.errors import ConfigParseError, ConfigValidationError
from src.mixed_ns.run_config import parse_config, parse_segment_plan

from conftest import write_text


CHANNEL = """\
[mesh]
shape = channel
resolution = 2
labels = all:1, outlet:7

[problem]
variant = I
nu = 0.5
alpha = 2

[data]
f = 0, -1
h1 = y*(1-y), 0
phi7 = 0

[time]
t_final = 0.2
dt = 0.05

[solver]
scheme = crank_nicolson
picard_tol = 1e-9

[output]
directory = out
snapshot_every = 2
"""


def test_valid_config(tmp_path):
    path = write_text(tmp_path / 'channel.ini', CHANNEL)
    run = parse_config(str(path))
    assert run.variant == 'I'
    assert run.nu == 0.5
    assert run.is_generated
    assert run.segment_plan == {'all': 1, 'outlet': 7}
    np.testing.assert_allclose(run.alpha, 2.0 * np.eye(2))
    assert run.solve.theta == 0.5
    assert run.solve.picard_tol == 1e-9
    assert run.snapshot_every == 2
    assert run.output_dir == str(tmp_path / 'out')

    spec = run.to_spec()
    assert set(spec.h) == {1}
    assert set(spec.phi) == {7}
    np.testing.assert_allclose(spec.time_grid, [0.0, 0.05, 0.1, 0.15, 0.2])
    mesh = run.build_mesh()
    assert set(mesh.labels_present) == {1, 7}


def test_to_spec_with_dt(tmp_path):
    run = parse_config(str(write_text(tmp_path / 'c.ini', CHANNEL)))
    assert run.to_spec(dt=0.1).dt == 0.1
    family = run.mesh_family(2)
    assert len(family) == 2
    assert family[0].h > family[1].h


@pytest.mark.parametrize('text, field', [
    (CHANNEL + '\n[extra]\nkey = 1\n', 'extra'),
    (CHANNEL.replace('nu = 0.5', 'nu = 0.5\nrho = 1'), 'problem.rho'),
    (CHANNEL.replace('nu = 0.5', 'nu = -1'), 'problem.nu'),
    (CHANNEL.replace('variant = I', 'variant = III'), 'problem.variant'),
    (CHANNEL.replace('scheme = crank_nicolson', 'scheme = rk4'), 'solver.scheme'),
    (CHANNEL.replace('alpha = 2', 'alpha = 1 2 3'), 'problem.alpha'),
    (CHANNEL.replace('labels = all:1, outlet:7', 'labels = all:1, outlet:9'), 'mesh.labels'),
    (CHANNEL.replace('h1 = y*(1-y), 0', 'h1 = y*(1-y)'), 'data.h1'),
])
def test_validation_errors(tmp_path, text, field):
    path = write_text(tmp_path / 'bad.ini', text)
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(str(path))
    assert exc.value.field == field


def test_syntax_error_line_number(tmp_path):
    path = write_text(tmp_path / 'bad.ini', '[mesh]\nshape = channel\noops\n')
    with pytest.raises(ConfigParseError) as exc:
        parse_config(str(path))
    assert exc.value.lineno == 3


def test_missing_section_header(tmp_path):
    path = write_text(tmp_path / 'bad.ini', 'shape = channel\n')
    with pytest.raises(ConfigParseError) as exc:
        parse_config(str(path))
    assert exc.value.lineno == 1


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParseError):
        parse_config(str(tmp_path / 'missing.ini'))


def test_problem_two_rejects_free_boundary(tmp_path):
    text = CHANNEL.replace('variant = I', 'variant = II') \
                  .replace('labels = all:1, outlet:7', 'labels = all:1, outlet:6') \
                  .replace('phi7 = 0\n', '')
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(str(write_text(tmp_path / 'bad.ini', text)))
    assert exc.value.field == 'mesh.labels'


def test_datum_on_absent_segment(tmp_path):
    text = CHANNEL.replace('phi7 = 0', 'phi3 = 0, 0')
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(str(write_text(tmp_path / 'bad.ini', text)))
    assert exc.value.field == 'data.phi3'


def test_scalar_datum_component_count(tmp_path):
    """问题 I 的 φ₂ 是标量"""
    text = CHANNEL.replace('outlet:7', 'outlet:2').replace('phi7 = 0', 'phi2 = 0, 0')
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(str(write_text(tmp_path / 'bad.ini', text)))
    assert exc.value.field == 'data.phi2'


def test_segment_plan():
    assert parse_segment_plan('3', 'unit_square') == 3
    assert parse_segment_plan('all:1, bottom:2', 'unit_square') == {'all': 1, 'bottom': 2}
    with pytest.raises(ConfigValidationError):
        parse_segment_plan('bottom', 'unit_square')
    with pytest.raises(ConfigValidationError):
        parse_segment_plan('all:x', 'unit_square')
    with pytest.raises(ConfigValidationError):
        parse_segment_plan('', 'unit_square')
