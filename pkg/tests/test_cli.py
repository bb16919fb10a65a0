"""
测试命令行
"""
import os

import pandas as pd
import pytest
from click.testing import CliRunner

import config
from src.mixed_ns.cli import cli
from src.mixed_ns.geometry import load_mesh

from conftest import write_text


CHANNEL = """\
[mesh]
shape = channel
resolution = 2
labels = all:1, outlet:7

[problem]
variant = I
nu = 1.0

[data]
h1 = y*(1-y), 0

[time]
t_final = 0.1
dt = 0.05

[output]
directory = out
"""

CAVITY = """\
[mesh]
shape = unit_square
resolution = 2

[problem]
variant = I
nu = 1.0

[data]
h1 = 0, -4*x*(1-x)*(1-y)

[time]
t_final = 0.1
dt = 0.05

[output]
directory = out
"""

SLIP = """\
[mesh]
shape = unit_square
resolution = 2
labels = all:1, bottom:2

[problem]
variant = I
nu = 1.0

[data]
phi2 = 1

[study]
base_resolution = 4
levels = 3

[output]
directory = out
"""

PERTURB = """\
[mesh]
shape = unit_square
resolution = 2

[problem]
variant = I
nu = 1.0

[data]
f = 0.001*sin(pi*y), 0

[time]
t_final = 0.1
dt = 0.05

[perturbation]
base = 0.1*sin(pi*y)*exp(-t), 0

[output]
directory = out
snapshot_every = 0
"""


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


def test_generate_mesh(runner, tmp_path):
    output = tmp_path / 'meshes' / 'channel.txt'
    result = _invoke(runner, 'generate-mesh', 'channel', 2, output, '--labels', 'all:1,outlet:7')
    assert result.exit_code == 0, result.output
    mesh = load_mesh(str(output))
    assert set(mesh.labels_present) == {1, 7}


def test_generate_mesh_bad_labels(runner, tmp_path):
    result = _invoke(runner, 'generate-mesh', 'unit_square', 2, tmp_path / 'm.txt',
                     '--labels', 'all:9')
    assert result.exit_code == config.EXIT_CONFIG


def test_verify_identities(runner):
    result = _invoke(runner, 'verify-identities')
    assert result.exit_code == 0, result.output


def test_solve_channel(runner, tmp_path):
    path = write_text(tmp_path / 'channel.ini', CHANNEL)
    result = _invoke(runner, 'solve', path)
    assert result.exit_code == 0, result.output
    out = tmp_path / 'out'
    for name in ('mesh.txt', 'norms.csv', 'coercivity.txt', 'compat.txt', 'flux.csv',
                 'field_0000.txt', 'field_0002.txt'):
        assert (out / name).exists(), name
    norms = pd.read_csv(out / 'norms.csv')
    assert len(norms) == 3
    assert (norms['L2_velocity'] > 0).all()


def test_coercivity_command(runner, tmp_path):
    path = write_text(tmp_path / 'channel.ini', CHANNEL)
    result = _invoke(runner, 'coercivity', path)
    assert result.exit_code == 0, result.output
    with open(tmp_path / 'out' / 'coercivity.txt', encoding='utf-8') as fh:
        text = fh.read()
    assert 'shift_symbol = k0' in text
    assert 'viscous_shift = ' in text


def test_config_error_exit_code(runner, tmp_path):
    path = write_text(tmp_path / 'bad.ini', CHANNEL.replace('nu = 1.0', 'nu = -1'))
    result = _invoke(runner, 'solve', path)
    assert result.exit_code == config.EXIT_CONFIG


def test_missing_config_exit_code(runner, tmp_path):
    result = _invoke(runner, 'solve', tmp_path / 'missing.ini')
    assert result.exit_code == config.EXIT_CONFIG


def test_flux_imbalance_exit_code(runner, tmp_path):
    path = write_text(tmp_path / 'cavity.ini', CAVITY)
    result = _invoke(runner, 'solve', path)
    assert result.exit_code == config.EXIT_FLUX


def test_compat_strict(runner, tmp_path):
    path = write_text(tmp_path / 'slip.ini', SLIP)
    relaxed = _invoke(runner, 'compat', path)
    assert relaxed.exit_code == 0, relaxed.output
    with open(tmp_path / 'out' / 'compat.txt', encoding='utf-8') as fh:
        assert 'verdict = not_in_H' in fh.read()

    strict = _invoke(runner, 'compat', path, '--strict')
    assert strict.exit_code == config.EXIT_COMPAT


def test_perturb(runner, tmp_path):
    path = write_text(tmp_path / 'perturb.ini', PERTURB)
    result = _invoke(runner, 'perturb', path)
    assert result.exit_code == 0, result.output
    df = pd.read_csv(tmp_path / 'out' / 'perturbation.csv')
    assert list(df.columns) == ['t', 'zbar_L2', 'zbar_H1']
    assert df['zbar_L2'].iloc[-1] > 0
    assert not os.path.exists(tmp_path / 'out' / 'field_0000.txt')


def test_perturb_requires_base(runner, tmp_path):
    path = write_text(tmp_path / 'channel.ini', CHANNEL)
    result = _invoke(runner, 'perturb', path)
    assert result.exit_code == config.EXIT_CONFIG


def test_solve_zero_data(runner, tmp_path):
    text = CAVITY.replace('[data]\nh1 = 0, -4*x*(1-x)*(1-y)\n\n', '')
    path = write_text(tmp_path / 'zero.ini', text)
    result = _invoke(runner, 'solve', path)
    assert result.exit_code == 0, result.output
    norms = pd.read_csv(tmp_path / 'out' / 'norms.csv')
    assert (norms['L2_velocity'] == 0.0).all()
    assert (norms['H1_velocity'] == 0.0).all()
    flux = pd.read_csv(tmp_path / 'out' / 'flux.csv')
    assert (flux['signed_flux'] == 0.0).all()


def test_perturb_zero_perturbation(runner, tmp_path):
    path = write_text(tmp_path / 'perturb.ini', PERTURB.replace('f = 0.001*sin(pi*y), 0', 'f = 0, 0'))
    result = _invoke(runner, 'perturb', path)
    assert result.exit_code == 0, result.output
    df = pd.read_csv(tmp_path / 'out' / 'perturbation.csv')
    assert (df['zbar_L2'] <= 1e-12).all()
