"""
测试结果文件
"""
import os

import numpy as np
import pandas as pd
import pytest

from src.mixed_ns.errors import MeshParseError
from src.mixed_ns.evolution import run
from src.mixed_ns.expressions import compile_expression
from src.mixed_ns.fem import interpolate
from src.mixed_ns.forms import ProblemSpec
from src.mixed_ns.geometry import load_mesh
from src.mixed_ns.outputs import read_snapshot, write_lines, write_run, write_snapshot, write_table
from src.mixed_ns.spaces import Field

from conftest import write_text


def test_snapshot_round_trip(tmp_path, square_setup):
    _, setup = square_setup
    dofmap = setup.dofmap
    velocity = interpolate(dofmap.topo, lambda x, y: (x, -y))
    pressure = np.linspace(0.0, 1.0, dofmap.n_pressure)
    path = write_snapshot(str(tmp_path / 'field.txt'), Field(velocity, pressure, dofmap.id),
                          dofmap, 0.25)
    data = read_snapshot(path)
    assert data['t'] == 0.25
    coords = dofmap.topo.coords
    np.testing.assert_allclose(data['velocity'][:, :2], coords)
    np.testing.assert_allclose(data['velocity'][:, 2], coords[:, 0])
    np.testing.assert_allclose(data['velocity'][:, 3], -coords[:, 1])
    np.testing.assert_allclose(data['pressure'][:, 2], pressure)


def test_snapshot_bad_header(tmp_path):
    path = write_text(tmp_path / 'bad.txt', 'field3d 1\nt 0\n')
    with pytest.raises(MeshParseError):
        read_snapshot(path)


def test_snapshot_truncated(tmp_path):
    path = write_text(tmp_path / 'bad.txt', 'field2d 1\nt 0\nvelocity 3\n0 0 0 0\n')
    with pytest.raises(MeshParseError):
        read_snapshot(path)


def test_write_lines_and_table(tmp_path):
    path = write_lines(str(tmp_path / 'sub' / 'report.txt'), ['a = 1', 'b = 2'])
    with open(path, encoding='utf-8') as fh:
        assert fh.read() == 'a = 1\nb = 2\n'
    table = write_table(pd.DataFrame({'h': [0.5], 'err': [1.0 / 3.0]}), str(tmp_path / 't.csv'))
    with open(table, encoding='utf-8') as fh:
        assert fh.read() == 'h,err\n5.000000000000e-01,3.333333333333e-01\n'


def _forced_run(square_mesh):
    f = compile_expression('sin(pi*y), 0', 'data.f', 2)
    spec = ProblemSpec(variant='I', nu=1.0, t_final=0.1, dt=0.05, f=f)
    return run(spec, square_mesh)


def test_write_run(tmp_path, square_mesh):
    result = _forced_run(square_mesh)
    written = write_run(result, str(tmp_path / 'out'), snapshot_every=2)
    names = sorted(os.path.basename(p) for p in written)
    assert names == ['field_0000.txt', 'field_0002.txt', 'mesh.txt', 'norms.csv']

    echoed = load_mesh(str(tmp_path / 'out' / 'mesh.txt'))
    np.testing.assert_allclose(echoed.nodes, square_mesh.nodes)
    norms = pd.read_csv(tmp_path / 'out' / 'norms.csv')
    assert list(norms.columns) == ['t', 'L2_velocity', 'H1_velocity', 'picard_iters', 'residual']
    assert len(norms) == 3

    no_snapshots = write_run(result, str(tmp_path / 'bare'), snapshot_every=0)
    assert len(no_snapshots) == 2


def test_norms_csv_is_reproducible(tmp_path, square_mesh):
    first = write_run(_forced_run(square_mesh), str(tmp_path / 'a'), snapshot_every=0)[1]
    second = write_run(_forced_run(square_mesh), str(tmp_path / 'b'), snapshot_every=0)[1]
    with open(first, 'rb') as a, open(second, 'rb') as b:
        assert a.read() == b.read()
