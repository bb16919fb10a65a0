"""
测试公共设置：项目根目录加入 sys.path，提供小网格与问题描述
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

import config
from src.mixed_ns.evolution import prepare
from src.mixed_ns.forms import ProblemSpec
from src.mixed_ns.meshgen import generate_mesh
from src.mixed_ns.studies import CHANNEL_PLAN


@pytest.fixture(autouse=True)
def _log_dir(tmp_path, monkeypatch):
    """日志写到临时目录"""
    monkeypatch.setattr(config, 'LOG_DIR', str(tmp_path / 'logs'))


@pytest.fixture
def square_mesh():
    """2×2 单位正方形，全部 Γ₁"""
    return generate_mesh('unit_square', 2, 1)


@pytest.fixture
def channel_mesh():
    """通道：入口与壁面 Γ₁，出口 Γ₇"""
    return generate_mesh('channel', 2, CHANNEL_PLAN)


@pytest.fixture
def square_setup(square_mesh):
    spec = ProblemSpec(variant='I', nu=1.0, t_final=0.1, dt=0.05)
    return spec, prepare(spec, square_mesh)


def constant_vector(u, v):
    """常向量场 (x, y, t) → (u, v)"""
    def func(x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, u), np.full_like(x, v)
    return func


def write_text(path, text):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    return str(path)
