"""
结果文件输出

场快照格式（纯文本）::

    field2d 1
    t <时间>
    velocity <速度节点数>
    x y vx vy           # 每个 P2 节点一行
    pressure <压力节点数>
    x y p               # 每个顶点一行
"""
import logging
import os
from typing import Dict, Iterable, List

import numpy as np
import pandas as pd

import config
from src.mixed_ns.errors import MeshParseError
from src.mixed_ns.geometry import save_mesh
from src.mixed_ns.spaces import DofMap, Field


logger = logging.getLogger(__name__)


def _fmt(value: float) -> str:
    return config.SNAPSHOT_FLOAT_FORMAT % value


def write_snapshot(path: str, fld: Field, dofmap: DofMap, t: float) -> str:
    """写出一个时刻的速度与压力"""
    dofmap.check_field(fld)
    coords = dofmap.topo.coords
    velocity = fld.nodal_velocity()
    out = ['field2d 1', f't {_fmt(t)}', f'velocity {len(coords)}']
    out += [' '.join(_fmt(v) for v in (x, y, vx, vy))
            for (x, y), (vx, vy) in zip(coords, velocity)]
    out.append(f'pressure {dofmap.n_pressure}')
    out += [' '.join(_fmt(v) for v in (x, y, p))
            for (x, y), p in zip(coords[:dofmap.n_pressure], fld.pressure)]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write('\n'.join(out) + '\n')
    return path


def read_snapshot(path: str) -> Dict[str, np.ndarray]:
    """读取快照：返回 t、velocity (N,4)、pressure (P,3)"""
    with open(path, 'r', encoding='utf-8') as fh:
        lines = [line.split() for line in fh.read().splitlines() if line.strip()]
    if not lines or lines[0] != ['field2d', '1']:
        raise MeshParseError("缺少文件头 `field2d 1`", 1)
    try:
        t = float(lines[1][1])
        nv = int(lines[2][1])
        velocity = np.array(lines[3:3 + nv], dtype=float).reshape(nv, 4)
        np_ = int(lines[3 + nv][1])
        pressure = np.array(lines[4 + nv:4 + nv + np_], dtype=float).reshape(np_, 3)
    except (IndexError, ValueError) as e:
        raise MeshParseError(f"快照格式错误: {e}")
    return {'t': t, 'velocity': velocity, 'pressure': pressure}


def write_lines(path: str, lines: Iterable[str]) -> str:
    """键值报告"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write('\n'.join(lines) + '\n')
    return path


def write_table(df: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    df.to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator='\n')
    return path


def write_run(result, output_dir: str, snapshot_every: int = 1) -> List[str]:
    """
    写出一次时间推进的全部结果

    mesh.txt（网格回显）、norms.csv、field_XXXX.txt
    """
    os.makedirs(output_dir, exist_ok=True)
    dofmap = result.setup.dofmap
    written = [save_mesh(result.setup.mesh, os.path.join(output_dir, 'mesh.txt')),
               result.norms.write_csv(os.path.join(output_dir, 'norms.csv'))]
    if snapshot_every > 0:
        last = len(result.times) - 1
        for i, t in enumerate(result.times):
            if i % snapshot_every == 0 or i == last:
                path = os.path.join(output_dir, f'field_{i:04d}.txt')
                written.append(write_snapshot(path, result.field(i), dofmap, float(t)))
    logger.info("结果已写入 %s（%d 个文件）", output_dir, len(written))
    return written
