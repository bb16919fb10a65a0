"""
运行配置（INI 文件）

示例::

    [mesh]
    shape = channel
    resolution = 4
    labels = all:1, outlet:7

    [problem]
    variant = I
    nu = 1.0

    [data]
    f = 0, 0
    h1 = 4*y*(1-y), 0

    [time]
    t_final = 0.1
    dt = 0.01

完整语法见 Docs/运行配置说明.md。
"""
import configparser
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

import config
from src.mixed_ns.errors import ConfigParseError, ConfigValidationError, GeometryError
from src.mixed_ns.evolution import PICARD_STARTS, SCHEMES, SolveConfig
from src.mixed_ns.expressions import DataExpression, compile_expression
from src.mixed_ns.forms import SCALAR_DATA_LABELS, VECTOR_DATA_LABELS, ProblemSpec
from src.mixed_ns.geometry import Mesh, load_mesh
from src.mixed_ns.meshgen import SHAPE_SIDES, generate_mesh, resolve_segment_plan
from src.mixed_ns.spaces import PROBLEM_II, VARIANTS


logger = logging.getLogger(__name__)

# 节 → 允许的键
SCHEMA = {
    'mesh': {'file', 'shape', 'resolution', 'labels'},
    'problem': {'variant', 'nu', 'alpha'},
    'data': {'f', 'v0', 'phi2', 'phi3', 'phi4', 'phi5', 'phi6', 'phi7', 'h1', 'h4', 'h5'},
    'time': {'t_final', 'dt'},
    'solver': {'picard_tol', 'max_picard_iters', 'scheme', 'linear_tol', 'picard_start', 'shift_k'},
    'output': {'directory', 'snapshot_every'},
    'perturbation': {'base'},
    'study': {'levels', 'base_resolution', 'time_refinement'},
}
REQUIRED_SECTIONS = ('mesh', 'problem')
TIME_REFINEMENTS = ('h2', 'h', 'fixed')


@dataclass
class RunConfig:
    """一次运行的全部设置"""
    path: str
    variant: str
    nu: float
    mesh_file: Optional[str] = None
    shape: Optional[str] = None
    resolution: int = 4
    segment_plan: Union[int, Dict[str, int]] = 1
    alpha: Optional[np.ndarray] = None
    data: Dict[str, DataExpression] = field(default_factory=dict)
    t_final: float = 1.0
    dt: float = 0.1
    solve: SolveConfig = field(default_factory=SolveConfig)
    shift_k: Optional[float] = None
    output_dir: str = config.RESULTS_DIR
    snapshot_every: int = 1
    base: Optional[DataExpression] = None
    study_levels: int = 3
    study_resolution: int = 2
    time_refinement: str = 'h2'

    @property
    def is_generated(self) -> bool:
        return self.mesh_file is None

    def to_spec(self, dt: float = None) -> ProblemSpec:
        """构造 ProblemSpec"""
        phi = {int(k[3:]): v for k, v in self.data.items() if k.startswith('phi')}
        h = {int(k[1:]): v for k, v in self.data.items() if k.startswith('h')}
        return ProblemSpec(variant=self.variant, nu=self.nu, t_final=self.t_final,
                           dt=self.dt if dt is None else dt, alpha=self.alpha,
                           f=self.data.get('f'), v0=self.data.get('v0'), phi=phi, h=h)

    def build_mesh(self, resolution: int = None) -> Mesh:
        """读取或生成网格，并检查数据引用的边界段"""
        if self.is_generated:
            mesh = generate_mesh(self.shape, resolution or self.resolution, self.segment_plan)
        else:
            mesh = load_mesh(self.mesh_file)
        self.check_labels(mesh.labels_present)
        return mesh

    def mesh_family(self, levels: int = None) -> List[Mesh]:
        """逐次加倍分辨率的网格序列（只适用于生成网格）"""
        levels = levels or self.study_levels
        if not self.is_generated:
            raise ConfigValidationError('mesh.file', "网格加密研究需要生成网格（[mesh] shape）")
        return [self.build_mesh(self.study_resolution * 2 ** i) for i in range(levels)]

    def check_labels(self, labels):
        present = set(int(label) for label in labels)
        if self.variant == PROBLEM_II and 6 in present:
            raise ConfigValidationError('mesh.labels', "问题 II 要求 Γ₆ 为空")
        for key in self.data:
            if key.startswith('phi') or key.startswith('h'):
                label = int(key[3:] if key.startswith('phi') else key[1:])
                if label not in present:
                    raise ConfigValidationError(f'data.{key}', f"网格中没有 Γ{label}")


def _read(path: str) -> configparser.RawConfigParser:
    if not os.path.exists(path):
        raise ConfigParseError(f"配置文件不存在: {path}")
    parser = configparser.RawConfigParser()
    # 键名保持大小写
    parser.optionxform = str
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f, source=path)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigParseError("缺少节标题（如 [mesh]）", e.lineno)
    except configparser.ParsingError as e:
        errors = getattr(e, 'errors', None)
        if not errors:
            raise ConfigParseError(str(e).splitlines()[0])
        lineno, line = errors[0]
        raise ConfigParseError(f"无法解析的行: {line.strip()}", lineno)
    except configparser.Error as e:
        raise ConfigParseError(str(e).splitlines()[0], getattr(e, 'lineno', None))
    return parser


def _float(parser, section, key, default=None) -> Optional[float]:
    if not parser.has_option(section, key):
        return default
    text = parser.get(section, key).strip()
    try:
        return float(text)
    except ValueError:
        raise ConfigValidationError(f'{section}.{key}', f"需要数值，得到 {text!r}")


def _int(parser, section, key, default=None) -> Optional[int]:
    if not parser.has_option(section, key):
        return default
    text = parser.get(section, key).strip()
    try:
        return int(text)
    except ValueError:
        raise ConfigValidationError(f'{section}.{key}', f"需要整数，得到 {text!r}")


def parse_segment_plan(text: str, shape: str) -> Union[int, Dict[str, int]]:
    """'1' 或 'all:1, outlet:7'"""
    text = text.strip()
    if not text:
        raise ConfigValidationError('mesh.labels', "标签规则为空")
    if ':' not in text:
        try:
            return int(text)
        except ValueError:
            raise ConfigValidationError('mesh.labels', f"需要整数或 边名:标签 列表，得到 {text!r}")
    plan = {}
    for item in text.split(','):
        if ':' not in item:
            raise ConfigValidationError('mesh.labels', f"缺少冒号: {item.strip()!r}")
        side, label = (part.strip() for part in item.split(':', 1))
        try:
            plan[side] = int(label)
        except ValueError:
            raise ConfigValidationError('mesh.labels', f"标签必须为整数: {item.strip()!r}")
        if not 1 <= plan[side] <= 7:
            raise ConfigValidationError('mesh.labels', f"标签必须在 1..7 之间: {item.strip()!r}")
    try:
        resolve_segment_plan(shape, plan)
    except GeometryError as e:
        raise ConfigValidationError('mesh.labels', str(e))
    return plan


def _plan_labels(shape: str, plan) -> set:
    return set(resolve_segment_plan(shape, plan).values())


def _data_components(key: str, variant: str) -> int:
    if key in ('f', 'v0', 'h1'):
        return 2
    if key in ('h4', 'h5'):
        return 1
    label = int(key[3:])
    if label in SCALAR_DATA_LABELS[variant]:
        return 1
    if label in VECTOR_DATA_LABELS[variant]:
        return 2
    raise ConfigValidationError(f'data.{key}', f"问题 {variant} 没有 φ{label}")


def parse_config(path: str) -> RunConfig:
    """
    读取并校验运行配置

    Raises:
        ConfigParseError: 语法错误（带行号）
        ConfigValidationError: 未知节/键、取值非法、表达式无法解析
    """
    parser = _read(path)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigValidationError(section, f"未知节，可用: {', '.join(SCHEMA)}")
        for key in parser.options(section):
            if key not in SCHEMA[section]:
                raise ConfigValidationError(f'{section}.{key}', "未知键")
    for section in REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigValidationError(section, "缺少必需的节")

    variant = parser.get('problem', 'variant', fallback='').strip()
    if variant not in VARIANTS:
        raise ConfigValidationError('problem.variant', f"必须为 I 或 II，得到 {variant!r}")
    nu = _float(parser, 'problem', 'nu')
    if nu is None or not nu > 0:
        raise ConfigValidationError('problem.nu', f"粘性系数必须为正，得到 {nu}")
    alpha = None
    if parser.has_option('problem', 'alpha'):
        text = parser.get('problem', 'alpha').replace(',', ' ').split()
        try:
            values = [float(v) for v in text]
        except ValueError:
            raise ConfigValidationError('problem.alpha', "需要 1 个或 4 个数值")
        if len(values) == 1:
            alpha = values[0] * np.eye(2)
        elif len(values) == 4:
            alpha = np.array(values).reshape(2, 2)
        else:
            raise ConfigValidationError('problem.alpha', f"需要 1 个或 4 个数值，得到 {len(values)}")

    mesh_file = parser.get('mesh', 'file', fallback=None)
    shape = parser.get('mesh', 'shape', fallback=None)
    if (mesh_file is None) == (shape is None):
        raise ConfigValidationError('mesh', "file 与 shape 必须且只能给出一个")
    resolution = _int(parser, 'mesh', 'resolution', 4)
    segment_plan: Union[int, Dict[str, int]] = 1
    if shape is not None:
        shape = shape.strip()
        if shape not in SHAPE_SIDES:
            raise ConfigValidationError('mesh.shape', f"未知形状 {shape}，可选: {', '.join(SHAPE_SIDES)}")
        if resolution < 1:
            raise ConfigValidationError('mesh.resolution', f"分辨率必须 ≥ 1，得到 {resolution}")
        segment_plan = parse_segment_plan(parser.get('mesh', 'labels', fallback='1'), shape)
    else:
        if parser.has_option('mesh', 'labels'):
            raise ConfigValidationError('mesh.labels', "网格文件自带标签，不能再指定 labels")
        mesh_file = mesh_file.strip()
        if not os.path.isabs(mesh_file):
            mesh_file = os.path.join(os.path.dirname(os.path.abspath(path)), mesh_file)

    data = {}
    if parser.has_section('data'):
        for key in parser.options('data'):
            components = _data_components(key, variant)
            data[key] = compile_expression(parser.get('data', key), f'data.{key}', components)

    t_final = _float(parser, 'time', 't_final', 1.0) if parser.has_section('time') else 1.0
    dt = _float(parser, 'time', 'dt', 0.1) if parser.has_section('time') else 0.1
    if not t_final > 0:
        raise ConfigValidationError('time.t_final', f"必须为正，得到 {t_final}")
    if not dt > 0:
        raise ConfigValidationError('time.dt', f"必须为正，得到 {dt}")

    solve_kwargs = {}
    shift_k = None
    if parser.has_section('solver'):
        for key in ('picard_tol', 'linear_tol'):
            value = _float(parser, 'solver', key)
            if value is not None:
                solve_kwargs[key] = value
        value = _int(parser, 'solver', 'max_picard_iters')
        if value is not None:
            solve_kwargs['max_picard_iters'] = value
        for key, allowed in (('scheme', SCHEMES), ('picard_start', PICARD_STARTS)):
            if parser.has_option('solver', key):
                text = parser.get('solver', key).strip()
                if text not in allowed:
                    raise ConfigValidationError(f'solver.{key}', f"可选: {', '.join(allowed)}")
                solve_kwargs[key] = text
        shift_k = _float(parser, 'solver', 'shift_k')
        if shift_k is not None and shift_k < 0:
            raise ConfigValidationError('solver.shift_k', f"平移常数不能为负，得到 {shift_k}")
    solve = SolveConfig(**solve_kwargs)

    output_dir = config.RESULTS_DIR
    snapshot_every = 1
    if parser.has_section('output'):
        output_dir = parser.get('output', 'directory', fallback=output_dir).strip()
        if not os.path.isabs(output_dir):
            output_dir = os.path.join(os.path.dirname(os.path.abspath(path)), output_dir)
        snapshot_every = _int(parser, 'output', 'snapshot_every', 1)
        if snapshot_every < 0:
            raise ConfigValidationError('output.snapshot_every', "不能为负（0 表示不写快照）")

    base = None
    if parser.has_section('perturbation'):
        if not parser.has_option('perturbation', 'base'):
            raise ConfigValidationError('perturbation.base', "缺少基础解表达式")
        base = compile_expression(parser.get('perturbation', 'base'), 'perturbation.base', 2)

    levels, study_resolution, time_refinement = 3, 2, 'h2'
    if parser.has_section('study'):
        levels = _int(parser, 'study', 'levels', 3)
        study_resolution = _int(parser, 'study', 'base_resolution', 2)
        time_refinement = parser.get('study', 'time_refinement', fallback='h2').strip()
        if levels < 2:
            raise ConfigValidationError('study.levels', f"至少需要 2 层，得到 {levels}")
        if study_resolution < 1:
            raise ConfigValidationError('study.base_resolution', f"必须 ≥ 1，得到 {study_resolution}")
        if time_refinement not in TIME_REFINEMENTS:
            raise ConfigValidationError('study.time_refinement', f"可选: {', '.join(TIME_REFINEMENTS)}")

    run = RunConfig(path=path, variant=variant, nu=nu, mesh_file=mesh_file, shape=shape,
                    resolution=resolution, segment_plan=segment_plan, alpha=alpha, data=data,
                    t_final=t_final, dt=dt, solve=solve, shift_k=shift_k, output_dir=output_dir,
                    snapshot_every=snapshot_every, base=base, study_levels=levels,
                    study_resolution=study_resolution, time_refinement=time_refinement)
    if shape is not None:
        run.check_labels(_plan_labels(shape, segment_plan))
    # 提前校验数据与问题类型是否匹配
    run.to_spec()
    logger.info("读取运行配置 %s: 问题 %s，ν=%g，数据 %s", path, variant, nu, sorted(data))
    return run
