"""
命令行界面模块
"""
import functools
import logging
import os
import sys

import click
import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

import config
from src.mixed_ns.boundary_calculus import verify_identities
from src.mixed_ns.coercivity import compute_shift
from src.mixed_ns.compat import compat_verdict
from src.mixed_ns.errors import SolverError
from src.mixed_ns.evolution import prepare, run, run_perturbation
from src.mixed_ns.geometry import save_mesh
from src.mixed_ns.lifting import LiftingField
from src.mixed_ns.logger import setup_logger
from src.mixed_ns.meshgen import SHAPE_SIDES, generate_mesh
from src.mixed_ns.outputs import write_lines, write_run, write_table
from src.mixed_ns.run_config import RunConfig, parse_config, parse_segment_plan
from src.mixed_ns.studies import convergence_study


console = Console()
logger = logging.getLogger(__name__)


def guarded(func):
    """把 SolverError 映射为退出码"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SolverError as e:
            logger.error("%s: %s", type(e).__name__, e)
            console.print(f"[bold red]✗ {type(e).__name__}: {e}[/bold red]")
            sys.exit(e.exit_code)
        except Exception as e:
            logger.exception("未预期的错误")
            console.print(f"[bold red]✗ 未预期的错误: {e}[/bold red]")
            sys.exit(config.EXIT_UNEXPECTED)
    return wrapper


def _print_lines(title: str, lines):
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("键", style="cyan")
    table.add_column("值", justify="right")
    for line in lines:
        key, _, value = line.partition(' = ')
        table.add_row(key, value)
    console.print(table)


def _print_frame(title: str, df: pd.DataFrame, limit: int = 20):
    display_df = df if len(df) <= limit else pd.concat([df.head(limit // 2), df.tail(limit // 2)])
    table = Table(title=title, show_header=True, header_style="bold magenta")
    for column in display_df.columns:
        table.add_column(str(column), justify="right")
    for _, row in display_df.iterrows():
        cells = []
        for value in row:
            if isinstance(value, (float, np.floating)):
                cells.append(f"{value:.6e}")
            else:
                cells.append(str(value))
        table.add_row(*cells)
    console.print(table)


def _compat_meshes(run_cfg: RunConfig, levels: int = None):
    """相容性检查用的网格序列：生成网格以当前分辨率为最细层"""
    if not run_cfg.is_generated:
        return [run_cfg.build_mesh()]
    levels = levels or config.COMPAT_MIN_LEVELS
    resolutions = sorted({max(1, run_cfg.resolution // 2 ** i) for i in range(levels)})
    return [run_cfg.build_mesh(r) for r in resolutions]


def _compat(run_cfg: RunConfig, spec, levels: int = None, strict: bool = False):
    meshes = _compat_meshes(run_cfg, levels)
    report = compat_verdict(spec, meshes, base=run_cfg.base, shift_k=run_cfg.shift_k,
                            with_cross_check=bool(spec.h) and run_cfg.base is None)
    write_lines(os.path.join(run_cfg.output_dir, 'compat.txt'), report.to_lines())
    color = 'green' if report.verdict == 'in_H' else 'yellow'
    console.print(f"[{color}]相容性 {report.functional}: {report.verdict}"
                  f"（增长指数 {report.growth_exponent:.3f}）[/{color}]")
    if strict and report.verdict == 'not_in_H':
        console.print("[bold red]✗ 相容性条件不满足（--strict）[/bold red]")
        sys.exit(config.EXIT_COMPAT)
    return report


@click.group()
def cli():
    """二维混合边界条件 Navier-Stokes 有限元求解器"""
    setup_logger('src.mixed_ns')


@cli.command('verify-identities')
@click.option('--samples', default=config.IDENTITY_SAMPLES, show_default=True, type=int,
              help='每条曲线上的 Gauss 点数')
@guarded
def verify_identities_cmd(samples):
    """验证边界恒等式"""
    df = verify_identities(samples)
    _print_frame("边界恒等式", df, limit=len(df))
    failed = int((~df['passed']).sum())
    if failed:
        console.print(f"[bold red]✗ {failed} 项未通过[/bold red]")
        sys.exit(config.EXIT_UNEXPECTED)
    console.print(f"[green]✓ 全部 {len(df)} 项通过[/green]")


@cli.command()
@click.argument('config_path', type=click.Path())
@guarded
def coercivity(config_path):
    """计算 Korn 常数与平移常数"""
    run_cfg = parse_config(config_path)
    spec = run_cfg.to_spec()
    setup = prepare(spec, run_cfg.build_mesh())
    base = None
    if run_cfg.base is not None:
        base = LiftingField.from_function(run_cfg.base, spec.time_grid[:1], setup.dofmap).samples[0]
    report = compute_shift(setup.system, setup.dofmap, setup.frames, base_field=base)
    lines = report.to_lines()
    write_lines(os.path.join(run_cfg.output_dir, 'coercivity.txt'), lines)
    _print_lines("强制性", lines)


@cli.command()
@click.argument('config_path', type=click.Path())
@click.option('--levels', default=config.COMPAT_MIN_LEVELS, show_default=True, type=int,
              help='网格加密层数')
@click.option('--strict', is_flag=True, help='判定为 not_in_H 时以非零码退出')
@guarded
def compat(config_path, levels, strict):
    """初始时刻相容性检查"""
    run_cfg = parse_config(config_path)
    spec = run_cfg.to_spec()
    if run_cfg.is_generated:
        meshes = run_cfg.mesh_family(levels)
    else:
        meshes = [run_cfg.build_mesh()]
    report = compat_verdict(spec, meshes, base=run_cfg.base, shift_k=run_cfg.shift_k,
                            with_cross_check=bool(spec.h) and run_cfg.base is None)
    lines = report.to_lines()
    write_lines(os.path.join(run_cfg.output_dir, 'compat.txt'), lines)
    _print_lines("相容性", lines)
    if strict and report.verdict == 'not_in_H':
        console.print("[bold red]✗ 相容性条件不满足[/bold red]")
        sys.exit(config.EXIT_COMPAT)


@cli.command()
@click.argument('config_path', type=click.Path())
@click.option('--strict', is_flag=True, help='相容性判定为 not_in_H 时不求解并以非零码退出')
@guarded
def solve(config_path, strict):
    """标准模式时间推进"""
    run_cfg = parse_config(config_path)
    if run_cfg.base is not None:
        console.print("[yellow]配置含 [perturbation] 节，solve 忽略它（请用 perturb）[/yellow]")
    spec = run_cfg.to_spec()
    mesh = run_cfg.build_mesh()
    compat_report = _compat(run_cfg, spec, strict=strict)

    console.print(f"[cyan]求解问题 {spec.variant}: {mesh.summary()}[/cyan]")
    setup = prepare(spec, mesh)
    result = run(spec, mesh, run_cfg.solve, setup=setup, shift_k=run_cfg.shift_k,
                 compat_report=compat_report)
    write_run(result, run_cfg.output_dir, run_cfg.snapshot_every)
    write_lines(os.path.join(run_cfg.output_dir, 'coercivity.txt'), result.coercivity.to_lines())
    if not result.transport.flux.empty:
        write_table(result.transport.flux, os.path.join(run_cfg.output_dir, 'flux.csv'))
    _print_frame("范数", result.norms.to_frame()[['t', 'L2_velocity', 'H1_velocity',
                                                   'picard_iters', 'residual']])
    console.print(f"[green]✓ 结果已写入 {run_cfg.output_dir}[/green]")


@cli.command()
@click.argument('config_path', type=click.Path())
@guarded
def perturb(config_path):
    """扰动模式：基础解由 [perturbation] base 给出"""
    run_cfg = parse_config(config_path)
    if run_cfg.base is None:
        console.print("[bold red]✗ 扰动模式需要 [perturbation] base[/bold red]")
        sys.exit(config.EXIT_CONFIG)
    spec = run_cfg.to_spec()
    mesh = run_cfg.build_mesh()
    _compat(run_cfg, spec)

    setup = prepare(spec, mesh)
    base = LiftingField.from_function(run_cfg.base, spec.time_grid, setup.dofmap)
    result = run_perturbation(base, spec, mesh, run_cfg.solve, setup=setup, shift_k=run_cfg.shift_k)
    write_run(result, run_cfg.output_dir, run_cfg.snapshot_every)
    write_lines(os.path.join(run_cfg.output_dir, 'coercivity.txt'), result.coercivity.to_lines())

    system = setup.system
    df = pd.DataFrame({
        't': result.times,
        'zbar_L2': [system.l2_norm(z) for z in result.rescaled],
        'zbar_H1': [system.h1_norm(z) for z in result.rescaled],
    })
    write_table(df, os.path.join(run_cfg.output_dir, 'perturbation.csv'))
    _print_frame("扰动范数", df)
    console.print(f"[green]✓ 结果已写入 {run_cfg.output_dir}[/green]")


@cli.command('convergence-study')
@click.argument('config_path', type=click.Path())
@click.option('--levels', default=None, type=int, help='加密层数（默认取配置 [study] levels）')
@guarded
def convergence_study_cmd(config_path, levels):
    """制造解上的网格收敛研究（通道，Γ₁ 入口与壁面，Γ₇ 出口）"""
    run_cfg = parse_config(config_path)
    df = convergence_study(variant=run_cfg.variant, nu=run_cfg.nu,
                           levels=levels or run_cfg.study_levels,
                           base_resolution=run_cfg.study_resolution, t_final=run_cfg.t_final,
                           dt=run_cfg.dt, time_refinement=run_cfg.time_refinement,
                           solve_config=run_cfg.solve)
    write_table(df, os.path.join(run_cfg.output_dir, 'study.csv'))
    _print_frame("收敛研究", df)


@cli.command('generate-mesh')
@click.argument('shape', type=click.Choice(sorted(SHAPE_SIDES)))
@click.argument('resolution', type=int)
@click.argument('output', type=click.Path())
@click.option('--labels', default='1', show_default=True, help='边界标签，如 all:1,outlet:7')
@guarded
def generate_mesh_cmd(shape, resolution, output, labels):
    """生成测试网格并写出 mesh2d 文件"""
    mesh = generate_mesh(shape, resolution, parse_segment_plan(labels, shape))
    output_dir = os.path.dirname(os.path.abspath(output))
    os.makedirs(output_dir, exist_ok=True)
    save_mesh(mesh, output)
    console.print(f"[green]✓ {mesh.summary()} → {output}[/green]")

