"""
快速测试脚本 - 验证环境和基本功能
"""
import sys
import os

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from rich.console import Console

console = Console()


def check_imports():
    """检查依赖包导入"""
    console.print("\n[bold cyan]1. 检查依赖包导入...[/bold cyan]")

    for name in ('numpy', 'scipy', 'pandas', 'sympy', 'click', 'dotenv'):
        try:
            __import__(name)
            console.print(f"  ✓ {name} 导入成功")
        except ImportError:
            console.print(f"  ✗ {name} 导入失败，请运行: pip install -r requirements.txt")
            return False
    return True


def check_modules():
    """检查项目模块"""
    console.print("\n[bold cyan]2. 检查项目模块...[/bold cyan]")

    try:
        from src.mixed_ns.meshgen import generate_mesh
        from src.mixed_ns.evolution import prepare
        from src.mixed_ns.forms import ProblemSpec
        from src.mixed_ns.coercivity import compute_shift

        mesh = generate_mesh('unit_square', 2)
        spec = ProblemSpec(variant='I', nu=1.0)
        setup = prepare(spec, mesh)
        report = compute_shift(setup.system, setup.dofmap, setup.frames)
        console.print(f"  ✓ 单位正方形网格装配成功，Korn 常数 β = {report.korn_beta:.4e}")
    except Exception as e:
        console.print(f"  ✗ 模块检查失败: {e}")
        return False
    return True


def check_identities():
    """检查边界恒等式"""
    console.print("\n[bold cyan]3. 检查边界恒等式...[/bold cyan]")

    from src.mixed_ns.boundary_calculus import verify_identities

    df = verify_identities()
    passed = int(df['passed'].sum())
    if passed == len(df):
        console.print(f"  ✓ 全部 {len(df)} 项通过")
        return True
    console.print(f"  ✗ {len(df) - passed} 项未通过")
    return False


def main():
    """主流程"""
    console.print("[bold green]开始检查求解器环境...[/bold green]")

    if not check_imports():
        console.print("\n[bold red]依赖包检查失败！请安装缺失的依赖包。[/bold red]")
        return

    if not check_modules():
        console.print("\n[bold red]项目模块检查失败！[/bold red]")
        return

    check_identities()

    console.print("\n[bold green]检查完成！[/bold green]")
    console.print("\n[bold cyan]下一步操作：[/bold cyan]")
    console.print("1. 验证边界恒等式: python main.py verify-identities")
    console.print("2. 生成网格: python main.py generate-mesh channel 4 results/channel.txt --labels all:1,outlet:7")
    console.print("3. 求解: python main.py solve examples_config/channel.ini")
    console.print("\n更多信息请查看 Docs/使用说明.md")


if __name__ == '__main__':
    main()
