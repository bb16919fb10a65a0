"""
异常定义模块

每个异常类携带 exit_code，命令行据此返回对应的退出码。
"""
import config


class SolverError(Exception):
    """求解器异常基类"""
    exit_code = config.EXIT_UNEXPECTED


class ConfigParseError(SolverError):
    """运行配置语法错误"""
    exit_code = config.EXIT_CONFIG

    def __init__(self, message: str, lineno: int = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"第 {lineno} 行: {message}"
        super().__init__(message)


class ConfigValidationError(SolverError):
    """运行配置校验错误"""
    exit_code = config.EXIT_CONFIG

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"[{field}] {message}")


class MeshParseError(SolverError):
    """网格文件格式错误"""
    exit_code = config.EXIT_MESH

    def __init__(self, message: str, lineno: int = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"第 {lineno} 行: {message}"
        super().__init__(message)


class MeshTopologyError(SolverError):
    """网格拓扑错误（悬挂边、翻转三角形等）"""
    exit_code = config.EXIT_MESH


class MeshLabelError(SolverError):
    """边界标签超出 1..7"""
    exit_code = config.EXIT_MESH


class GeometryError(SolverError):
    """几何错误（退化参数化、未知形状）"""
    exit_code = config.EXIT_MESH


class HypothesisViolationError(SolverError):
    """边界恒等式的前提条件不满足"""
    exit_code = config.EXIT_HYPOTHESIS


class ConstraintError(SolverError):
    """共享节点上的边界值互相矛盾"""
    exit_code = config.EXIT_ASSEMBLY


class AssemblyError(SolverError):
    """装配错误（缺少边界标架、数据对应的边界段不存在）"""
    exit_code = config.EXIT_ASSEMBLY


class CoercivityError(SolverError):
    """强制性计算失败（刚体模态、特征值迭代不收敛）"""
    exit_code = config.EXIT_COERCIVITY


class FluxIncompatibilityError(SolverError):
    """封闭区域上给定速度的净通量不为零"""
    exit_code = config.EXIT_FLUX


class PicardDivergenceError(SolverError):
    """Picard迭代发散：小数据假设被违反"""
    exit_code = config.EXIT_PICARD

    def __init__(self, message: str, history=None, time_index: int = None):
        self.history = list(history or [])
        self.time_index = time_index
        super().__init__(f"smallness hypothesis violated: {message}")
