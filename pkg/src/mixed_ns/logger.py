"""
日志工具
"""
import logging
import os
from datetime import datetime
from typing import Dict, List, Optional

import pandas as pd

import config


NORM_COLUMNS = ['t', 'L2_velocity', 'H1_velocity', 'picard_iters', 'residual']


def setup_logger(name: str, log_dir: str = None, level: str = None) -> logging.Logger:
    """
    设置日志记录器

    Args:
        name: 日志名称
        log_dir: 日志目录
        level: 日志级别，默认取 config.LOG_LEVEL

    Returns:
        Logger实例
    """
    if log_dir is None:
        log_dir = config.LOG_DIR
    if level is None:
        level = config.LOG_LEVEL

    os.makedirs(log_dir, exist_ok=True)

    logger = logging.getLogger(name)
    logger.setLevel(level)

    # 避免重复添加handler
    if logger.handlers:
        return logger

    # 文件handler
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    log_file = os.path.join(log_dir, f"{name.split('.')[-1]}_{timestamp}.log")

    file_handler = logging.FileHandler(log_file, encoding='utf-8')
    file_handler.setLevel(level)

    # 控制台handler
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.WARNING)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    file_handler.setFormatter(formatter)
    console_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    return logger


class NormLogger:
    """
    范数日志：逐时间步记录速度范数与Picard迭代信息

    CSV 只包含固定列且使用固定浮点格式，相同输入得到逐字节相同的文件。
    诊断量（应变范数、斜对称缺陷、二阶差分）只保存在内存中的 DataFrame。
    """

    def __init__(self):
        self.rows: List[Dict[str, float]] = []

    def log_step(self, t: float, l2: float, h1: float, picard_iters: int,
                 residual: float, **diagnostics):
        """记录一个时间步"""
        row = {
            't': float(t),
            'L2_velocity': float(l2),
            'H1_velocity': float(h1),
            'picard_iters': int(picard_iters),
            'residual': float(residual),
        }
        row.update({key: float(value) for key, value in diagnostics.items()})
        self.rows.append(row)

    def to_frame(self) -> pd.DataFrame:
        """全部记录（含诊断列）"""
        return pd.DataFrame(self.rows)

    def write_csv(self, path: str, columns: Optional[List[str]] = None):
        """写出范数CSV"""
        columns = columns or NORM_COLUMNS
        df = pd.DataFrame(self.rows, columns=columns)
        output_dir = os.path.dirname(os.path.abspath(path))
        os.makedirs(output_dir, exist_ok=True)
        df.to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT,
                  lineterminator='\n')
        return path
