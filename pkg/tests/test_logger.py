"""
测试日志工具
"""
import logging

import pandas as pd

from src.mixed_ns.logger import NORM_COLUMNS, NormLogger, setup_logger


def test_setup_logger_is_idempotent(tmp_path):
    name = 'mixed_ns.test_idempotent'
    logger = setup_logger(name, log_dir=str(tmp_path))
    again = setup_logger(name, log_dir=str(tmp_path))
    try:
        assert logger is again
        assert len(logger.handlers) == 2
        assert any(isinstance(h, logging.FileHandler) for h in logger.handlers)
        assert len(list(tmp_path.glob('test_idempotent_*.log'))) == 1
    finally:
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)


def test_norm_logger(tmp_path):
    norms = NormLogger()
    norms.log_step(0.0, 1.0, 2.0, 0, 0.0)
    norms.log_step(0.1, 0.5, 1.5, 3, 1e-11, energy=0.25)
    df = norms.to_frame()
    assert list(df.columns) == NORM_COLUMNS + ['energy']
    assert df['picard_iters'].tolist() == [0, 3]

    path = norms.write_csv(str(tmp_path / 'norms.csv'))
    written = pd.read_csv(path)
    assert list(written.columns) == NORM_COLUMNS
    with open(path, encoding='utf-8') as fh:
        lines = fh.read().splitlines()
    assert lines[1] == '0.000000000000e+00,1.000000000000e+00,2.000000000000e+00,0,0.000000000000e+00'
