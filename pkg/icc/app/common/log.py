"""日志系统模块"""
from __future__ import annotations

import functools
import sys
from pathlib import Path
from typing import Optional

from loguru import logger

from icc.app.core.config import settings


CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """重新配置日志输出（控制台走stderr，stdout留给结果）"""
    level = (level or settings.log_level).upper()
    log_file = log_file or settings.log_file

    # 移除已有的sink
    logger.remove()

    logger.add(sys.stderr, level=level, format=CONSOLE_FORMAT, colorize=True)

    # 配置文件日志（如果指定了日志文件）
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_file,
            level=level,
            format=FILE_FORMAT,
            rotation="10 MB",
            retention="30 days",
            compression="zip",
            encoding="utf-8",
        )


setup_logging()


def sync_log_decorator(func_name: str = None):
    """同步日志装饰器，用于记录函数调用和异常"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            func_name_str = func_name or func.__name__
            logger.info(f"开始执行: {func_name_str}")
            try:
                result = func(*args, **kwargs)
                logger.info(f"成功完成: {func_name_str}")
                return result
            except Exception as e:
                logger.error(f"执行失败: {func_name_str}, 错误: {str(e)}")
                raise
        return wrapper
    return decorator


# 导出logger
__all__ = ["logger", "setup_logging", "sync_log_decorator"]
