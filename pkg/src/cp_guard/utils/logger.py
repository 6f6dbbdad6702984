"""
日志工具模块

提供统一的日志配置和管理功能
"""

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from cp_guard.utils.config import Config

PACKAGE_LOGGER = "cp_guard"


def setup_logging(service_name: str) -> logging.Logger:
    """
    设置日志配置

    包内所有模块的日志器都是 cp_guard 的子日志器，这里统一挂载处理器

    Args:
        service_name: 服务名称 (cli, experiment 等)，决定日志子目录

    Returns:
        logging.Logger: 配置好的 cp_guard 日志器
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(getattr(logging, Config.LOG_LEVEL.upper()))

    # 清除已有的处理器，避免重复
    logger.handlers.clear()

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)  # 控制台只显示 INFO 及以上级别
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if Config.LOG_TO_FILE:
        # 项目根目录 (main.py 所在目录)
        project_root = Path(__file__).parent.parent.parent.parent
        log_dir = project_root / Config.LOG_DIR / service_name
        log_dir.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            filename=log_dir / f"{service_name}.log",
            maxBytes=Config.LOG_MAX_BYTES,
            backupCount=Config.LOG_BACKUP_COUNT,
            encoding="utf-8",
        )
        file_handler.setLevel(getattr(logging, Config.LOG_LEVEL.upper()))
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
        logger.debug(f"日志目录: {log_dir}")

    logger.debug(f"日志系统初始化完成, 服务: {service_name}, 级别: {Config.LOG_LEVEL}")
    return logger


def get_logger(name: str) -> logging.Logger:
    """
    获取 cp_guard 下的子日志器

    Args:
        name: 子日志器名称，例如 "task.sensor-calibration"

    Returns:
        logging.Logger: 日志器
    """
    if name.startswith(PACKAGE_LOGGER):
        return logging.getLogger(name)
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")
