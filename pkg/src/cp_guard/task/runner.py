"""
实验入口

按配置字典 (已加载的 JSON 配置) 创建注册的实验并运行
"""

from pathlib import Path
from typing import Any, Dict, Optional

from cp_guard.task.base_task import ExperimentReport, registry
from cp_guard.utils.config import load_schema, validate_against_schema
from cp_guard.utils.errors import ConfigError, CPGuardError
from cp_guard.utils.logger import get_logger

logger = get_logger("task.runner")


def run_experiment(config: Dict[str, Any], out_dir: Optional[Path] = None) -> ExperimentReport:
    """
    运行一个注册的实验

    Args:
        config: 配置字典, 至少包含 experiment.name; 可选 seed / delta / out,
            experiment.repetitions / workers / params
        out_dir: 产物目录, 覆盖 config["out"]; 两者都为空时不写文件

    Returns:
        ExperimentReport: 实验报告

    Raises:
        ConfigError: 配置不符合 schema
        UnknownExperimentError: 实验未注册
        CPGuardError: 实验执行失败
    """
    validate_against_schema(config, load_schema())
    section = config.get("experiment")
    if section is None:
        raise ConfigError("缺少必填字段", "experiment")
    if "name" not in section:
        raise ConfigError("缺少必填字段", "experiment.name")

    experiment = registry.create(
        section["name"],
        params=section.get("params"),
        seed=config.get("seed"),
        delta=config.get("delta"),
        repetitions=section.get("repetitions"),
        workers=section.get("workers", 1),
    )
    target = out_dir if out_dir is not None else config.get("out")
    if not experiment.run(None if target is None else Path(target)):
        raise CPGuardError(f"实验 {experiment.name} 执行失败: {experiment.last_error}")

    logger.info(f"实验 {experiment.name} 完成, 产物目录: {target}")
    return experiment.last_report
