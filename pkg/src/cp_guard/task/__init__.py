"""
实验模块

导入各实验模块以完成注册
"""

from . import abstraction_task, calibration_task, control_task, monitoring_task, verification_task
from .base_task import BaseExperiment, ExperimentRegistry, ExperimentReport, registry
from .runner import run_experiment

__all__ = [
    "BaseExperiment",
    "ExperimentRegistry",
    "ExperimentReport",
    "abstraction_task",
    "calibration_task",
    "control_task",
    "monitoring_task",
    "registry",
    "run_experiment",
    "verification_task",
]
