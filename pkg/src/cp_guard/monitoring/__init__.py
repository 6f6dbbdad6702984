"""
运行时监控模块

accurate / interpretable 两种预测式监控及其鲁棒变体
"""

from .predictive import (
    MonitorCalibration,
    MonitorMethod,
    MonitorResult,
    calibrate_monitor,
    monitor,
    monitor_batch,
    robustness_gap,
)

__all__ = [
    "MonitorCalibration",
    "MonitorMethod",
    "MonitorResult",
    "calibrate_monitor",
    "monitor",
    "monitor_batch",
    "robustness_gap",
]
