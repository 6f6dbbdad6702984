"""
轨迹数据模块

带划分标签的轨迹数据集
"""

from .dataset import Split, TrajectoryDataset, partition

__all__ = [
    "Split",
    "TrajectoryDataset",
    "partition",
]
