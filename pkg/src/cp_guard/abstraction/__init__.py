"""
统计抽象模块

朴素 (并集界) 与单一分数两种构造, 以及归一化权重
"""

from cp_guard.data import Split, TrajectoryDataset

from .statistical import (
    Abstraction,
    AbstractionMode,
    AlphaWeights,
    PredictionErrors,
    abstraction_naive,
    abstraction_single_score,
    max_scores,
    normalization_closed_form,
    optimize_alpha,
    prediction_errors,
)

__all__ = [
    "Abstraction",
    "AbstractionMode",
    "AlphaWeights",
    "PredictionErrors",
    "Split",
    "TrajectoryDataset",
    "abstraction_naive",
    "abstraction_single_score",
    "max_scores",
    "normalization_closed_form",
    "optimize_alpha",
    "prediction_errors",
]
