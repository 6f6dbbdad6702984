"""
预测器模块

常速度与岭回归 AR 轨迹预测器
"""

from .models import (
    PredictionBundle,
    PredictorConfig,
    PredictorKind,
    PredictorModel,
    RidgeRegressor,
    UntrainedComponent,
    fit,
    predict_onestep_batch,
    predict_onestep_series,
    predict_openloop,
    predict_openloop_batch,
)

__all__ = [
    "PredictionBundle",
    "PredictorConfig",
    "PredictorKind",
    "PredictorModel",
    "RidgeRegressor",
    "UntrainedComponent",
    "fit",
    "predict_onestep_batch",
    "predict_onestep_series",
    "predict_openloop",
    "predict_openloop_batch",
]
