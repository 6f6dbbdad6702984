"""
保形预测核心模块

分割保形分位数、校准条件分位数、鲁棒与自适应变体
"""

from .adaptive import AdaptiveState, adaptive_quantile, adaptive_update, run_adaptive
from .quantile import (
    BoundVariant,
    CalibrationScores,
    QuantileResult,
    beta_conditional_params,
    calibration_conditional_quantile,
    conformal_quantile,
    conformal_quantile_extended,
    empirical_quantile,
    min_calibration_size,
    quantile_lp,
)
from .robust import (
    Divergence,
    RobustLevel,
    ShiftSpec,
    gaussian_tv_distance,
    monte_carlo_tv_distance,
    robust_adjusted_level,
    robust_quantile,
)

__all__ = [
    "AdaptiveState",
    "BoundVariant",
    "CalibrationScores",
    "Divergence",
    "QuantileResult",
    "RobustLevel",
    "ShiftSpec",
    "adaptive_quantile",
    "adaptive_update",
    "beta_conditional_params",
    "calibration_conditional_quantile",
    "conformal_quantile",
    "conformal_quantile_extended",
    "empirical_quantile",
    "gaussian_tv_distance",
    "min_calibration_size",
    "monte_carlo_tv_distance",
    "quantile_lp",
    "robust_adjusted_level",
    "robust_quantile",
    "run_adaptive",
]
