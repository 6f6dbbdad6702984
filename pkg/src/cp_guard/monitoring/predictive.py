"""
预测式运行时监控

由部分轨迹 z_0..z_t 给出 STL 鲁棒度的概率下界 ρ*:
- accurate: 校准 ρ(ẑ) - ρ(z) 的分位数 C, ρ* = ρ(ẑ) - C
- interpretable: 校准未来时刻的统计抽象, ρ* 为预测球上的最坏鲁棒度
给定分布偏移描述时改用鲁棒分位数
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from cp_guard.abstraction.statistical import (
    Abstraction,
    AbstractionMode,
    AlphaWeights,
    abstraction_single_score,
    prediction_errors,
)
from cp_guard.core.quantile import QuantileResult, conformal_quantile_extended
from cp_guard.core.robust import ShiftSpec, robust_quantile
from cp_guard.data.dataset import Split, TrajectoryDataset
from cp_guard.predictors.models import PredictorModel, predict_openloop_batch
from cp_guard.stl.formula import Formula
from cp_guard.stl.semantics import (
    as_trace,
    batch_robustness,
    horizon,
    is_robustness_marker,
    to_negation_normal_form,
    worst_case_robustness_batch,
)
from cp_guard.utils.errors import ArgumentError, TraceTooShortError

logger = logging.getLogger("cp_guard.monitoring")


class MonitorMethod(str, Enum):
    ACCURATE = "accurate"
    INTERPRETABLE = "interpretable"


@dataclass(frozen=True)
class MonitorCalibration:
    """固定时刻 t 的监控校准结果 (不可变)"""

    method: MonitorMethod
    spec: Formula
    t: int
    T: int
    delta: float
    K: int
    quantile: Optional[QuantileResult] = None
    abstraction: Optional[Abstraction] = None
    shift: Optional[ShiftSpec] = None

    @property
    def is_infinite(self) -> bool:
        if self.method is MonitorMethod.ACCURATE:
            return self.quantile is None or self.quantile.is_infinite
        return self.abstraction is None or self.abstraction.is_infinite

    @property
    def margin(self) -> float:
        """accurate 的 C; interpretable 的最大半径"""
        if self.is_infinite:
            return math.inf
        if self.method is MonitorMethod.ACCURATE:
            return self.quantile.as_float()
        radii = self.abstraction.radii
        return float(radii.max()) if radii.size else 0.0


@dataclass(frozen=True)
class MonitorResult:
    """ρ* 与输入摘要"""

    rho_star: float
    method: MonitorMethod
    delta: float
    digest: str

    def to_dict(self) -> dict:
        return {"rho_star": self.rho_star, "method": self.method.value, "delta": self.delta, "digest": self.digest}


def _rollouts(model: PredictorModel, trajectories: np.ndarray, t: int) -> np.ndarray:
    """前缀 z_0..z_t 拼接滚动预测得到完整的 ẑ"""
    predictions = predict_openloop_batch(model, trajectories[:, : t + 1], trajectories.shape[1] - 1, pad=True)
    return np.concatenate([trajectories[:, : t + 1], predictions], axis=1)


def robustness_gap(predicted: np.ndarray, actual: np.ndarray) -> np.ndarray:
    """ρ(ẑ) - ρ(z), 两者为同一 ±inf 标记时记为 0"""
    same = predicted == actual
    with np.errstate(invalid="ignore"):
        gap = predicted - actual
    return np.where(same, 0.0, gap)


def calibrate_monitor(
    calib: TrajectoryDataset,
    model: PredictorModel,
    spec: Formula,
    t: int,
    delta: float,
    method: MonitorMethod = MonitorMethod.ACCURATE,
    shift: Optional[ShiftSpec] = None,
    alpha: Optional[AlphaWeights] = None,
) -> MonitorCalibration:
    """
    监控校准

    Args:
        calib: 校准数据集
        model: 预测器
        spec: STL 规约, interpretable 方法会先转换为否定范式
        t: 监控时刻
        delta: 失效概率
        method: accurate 或 interpretable
        shift: 分布偏移描述, 给定时使用鲁棒分位数
        alpha: interpretable 方法的归一化权重, 默认全为 1

    Returns:
        MonitorCalibration: 校准结果

    Raises:
        TraceTooShortError: 轨迹长度不足 horizon + 1
    """
    calib.require(Split.CALIBRATE)
    method = MonitorMethod(method)
    required = horizon(spec) + 1
    if calib.length < required:
        raise TraceTooShortError(required, calib.length)
    if not 0 <= t <= calib.T:
        raise ArgumentError(f"监控时刻 {t} 不在 [0, {calib.T}] 内")

    if method is MonitorMethod.ACCURATE:
        predicted = batch_robustness(spec, _rollouts(model, calib.trajectories, t))
        actual = batch_robustness(spec, calib.trajectories)
        scores = robustness_gap(predicted, actual)
        if shift is None:
            quantile = conformal_quantile_extended(scores, delta)
        elif np.all(np.isfinite(scores)):
            quantile = robust_quantile(scores, delta, shift)
        else:
            raise ArgumentError("鲁棒校准要求鲁棒度差值全部有限")
        logger.info(f"accurate 监控校准完成: t={t}, K={calib.K}, C={quantile.as_float():.6g}")
        return MonitorCalibration(method, spec, t, calib.T, delta, calib.K, quantile=quantile, shift=shift)

    nnf = to_negation_normal_form(spec)
    if alpha is None:
        errors = prediction_errors(calib, model, AbstractionMode.OPEN_LOOP, base_time=t)
        alpha = AlphaWeights(np.ones(errors.values.shape[1:]), AbstractionMode.OPEN_LOOP)
    abstraction = abstraction_single_score(
        calib, model, delta, alpha, AbstractionMode.OPEN_LOOP, base_time=t, shift=shift
    )
    logger.info(f"interpretable 监控校准完成: t={t}, K={calib.K}, 时刻数 {abstraction.horizon}")
    return MonitorCalibration(method, nnf, t, calib.T, delta, calib.K, abstraction=abstraction, shift=shift)


def _digest(prefix: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(prefix, dtype=float).tobytes()).hexdigest()


def monitor_batch(calibration: MonitorCalibration, prefixes: np.ndarray, model: PredictorModel) -> np.ndarray:
    """
    批量计算 ρ*

    Args:
        calibration: 监控校准结果
        prefixes: (J, t+1, n) 已观测前缀
        model: 预测器

    Returns:
        np.ndarray: (J,) 校准退化时为 -inf
    """
    arr = np.asarray(prefixes, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != calibration.t + 1:
        raise ArgumentError(f"前缀长度应为 t+1 = {calibration.t + 1}, 实际形状 {arr.shape}")
    if calibration.is_infinite:
        return np.full(arr.shape[0], -math.inf)

    predictions = predict_openloop_batch(model, arr, calibration.T, pad=True)
    if calibration.method is MonitorMethod.ACCURATE:
        rho_hat = batch_robustness(calibration.spec, np.concatenate([arr, predictions], axis=1))
        # ±inf 标记不参与平移, C 可能是扩展分位数给出的 -inf
        with np.errstate(invalid="ignore"):
            shifted = rho_hat - calibration.quantile.value
        return np.where(is_robustness_marker(rho_hat), rho_hat, shifted)

    # 各智能体误差分别不超过 r_a 时, 整体状态误差不超过 √Σr_a²
    radii = calibration.abstraction.radii
    per_time = np.sqrt((radii**2).sum(axis=1)) if radii.size else np.zeros(0)
    return worst_case_robustness_batch(calibration.spec, arr, predictions, per_time)


def monitor(calibration: MonitorCalibration, prefix, model: PredictorModel) -> MonitorResult:
    """
    由前缀 z_0..z_t 计算鲁棒度下界 ρ*

    Raises:
        ArgumentError: 前缀长度不是 t+1
    """
    arr = as_trace(prefix)
    rho_star = float(monitor_batch(calibration, arr[None], model)[0])
    logger.debug(f"监控结果: ρ*={rho_star:.6g} ({calibration.method.value}, t={calibration.t})")
    return MonitorResult(rho_star, calibration.method, calibration.delta, _digest(arr))
