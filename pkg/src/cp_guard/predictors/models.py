"""
轨迹预测器

常速度外推与岭回归自回归模型 (AR), 以及单步特征回归器
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg

from cp_guard.data.dataset import Split, TrajectoryDataset
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ArgumentError

logger = logging.getLogger("cp_guard.predictors")

_MAX_CONDITION = 1e12


class PredictorKind(str, Enum):
    CONSTANT_VELOCITY = "constant_velocity"
    RIDGE_AR = "ridge_ar"


@dataclass(frozen=True)
class PredictorConfig:
    """预测器训练参数"""

    kind: PredictorKind = PredictorKind.RIDGE_AR
    order: int = 2
    ridge: float = 1e-6
    intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", PredictorKind(self.kind))
        if self.kind is PredictorKind.RIDGE_AR and not 1 <= self.order <= Config.RIDGE_MAX_ORDER:
            raise ArgumentError(f"AR 阶数必须位于 [1, {Config.RIDGE_MAX_ORDER}]: {self.order}")
        if self.ridge < 0:
            raise ArgumentError(f"岭参数不能为负: {self.ridge}")

    @classmethod
    def from_dict(cls, data: dict) -> "PredictorConfig":
        return cls(
            kind=data.get("kind", PredictorKind.RIDGE_AR),
            order=int(data.get("order", 2)),
            ridge=float(data.get("ridge", 1e-6)),
            intercept=bool(data.get("intercept", True)),
        )


@dataclass(frozen=True, eq=False)
class PredictorModel:
    """训练好的预测器 (不可变)"""

    kind: PredictorKind
    dimension: int
    order: int
    coefficients: Optional[np.ndarray] = field(default=None)
    intercept: bool = False
    ridge: float = 0.0

    @classmethod
    def constant_velocity(cls, dimension: int) -> "PredictorModel":
        return cls(PredictorKind.CONSTANT_VELOCITY, dimension, order=2)

    def step(self, window: np.ndarray) -> np.ndarray:
        """
        由最近 order 个状态 (时间升序, 形如 (..., order, n)) 预测下一个状态
        """
        if self.kind is PredictorKind.CONSTANT_VELOCITY:
            return 2.0 * window[..., -1, :] - window[..., -2, :]
        features = _features(window, self.intercept)
        return features @ self.coefficients


@dataclass(frozen=True, eq=False)
class PredictionBundle:
    """基准时刻 t 的开环预测 ê_{t+1|t}, ..., ê_{T|t}"""

    base_time: int
    predictions: np.ndarray

    @property
    def horizon(self) -> int:
        return self.base_time + int(self.predictions.shape[0])

    def at(self, tau: int) -> np.ndarray:
        """ê_{τ|t}"""
        if not self.base_time < tau <= self.horizon:
            raise ArgumentError(f"τ={tau} 不在 ({self.base_time}, {self.horizon}] 内")
        return self.predictions[tau - self.base_time - 1]


def _features(window: np.ndarray, intercept: bool) -> np.ndarray:
    # 最新状态在前: [z_t, z_{t-1}, ..., z_{t-p+1}]
    lagged = window[..., ::-1, :].reshape(window.shape[:-2] + (-1,))
    if not intercept:
        return lagged
    return np.concatenate([lagged, np.ones(lagged.shape[:-1] + (1,))], axis=-1)


def _windows(trajectories: np.ndarray, order: int) -> np.ndarray:
    """(K, L, n) → (K, L-order+1, order, n) 的滑动窗口"""
    view = sliding_window_view(trajectories, order, axis=1)
    return np.moveaxis(view, -1, -2)


def _solve_ridge(features: np.ndarray, targets: np.ndarray, ridge: float, intercept: bool) -> np.ndarray:
    """
    岭回归正规方程求解

    λ = 0 且正规方程奇异 (或条件数过大) 时取最小范数最小二乘解
    """
    gram = features.T @ features
    penalty = np.full(gram.shape[0], ridge)
    if intercept:
        penalty[-1] = 0.0
    gram = gram + np.diag(penalty)
    if ridge == 0.0 and np.linalg.cond(gram) > _MAX_CONDITION:
        logger.debug("正规方程退化, 改用最小范数最小二乘解")
        return linalg.lstsq(features, targets)[0]
    try:
        factor = linalg.cho_factor(gram)
    except linalg.LinAlgError as e:
        raise ArgumentError("正规方程不是正定矩阵, 请检查岭参数与特征") from e
    return linalg.cho_solve(factor, features.T @ targets)


def fit(dataset: TrajectoryDataset, config: PredictorConfig = PredictorConfig()) -> PredictorModel:
    """
    训练预测器

    只接受 train / tune 划分, 防止校准数据泄漏到预测器中

    Args:
        dataset: 训练轨迹
        config: 训练参数

    Returns:
        PredictorModel: 训练好的模型

    Raises:
        SplitError: 数据集划分为 calibrate / test
        ArgumentError: 轨迹太短, 或 λ > 0 时正规方程不正定
    """
    dataset.require(Split.TRAIN, Split.TUNE)
    n = dataset.dimension
    if config.kind is PredictorKind.CONSTANT_VELOCITY:
        return PredictorModel.constant_velocity(n)

    p = config.order
    if dataset.length <= p:
        raise ArgumentError(f"轨迹长度 {dataset.length} 必须大于 AR 阶数 {p}")

    windows = _windows(dataset.trajectories, p)[:, :-1]
    features = _features(windows, config.intercept).reshape(-1, n * p + int(config.intercept))
    targets = dataset.trajectories[:, p:, :].reshape(-1, n)
    coefficients = _solve_ridge(features, targets, config.ridge, config.intercept)
    if not np.all(np.isfinite(coefficients)):
        raise ArgumentError("岭回归系数中存在非有限值")

    coefficients.setflags(write=False)
    logger.info(f"预测器训练完成: AR(p={p}), λ={config.ridge}, 样本数 {targets.shape[0]}")
    return PredictorModel(PredictorKind.RIDGE_AR, n, p, coefficients, config.intercept, config.ridge)


def _padded(prefix: np.ndarray, order: int, pad: bool) -> np.ndarray:
    missing = order - prefix.shape[-2]
    if missing <= 0:
        return prefix
    if not pad:
        raise ArgumentError(f"前缀长度 {prefix.shape[-2]} 小于模型阶数 {order}")
    head = np.repeat(prefix[..., :1, :], missing, axis=-2)
    return np.concatenate([head, prefix], axis=-2)


def predict_openloop_batch(model: PredictorModel, prefixes: np.ndarray, horizon: int, pad: bool = False) -> np.ndarray:
    """
    批量开环滚动预测

    Args:
        model: 预测器
        prefixes: (K, t+1, n) 已观测前缀
        horizon: 终止时刻 T
        pad: 前缀不足 order 时是否用首个状态补齐

    Returns:
        np.ndarray: (K, T-t, n) 预测, 预测值被反馈为后续输入
    """
    arr = np.asarray(prefixes, dtype=float)
    t = arr.shape[-2] - 1
    if horizon < t:
        raise ArgumentError(f"终止时刻 {horizon} 早于基准时刻 {t}")
    window = _padded(arr, model.order, pad)[..., -model.order :, :]
    out = np.empty(arr.shape[:-2] + (horizon - t, arr.shape[-1]))
    for k in range(horizon - t):
        nxt = model.step(window)
        out[..., k, :] = nxt
        window = np.concatenate([window[..., 1:, :], nxt[..., None, :]], axis=-2)
    return out


def predict_openloop(model: PredictorModel, prefix: np.ndarray, horizon: int, pad: bool = False) -> PredictionBundle:
    """
    开环预测 ê_{t+1|t}, ..., ê_{T|t}

    Args:
        model: 预测器
        prefix: 状态 z_0..z_t, 形如 (t+1, n); 一维输入视为 n = 1
        horizon: 终止时刻 T
        pad: 前缀不足 order 时是否补齐

    Returns:
        PredictionBundle: 恰好 T-t 行
    """
    arr = np.asarray(prefix, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    predictions = predict_openloop_batch(model, arr, horizon, pad)
    return PredictionBundle(arr.shape[0] - 1, predictions)


def predict_onestep_batch(model: PredictorModel, trajectories: np.ndarray) -> np.ndarray:
    """
    (K, L, n) 轨迹上的单步预测, 返回 (K, L-order, n)

    第 k 行为 ê_{order+k | order+k-1}, 始终使用真实前缀
    """
    arr = np.asarray(trajectories, dtype=float)
    if arr.shape[1] < model.order + 1:
        raise ArgumentError(f"轨迹长度 {arr.shape[1]} 小于 order + 1 = {model.order + 1}")
    return model.step(_windows(arr, model.order)[:, :-1])


def predict_onestep_series(model: PredictorModel, trajectory: np.ndarray) -> np.ndarray:
    """
    单步预测序列 ê_{t+1|t}, t = order-1, ..., T-1

    长度为 L - max(order, 1)
    """
    arr = np.asarray(trajectory, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return predict_onestep_batch(model, arr[None])[0]


class RidgeRegressor:
    """特征到输出的岭回归, 用作可训练的学习组件"""

    def __init__(self, ridge: float = 1e-6):
        if ridge < 0:
            raise ArgumentError(f"岭参数不能为负: {ridge}")
        self.ridge = ridge
        self.weights: Optional[np.ndarray] = None

    def fit(self, features: np.ndarray, targets: np.ndarray) -> "RidgeRegressor":
        X = np.asarray(features, dtype=float)
        Y = np.asarray(targets, dtype=float)
        if X.shape[0] == 0:
            raise ArgumentError("训练样本不能为空")
        self.weights = _solve_ridge(X, Y, self.ridge, intercept=False)
        logger.debug(f"回归器训练完成: 样本数 {X.shape[0]}, 特征数 {X.shape[1]}")
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.weights is None:
            raise ArgumentError("回归器尚未训练")
        return np.asarray(features, dtype=float) @ self.weights


class UntrainedComponent:
    """未训练的组件: 直接输出初始位置"""

    def __init__(self, position_index=(0, 1)):
        self.position_index = list(position_index)

    def predict(self, initial_states: np.ndarray) -> np.ndarray:
        return np.asarray(initial_states, dtype=float)[..., self.position_index]
