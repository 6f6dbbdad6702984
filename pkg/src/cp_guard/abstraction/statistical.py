"""
轨迹的统计抽象

预测误差 ‖e_τ - ê_τ‖ 的保形上界:
- 朴素方法: 每个 (时刻, 智能体) 单独校准, 失效概率按并集界均分
- 单一分数方法: 分数取 α 加权误差的最大值, 一次校准得到所有时刻的半径 C/α

开环模式使用基准时刻 t₀ 的滚动预测 ê_{τ|t₀}; 闭环模式使用单步预测 ê_{τ|τ-1}
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from cp_guard.core.quantile import QuantileResult, ceil_rank, conformal_quantile
from cp_guard.core.robust import ShiftSpec, robust_quantile
from cp_guard.data.dataset import Split, TrajectoryDataset
from cp_guard.predictors.models import PredictorModel, predict_onestep_batch, predict_openloop_batch
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ArgumentError

logger = logging.getLogger("cp_guard.abstraction")


class AbstractionMode(str, Enum):
    OPEN_LOOP = "open_loop"
    CLOSED_LOOP = "closed_loop"


@dataclass(frozen=True, eq=False)
class PredictionErrors:
    """(K, H, A) 的预测误差, times[h] 为第 h 列对应的时刻 τ"""

    values: np.ndarray
    times: Tuple[int, ...]
    base_time: int
    mode: AbstractionMode

    @property
    def horizon(self) -> int:
        return len(self.times)

    @property
    def agents(self) -> int:
        return int(self.values.shape[2])


@dataclass(frozen=True, eq=False)
class AlphaWeights:
    """严格为正的归一化权重, 形如 (H, A)"""

    values: np.ndarray
    mode: AbstractionMode

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.size and not np.all(arr > 0.0):
            raise ArgumentError("归一化权重 α 必须严格为正")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("归一化权重 α 必须为有限值")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "mode", AbstractionMode(self.mode))

    def on_simplex(self) -> "AlphaWeights":
        """缩放到 Σα = 1"""
        return AlphaWeights(self.values / self.values.sum(), self.mode)

    def scaled(self, factor: float) -> "AlphaWeights":
        return AlphaWeights(self.values * factor, self.mode)


@dataclass(frozen=True, eq=False)
class Abstraction:
    """
    各时刻 (及各智能体) 的误差半径

    radii 为 None 表示校准集太小, 半径为 Infinite
    """

    mode: AbstractionMode
    base_time: int
    times: Tuple[int, ...]
    radii: Optional[np.ndarray]
    delta: float
    K: int
    method: str
    quantile: Optional[QuantileResult] = None
    alpha: Optional[AlphaWeights] = None
    flags: Tuple[str, ...] = field(default=())

    @property
    def is_infinite(self) -> bool:
        return self.radii is None

    @property
    def horizon(self) -> int:
        return len(self.times)

    def radius(self, tau: int, agent: int = 0) -> float:
        """时刻 τ 的半径, Infinite 时为 math.inf"""
        if tau not in self.times:
            raise ArgumentError(f"时刻 {tau} 不在抽象覆盖的范围 {self.times[:1]}..{self.times[-1:]} 内")
        if self.radii is None:
            return float("inf")
        return float(self.radii[self.times.index(tau), agent])

    def covers(self, errors: np.ndarray) -> np.ndarray:
        """
        误差是否全部落在半径内

        Args:
            errors: (J, H, A) 误差

        Returns:
            np.ndarray: (J,) 布尔数组
        """
        if self.radii is None:
            return np.ones(errors.shape[0], dtype=bool)
        return np.all(errors <= self.radii[None], axis=(1, 2))

    def covers_each(self, errors: np.ndarray) -> np.ndarray:
        """逐时刻的覆盖指示, 形如 (J, H)"""
        if self.radii is None:
            return np.ones(errors.shape[:2], dtype=bool)
        return np.all(errors <= self.radii[None], axis=2)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "method": self.method,
            "base_time": self.base_time,
            "times": list(self.times),
            "radii": None if self.radii is None else self.radii.tolist(),
            "delta": self.delta,
            "K": self.K,
            "flags": list(self.flags),
        }


def _agent_norms(diff: np.ndarray, ranges) -> np.ndarray:
    return np.stack([np.linalg.norm(diff[..., lo:hi], axis=-1) for lo, hi in ranges], axis=-1)


def prediction_errors(
    dataset: TrajectoryDataset,
    model: PredictorModel,
    mode: AbstractionMode,
    base_time: Optional[int] = None,
) -> PredictionErrors:
    """
    计算每条轨迹每个时刻每个智能体的预测误差

    Args:
        dataset: 轨迹数据集
        model: 预测器
        mode: 开环或闭环
        base_time: 基准时刻 t₀, 默认为 order - 1

    Returns:
        PredictionErrors: 两种模式均覆盖 τ = t₀+1..T
    """
    mode = AbstractionMode(mode)
    t0 = model.order - 1 if base_time is None else int(base_time)
    if not 0 <= t0 <= dataset.T:
        raise ArgumentError(f"基准时刻 {t0} 不在 [0, {dataset.T}] 内")

    traj = dataset.trajectories
    if mode is AbstractionMode.OPEN_LOOP:
        predictions = predict_openloop_batch(model, traj[:, : t0 + 1], dataset.T, pad=True)
        diff = traj[:, t0 + 1 :] - predictions
        times = tuple(range(t0 + 1, dataset.T + 1))
    else:
        # 与开环一致: 前缀不足 order 时用首个状态补齐
        if dataset.length < 2:
            diff = np.zeros((dataset.K, 0, dataset.dimension))
        else:
            head = np.repeat(traj[:, :1], model.order - 1, axis=1)
            onestep = predict_onestep_batch(model, np.concatenate([head, traj], axis=1))
            diff = (traj[:, 1:] - onestep)[:, t0:]
        times = tuple(range(t0 + 1, dataset.T + 1))

    values = _agent_norms(diff, dataset.agent_ranges)
    return PredictionErrors(values, times, t0, mode)


def abstraction_naive(
    calib: TrajectoryDataset,
    model: PredictorModel,
    delta: float,
    mode: AbstractionMode,
    base_time: Optional[int] = None,
) -> Abstraction:
    """
    并集界构造

    每个 (时刻, 智能体) 的半径为该列误差在失效概率 δ/(H·A) 下的保形分位数

    Args:
        calib: 校准数据集
        model: 预测器
        delta: 总失效概率
        mode: 开环或闭环
        base_time: 基准时刻

    Returns:
        Abstraction: 校准集太小时 radii 为 None 并带 infinite_radius 标记
    """
    calib.require(Split.CALIBRATE)
    errors = prediction_errors(calib, model, mode, base_time)
    cells = errors.horizon * errors.agents
    if cells == 0:
        return Abstraction(errors.mode, errors.base_time, (), np.zeros((0, errors.agents)), delta, calib.K, "naive")

    per_cell = delta / cells
    radii = np.empty((errors.horizon, errors.agents))
    results = []
    for h in range(errors.horizon):
        for a in range(errors.agents):
            result = conformal_quantile(errors.values[:, h, a], per_cell)
            results.append(result)
            radii[h, a] = result.as_float()

    if any(r.is_infinite for r in results):
        logger.warning(f"朴素抽象半径为无穷: K={calib.K}, 单格失效概率 {per_cell:.5f}")
        return Abstraction(
            errors.mode, errors.base_time, errors.times, None, delta, calib.K, "naive", flags=("infinite_radius",)
        )
    radii.setflags(write=False)
    logger.debug(f"朴素抽象完成: H={errors.horizon}, A={errors.agents}, K={calib.K}")
    return Abstraction(errors.mode, errors.base_time, errors.times, radii, delta, calib.K, "naive")


def normalization_closed_form(
    tune: TrajectoryDataset,
    model: PredictorModel,
    mode: AbstractionMode,
    base_time: Optional[int] = None,
) -> AlphaWeights:
    """
    闭式归一化权重 α = 1 / (调参集上的最大误差)

    某列最大误差为 0 时借用其他列中最大的有限 α; 全部为 0 时取 α = 1
    """
    tune.require(Split.TUNE)
    errors = prediction_errors(tune, model, mode, base_time)
    maxima = errors.values.max(axis=0) if errors.values.shape[0] else np.zeros(errors.values.shape[1:])
    positive = maxima > 0.0
    if not np.any(positive):
        return AlphaWeights(np.ones_like(maxima), errors.mode)
    alpha = np.empty_like(maxima)
    alpha[positive] = 1.0 / maxima[positive]
    alpha[~positive] = alpha[positive].max()
    return AlphaWeights(alpha, errors.mode)


def max_scores(errors: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """R = max over (τ, agent) of α·‖error‖"""
    return (errors * alpha[None]).reshape(errors.shape[0], -1).max(axis=1)


class _QuantileObjective:
    """调参集上的 1-δ 经验分位数, 对 α 的正缩放归一化"""

    def __init__(self, errors: np.ndarray, delta: float):
        self.errors = errors.reshape(errors.shape[0], -1)
        rank = min(max(ceil_rank(self.errors.shape[0] * (1.0 - delta)), 1), self.errors.shape[0])
        self.index = rank - 1

    def __call__(self, alpha: np.ndarray) -> float:
        scores = (self.errors * alpha.reshape(-1)[None]).max(axis=1)
        return float(np.partition(scores, self.index)[self.index] / alpha.sum())


def _coordinate_search(objective: _QuantileObjective, start: np.ndarray, max_rounds: int) -> Tuple[np.ndarray, float]:
    alpha = start.copy()
    best = objective(alpha)
    for factor in (2.0, 1.5, 1.2, 1.05, 1.01):
        for _ in range(max_rounds):
            improved = False
            for j in range(alpha.size):
                for scale in (factor, 1.0 / factor):
                    trial = alpha.copy()
                    trial.flat[j] *= scale
                    value = objective(trial)
                    if value < best:
                        alpha, best = trial, value
                        improved = True
            if not improved:
                break
    return alpha / alpha.sum(), best


def optimize_alpha(
    tune: TrajectoryDataset,
    model: PredictorModel,
    delta: float,
    mode: AbstractionMode,
    base_time: Optional[int] = None,
    restarts: Optional[int] = None,
    seed: int = 0,
    max_rounds: int = 50,
) -> AlphaWeights:
    """
    在单纯形上搜索使调参集 1-δ 分位数最小的 α

    多起点乘性坐标搜索, 起点包括闭式权重、均匀权重和随机 Dirichlet 点;
    结果在调参集上不劣于单纯形缩放后的闭式权重

    Args:
        tune: 调参数据集
        model: 预测器
        delta: 失效概率
        mode: 开环或闭环
        base_time: 基准时刻
        restarts: 随机起点个数, 默认 Config.ALPHA_RESTARTS
        seed: 随机起点的种子
        max_rounds: 每个步长的最大轮数

    Returns:
        AlphaWeights: Σα = 1
    """
    tune.require(Split.TUNE)
    errors = prediction_errors(tune, model, mode, base_time)
    closed = normalization_closed_form(tune, model, mode, base_time).on_simplex()
    if closed.values.size <= 1:
        return closed

    objective = _QuantileObjective(errors.values, delta)
    shape = closed.values.shape
    rng = np.random.default_rng(seed)
    starts = [closed.values.copy(), np.full(shape, 1.0 / closed.values.size)]
    n_restarts = Config.ALPHA_RESTARTS if restarts is None else restarts
    starts += [rng.dirichlet(np.ones(closed.values.size)).reshape(shape) for _ in range(n_restarts)]

    baseline = objective(closed.values)
    best_alpha, best_value = closed.values, baseline
    for start in starts:
        candidate, value = _coordinate_search(objective, np.maximum(start, 1e-12), max_rounds)
        if value < best_value:
            best_alpha, best_value = candidate, value

    if best_value > baseline:
        best_alpha = closed.values
    logger.debug(f"α 优化完成: 目标值 {baseline:.6f} → {best_value:.6f}")
    return AlphaWeights(best_alpha, errors.mode)


def abstraction_single_score(
    calib: TrajectoryDataset,
    model: PredictorModel,
    delta: float,
    alpha: AlphaWeights,
    mode: AbstractionMode,
    base_time: Optional[int] = None,
    shift: Optional[ShiftSpec] = None,
) -> Abstraction:
    """
    单一分数构造

    R⁽ⁱ⁾ = max_{τ, agent} α·‖e_τ - ê_τ‖, C = 保形分位数 (给定 shift 时为鲁棒分位数),
    半径为 C/α

    Args:
        calib: 校准数据集
        model: 预测器
        delta: 失效概率
        alpha: 归一化权重, 形状须与 (H, A) 一致
        mode: 开环或闭环
        base_time: 基准时刻
        shift: 分布偏移描述

    Returns:
        Abstraction: 单一分数抽象
    """
    calib.require(Split.CALIBRATE)
    errors = prediction_errors(calib, model, mode, base_time)
    method = "single_score" if shift is None else "single_score_robust"
    if errors.horizon == 0:
        return Abstraction(
            errors.mode, errors.base_time, (), np.zeros((0, errors.agents)), delta, calib.K, method, alpha=alpha
        )

    weights = np.asarray(alpha.values, dtype=float)
    if weights.shape != errors.values.shape[1:]:
        raise ArgumentError(f"α 形状 {weights.shape} 与误差形状 {errors.values.shape[1:]} 不一致")
    if not np.all(weights > 0.0):
        raise ArgumentError("归一化权重 α 必须严格为正")

    scores = max_scores(errors.values, weights)
    if shift is None:
        quantile = conformal_quantile(scores, delta)
    else:
        quantile = robust_quantile(scores, delta, shift)

    if quantile.is_infinite:
        logger.warning(f"单一分数抽象半径为无穷: K={calib.K}, δ={delta}")
        return Abstraction(
            errors.mode,
            errors.base_time,
            errors.times,
            None,
            delta,
            calib.K,
            method,
            quantile,
            alpha,
            quantile.flags + ("infinite_radius",),
        )

    radii = quantile.value / weights
    radii.setflags(write=False)
    logger.debug(f"单一分数抽象完成: C={quantile.value:.6f}, H={errors.horizon}, K={calib.K}")
    return Abstraction(
        errors.mode, errors.base_time, errors.times, radii, delta, calib.K, method, quantile, alpha, quantile.flags
    )
