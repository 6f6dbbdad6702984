"""
自适应保形预测

δ_{t+1} = δ_t + γ(δ_target - miss_t); δ_t 在状态中不做截断,
求分位数时才把水平截断到 [1/(t+1), 1]
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Tuple

import numpy as np

from cp_guard.core.quantile import CalibrationScores, QuantileResult, ceil_rank, quantile_at_level
from cp_guard.utils.errors import ArgumentError

logger = logging.getLogger("cp_guard.core.adaptive")


@dataclass(frozen=True)
class AdaptiveState:
    """自适应保形预测的在线状态 (单写者)"""

    delta_t: float
    gamma: float
    target_delta: float
    miss_history: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ArgumentError(f"学习率 γ 必须为正: {self.gamma}")
        if not 0.0 < self.target_delta < 1.0:
            raise ArgumentError(f"目标失效概率必须位于 (0, 1): {self.target_delta}")

    @classmethod
    def start(cls, target_delta: float, gamma: float) -> "AdaptiveState":
        return cls(delta_t=target_delta, gamma=gamma, target_delta=target_delta)

    @property
    def steps(self) -> int:
        return len(self.miss_history)

    @property
    def miss_rate(self) -> float:
        if not self.miss_history:
            return 0.0
        return sum(self.miss_history) / len(self.miss_history)


def adaptive_update(state: AdaptiveState, miss: int) -> AdaptiveState:
    """
    自适应更新一步

    Args:
        state: 当前状态
        miss: 本步是否未覆盖 (0 或 1)

    Returns:
        AdaptiveState: 新状态
    """
    if miss not in (0, 1):
        raise ArgumentError(f"miss 只能取 0 或 1: {miss}")
    return replace(
        state,
        delta_t=state.delta_t + state.gamma * (state.target_delta - miss),
        miss_history=state.miss_history + (int(miss),),
    )


def adaptive_quantile(history: Sequence[float], state: AdaptiveState) -> QuantileResult:
    """
    用历史分数和当前 δ_t 计算分位数

    水平 1-δ_t 截断到 [1/(t+1), 1], t 为历史长度; 历史为空时为 Infinite
    """
    t = len(history)
    level = min(max(1.0 - state.delta_t, 1.0 / (t + 1)), 1.0)
    if t == 0:
        return QuantileResult.infinite(1, 0, level, ("empty_history",))
    return quantile_at_level(CalibrationScores.of(np.asarray(history, dtype=float)), level)


def run_adaptive(scores: Iterable[float], gamma: float, target_delta: float) -> AdaptiveState:
    """
    在分数流上运行自适应保形预测

    每一步先用历史分数求分位数, 再判断当前分数是否被覆盖, 最后更新 δ_t

    Args:
        scores: 按时间排列的分数流
        gamma: 学习率
        target_delta: 目标失效概率

    Returns:
        AdaptiveState: 最终状态, miss_history 记录每一步的未覆盖指示
    """
    state = AdaptiveState.start(target_delta, gamma)
    # 维护有序历史, 避免每步重新排序
    ordered = np.empty(0)
    misses = []
    delta_t = state.delta_t
    for score in scores:
        t = ordered.size
        level = min(max(1.0 - delta_t, 1.0 / (t + 1)), 1.0)
        rank = max(ceil_rank((t + 1) * level), 1)
        miss = 0 if rank > t else int(score > ordered[rank - 1])
        misses.append(miss)
        delta_t = delta_t + gamma * (target_delta - miss)
        ordered = np.insert(ordered, np.searchsorted(ordered, score), score)

    final = replace(state, delta_t=delta_t, miss_history=tuple(misses))
    logger.debug(f"自适应保形预测完成: {final.steps} 步, 未覆盖率 {final.miss_rate:.4f}")
    return final
