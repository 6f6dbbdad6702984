"""
分割保形预测分位数

核心约定:
- C 取 scores ∪ {∞} 的第 p 小值, p = ⌈(K+1)(1-δ)⌉
- ∞ 不以浮点哨兵存储, 只通过秩检查 p > K 表示
- 并列值取最大下标 (同值下结果不变)
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from cp_guard.utils.errors import ArgumentError

logger = logging.getLogger("cp_guard.core")

# 秩计算时吸收浮点误差, 例如 20 * 0.95 = 19.000000000000004
_RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CalibrationScores:
    """校准非一致性分数的有限多重集"""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ArgumentError("校准分数不能为空")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("校准分数必须全部为有限值")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def of(cls, scores: Union["CalibrationScores", Iterable[float], np.ndarray]) -> "CalibrationScores":
        """把任意可迭代对象包装为 CalibrationScores"""
        if isinstance(scores, CalibrationScores):
            return scores
        return cls(np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores, dtype=float))

    @property
    def K(self) -> int:
        return int(self.values.size)

    def sorted(self) -> np.ndarray:
        return np.sort(self.values, kind="stable")


@dataclass(frozen=True)
class QuantileResult:
    """保形分位数结果: Finite(value) 或 Infinite"""

    value: Optional[float]
    rank: int
    K: int
    level: float
    flags: Tuple[str, ...] = field(default=())

    @classmethod
    def infinite(cls, rank: int, K: int, level: float, flags: Tuple[str, ...] = ()) -> "QuantileResult":
        return cls(value=None, rank=rank, K=K, level=level, flags=flags)

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def covers(self, score: float) -> bool:
        """score ≤ C 是否成立 (Infinite 覆盖一切)"""
        return self.value is None or score <= self.value

    def as_float(self) -> float:
        """报告用: Infinite 转为 math.inf"""
        return math.inf if self.value is None else float(self.value)

    def scaled(self, factor: float) -> "QuantileResult":
        """返回 value * factor 的结果 (factor > 0)"""
        if self.value is None:
            return self
        return QuantileResult(self.value * factor, self.rank, self.K, self.level, self.flags)

    def __le__(self, other: "QuantileResult") -> bool:
        if other.value is None:
            return True
        if self.value is None:
            return False
        return self.value <= other.value

    def __ge__(self, other: "QuantileResult") -> bool:
        return other <= self

    def to_dict(self) -> dict:
        return {
            "kind": "infinite" if self.value is None else "finite",
            "value": self.value,
            "rank": self.rank,
            "K": self.K,
            "level": self.level,
            "flags": list(self.flags),
        }


class BoundVariant(str, Enum):
    """校准条件保证的集中不等式"""

    HOEFFDING = "hoeffding"
    BERNSTEIN = "bernstein"


def _check_probability(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ArgumentError(f"{name} 必须位于 (0, 1), 实际为 {value}")


def ceil_rank(x: float) -> int:
    """容忍浮点误差的上取整"""
    return int(math.ceil(x - _RANK_TOL))


def floor_rank(x: float) -> int:
    """容忍浮点误差的下取整"""
    return int(math.floor(x + _RANK_TOL))


def order_statistic(scores: CalibrationScores, rank: int) -> float:
    """第 rank 小的分数 (1 起始)"""
    order = np.argsort(scores.values, kind="stable")
    return float(scores.values[order[rank - 1]])


def quantile_at_level(scores: CalibrationScores, level: float, flags: Tuple[str, ...] = ()) -> QuantileResult:
    """
    在 scores ∪ {∞} 上取 level 分位数

    Args:
        scores: 校准分数
        level: 置信水平, 可以 ≥ 1 (此时结果为 Infinite)
        flags: 附加到结果上的标记

    Returns:
        QuantileResult: 第 ⌈(K+1)·level⌉ 小值
    """
    K = scores.K
    rank = max(ceil_rank((K + 1) * level), 1)
    if rank > K:
        return QuantileResult.infinite(rank, K, level, flags)
    return QuantileResult(order_statistic(scores, rank), rank, K, level, flags)


def empirical_quantile(scores: CalibrationScores, level: float, flags: Tuple[str, ...] = ()) -> QuantileResult:
    """
    不加 ∞ 的经验分位数: 第 ⌈K·level⌉ 小值

    Args:
        scores: 分数
        level: 水平, ≥ 1 或秩超过 K 时结果为 Infinite
        flags: 附加标记

    Returns:
        QuantileResult: 经验分位数
    """
    K = scores.K
    rank = max(ceil_rank(K * level), 1)
    if rank > K:
        return QuantileResult.infinite(rank, K, level, flags)
    return QuantileResult(order_statistic(scores, rank), rank, K, level, flags)


def conformal_quantile(
    scores: Union[CalibrationScores, Iterable[float], np.ndarray], delta: float
) -> QuantileResult:
    """
    分割保形预测的 (1-δ) 分位数

    Args:
        scores: K 个校准分数
        delta: 失效概率 δ ∈ (0, 1)

    Returns:
        QuantileResult: p = ⌈(K+1)(1-δ)⌉ 的次序统计量，p > K 时为 Infinite

    Raises:
        ArgumentError: 分数为空或 δ 越界
    """
    _check_probability("delta", delta)
    calib = CalibrationScores.of(scores)
    return quantile_at_level(calib, 1.0 - delta)


def conformal_quantile_extended(scores: Union[Iterable[float], np.ndarray], delta: float) -> QuantileResult:
    """
    允许 ±inf 分数的保形分位数

    鲁棒度为 ±inf 标记 (公式含 true) 时分数也是 ±inf; 取到 -inf 时结果带
    extended_real 标记, 取到 +inf 时视为 Infinite
    """
    _check_probability("delta", delta)
    arr = np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ArgumentError("校准分数不能为空")
    if np.any(np.isnan(arr)):
        raise ArgumentError("校准分数中存在 NaN")
    if np.all(np.isfinite(arr)):
        return conformal_quantile(arr, delta)

    K = arr.size
    level = 1.0 - delta
    rank = max(ceil_rank((K + 1) * level), 1)
    if rank > K:
        return QuantileResult.infinite(rank, K, level)
    value = float(np.sort(arr)[rank - 1])
    if value == math.inf:
        return QuantileResult.infinite(rank, K, level, ("unbounded_score",))
    return QuantileResult(value, rank, K, level, ("extended_real",))


def min_calibration_size(delta: float) -> int:
    """
    获得有限分位数所需的最小校准集大小

    即满足 ⌈(K+1)(1-δ)⌉ ≤ K 的最小 K, 非退化时等于 ⌈(1-δ)/δ⌉

    Args:
        delta: 失效概率

    Returns:
        int: 最小 K
    """
    _check_probability("delta", delta)
    K = max(1, int(math.floor((1.0 - delta) / delta)) - 2)
    while ceil_rank((K + 1) * (1.0 - delta)) > K:
        K += 1
    return K


def calibration_conditional_level(K: int, delta: float, beta: float, variant: BoundVariant) -> float:
    """校准条件保证所需的修正置信水平"""
    _check_probability("delta", delta)
    _check_probability("beta", beta)
    if K < 1:
        raise ArgumentError(f"K 必须为正整数: {K}")
    log_term = math.log(1.0 / beta)
    if BoundVariant(variant) is BoundVariant.HOEFFDING:
        return 1.0 - delta + math.sqrt(log_term / (2.0 * K))
    return 1.0 - delta + math.sqrt(2.0 * delta * log_term / K) + 2.0 * log_term / K


def calibration_conditional_quantile(
    scores: Union[CalibrationScores, Iterable[float], np.ndarray],
    delta: float,
    beta: float,
    variant: Union[BoundVariant, str] = BoundVariant.HOEFFDING,
) -> QuantileResult:
    """
    校准条件保证的分位数

    以 1-β 的概率 (对校准数据) 满足测试覆盖率 ≥ 1-δ

    Args:
        scores: 校准分数
        delta: 失效概率
        beta: 校准置信参数
        variant: hoeffding 或 bernstein

    Returns:
        QuantileResult: 修正水平 ≥ 1 时为 Infinite 并带 level_exceeds_one 标记
    """
    calib = CalibrationScores.of(scores)
    level = calibration_conditional_level(calib.K, delta, beta, BoundVariant(variant))
    if level >= 1.0:
        logger.debug(f"修正置信水平 {level:.5f} ≥ 1, 结果为无穷")
        return QuantileResult.infinite(calib.K + 1, calib.K, level, ("level_exceeds_one",))
    return quantile_at_level(calib, level)


def beta_conditional_params(K: int, delta: float) -> Tuple[int, int]:
    """
    条件覆盖率服从的 Beta 分布参数

    Returns:
        (K+1-⌊(K+1)δ⌋, ⌊(K+1)δ⌋)

    Raises:
        ArgumentError: ⌊(K+1)δ⌋ = 0
    """
    _check_probability("delta", delta)
    if K < 1:
        raise ArgumentError(f"K 必须为正整数: {K}")
    l = floor_rank((K + 1) * delta)
    if l < 1:
        raise ArgumentError(f"⌊(K+1)δ⌋ = 0, Beta 参数必须为正 (K={K}, δ={delta})")
    return K + 1 - l, l


def quantile_lp(scores: Union[CalibrationScores, Iterable[float], np.ndarray], level: float) -> float:
    """
    分位数线性规划 (pinball 损失) 的解

    min_q Σ level·(R_i - q)^+ + (1-level)·(q - R_i)^+ 的最优解集为
    {q : #{R < q} ≤ K·level ≤ #{R ≤ q}}; K·level 非整数时唯一,
    为第 ⌈K·level⌉ 小值; 为整数 m 时取最优区间 [R_(m), R_(m+1)] 的下端点

    Args:
        scores: 分数
        level: 水平 ∈ (0, 1)

    Returns:
        float: 最优 q
    """
    _check_probability("level", level)
    calib = CalibrationScores.of(scores)
    ordered = calib.sorted()
    rank = min(max(ceil_rank(calib.K * level), 1), calib.K)
    return float(ordered[rank - 1])
