"""
统计验证工具

经验覆盖率 (EC)、条件经验覆盖率 (CEC)、直方图、Beta 分布 KS 检验与二项分布置信带
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from cp_guard.core.quantile import beta_conditional_params
from cp_guard.utils.errors import ArgumentError

Outcomes = Union[Sequence[bool], np.ndarray]


def empirical_coverage(outcomes: Outcomes) -> float:
    """
    EC: 事件成立次数占比

    Raises:
        ArgumentError: 输入为空
    """
    arr = np.asarray(outcomes, dtype=bool).reshape(-1)
    if arr.size == 0:
        raise ArgumentError("覆盖结果不能为空")
    return float(arr.mean())


def conditional_empirical_coverage(outcomes: Union[Sequence[Outcomes], np.ndarray]) -> np.ndarray:
    """
    CEC: 每次实验 (固定校准集) 内测试样本的覆盖率

    Args:
        outcomes: (N, J) 指示矩阵, 或 N 个等长/不等长的结果序列

    Returns:
        np.ndarray: 长度 N
    """
    rows = list(outcomes) if not isinstance(outcomes, np.ndarray) else list(np.atleast_2d(outcomes))
    if not rows:
        raise ArgumentError("覆盖结果不能为空")
    return np.array([empirical_coverage(row) for row in rows])


@dataclass(frozen=True)
class Histogram:
    """直方图: 区间端点与计数"""

    edges: np.ndarray
    counts: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"left": self.edges[:-1], "right": self.edges[1:], "count": self.counts})


def histogram(values: Iterable[float], bins: int = 20, value_range: Optional[Tuple[float, float]] = None) -> Histogram:
    arr = np.asarray(list(values), dtype=float)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        raise ArgumentError("直方图数据不能为空")
    counts, edges = np.histogram(arr, bins=bins, range=value_range)
    return Histogram(edges, counts)


def beta_ks_distance(cec: Iterable[float], K: int, delta: float) -> float:
    """
    CEC 经验分布与 Beta(K+1-l, l) 的 KS 距离, l = ⌊(K+1)δ⌋
    """
    a, b = beta_conditional_params(K, delta)
    values = np.asarray(list(cec), dtype=float)
    if values.size == 0:
        raise ArgumentError("CEC 不能为空")
    return float(stats.kstest(values, stats.beta(a, b).cdf).statistic)


def binomial_band(p: float, n: int, sigmas: float = 3.0) -> Tuple[float, float]:
    """p ± sigmas·√(p(1-p)/n), 截断到 [0, 1]"""
    if n < 1:
        raise ArgumentError(f"样本数必须为正: {n}")
    half = sigmas * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


def expected_coverage(K: int, delta: float) -> Tuple[float, float]:
    """连续分数下的边际覆盖率区间 [1-δ, 1-δ+1/(K+1)]"""
    return 1.0 - delta, 1.0 - delta + 1.0 / (K + 1)
