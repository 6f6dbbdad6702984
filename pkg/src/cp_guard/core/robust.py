"""
分布偏移下的鲁棒保形预测

测试分布与校准分布的 f-散度不超过 ε 时, 把置信水平收紧为 1-δ̃ 后
在 K 个分数 (不加 ∞) 上取经验分位数
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np
from scipy import special, stats

from cp_guard.core.quantile import CalibrationScores, QuantileResult, empirical_quantile
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ArgumentError, NumericalError

logger = logging.getLogger("cp_guard.core.robust")

_SATURATION_TOL = 1e-12
_MAX_BISECTION_STEPS = 200


class Divergence(str, Enum):
    TV = "tv"
    KL = "kl"


@dataclass(frozen=True)
class ShiftSpec:
    """分布偏移描述: 散度类型与半径 ε"""

    divergence: Divergence
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "divergence", Divergence(self.divergence))
        if not self.epsilon >= 0.0 or not math.isfinite(self.epsilon):
            raise ArgumentError(f"ε 必须为非负有限数: {self.epsilon}")

    @classmethod
    def tv(cls, epsilon: float) -> "ShiftSpec":
        return cls(Divergence.TV, epsilon)

    @classmethod
    def kl(cls, epsilon: float) -> "ShiftSpec":
        return cls(Divergence.KL, epsilon)


@dataclass(frozen=True)
class RobustLevel:
    """收紧后的失效概率 δ̃ 及其中间量"""

    delta: float
    delta_n: float
    delta_tilde: float
    degenerate: bool

    @property
    def level(self) -> float:
        return 1.0 - self.delta_tilde


class _Saturation:
    """记录 g / g⁻¹ 的参数是否越过 1 被截断"""

    def __init__(self):
        self.hit = False

    def clamp(self, value: float) -> float:
        if value > 1.0 + _SATURATION_TOL:
            self.hit = True
        return min(max(value, 0.0), 1.0)


def _bernoulli_kl(z: float, beta: float) -> float:
    return float(special.rel_entr(z, beta) + special.rel_entr(1.0 - z, 1.0 - beta))


def _bisect(predicate: Callable[[float], bool], lo: float, hi: float, tol: float) -> Tuple[float, float]:
    """在 [lo, hi] 上二分, predicate(lo) 为假而 predicate(hi) 为真"""
    for _ in range(_MAX_BISECTION_STEPS):
        if hi - lo <= tol:
            return lo, hi
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    raise NumericalError(f"KL 二分法未在 {_MAX_BISECTION_STEPS} 步内收敛到 {tol}")


def _g(beta: float, shift: ShiftSpec, tol: float) -> float:
    if shift.divergence is Divergence.TV:
        return max(beta - shift.epsilon, 0.0)
    if beta <= 0.0:
        return 0.0
    if beta >= 1.0:
        return 1.0
    if _bernoulli_kl(0.0, beta) <= shift.epsilon:
        return 0.0
    # kl(z‖β) 在 [0, β] 上单调递减, 取满足 kl ≤ ε 的最小 z
    _, hi = _bisect(lambda z: _bernoulli_kl(z, beta) <= shift.epsilon, 0.0, beta, tol)
    return hi


def _g_inverse(tau: float, shift: ShiftSpec, saturation: _Saturation, tol: float) -> float:
    if shift.divergence is Divergence.TV:
        return saturation.clamp(tau + shift.epsilon)
    if tau >= 1.0:
        return 1.0
    kl_at_one = _bernoulli_kl(tau, 1.0)
    if math.isnan(kl_at_one):
        raise NumericalError(f"KL 散度计算出现 NaN: τ={tau}")
    if kl_at_one <= shift.epsilon:
        saturation.hit = True
        return 1.0
    # kl(τ‖β) 在 [τ, 1] 上单调递增, 取满足 kl ≤ ε 的最大 β
    lo, _ = _bisect(lambda beta: _bernoulli_kl(tau, beta) > shift.epsilon, tau, 1.0, tol)
    return lo


def robust_adjusted_level(K: int, delta: float, shift: ShiftSpec, tol: Optional[float] = None) -> RobustLevel:
    """
    计算鲁棒保形预测的收紧失效概率 δ̃

    δ_n = 1 - g((1 + 1/K) · g⁻¹(1-δ)), δ̃ = 1 - g⁻¹(1-δ_n)

    Args:
        K: 校准集大小
        delta: 目标失效概率
        shift: 偏移描述
        tol: KL 二分法容差, 默认取 Config.KL_BISECTION_TOL

    Returns:
        RobustLevel: 任一步参数越过 1 被截断时 degenerate=True
    """
    if K < 1:
        raise ArgumentError(f"K 必须为正整数: {K}")
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta 必须位于 (0, 1), 实际为 {delta}")
    tol = Config.KL_BISECTION_TOL if tol is None else tol

    saturation = _Saturation()
    inner = _g_inverse(1.0 - delta, shift, saturation, tol)
    delta_n = 1.0 - _g(saturation.clamp((1.0 + 1.0 / K) * inner), shift, tol)
    delta_tilde = 1.0 - _g_inverse(saturation.clamp(1.0 - delta_n), shift, saturation, tol)
    degenerate = saturation.hit or delta_tilde < 0.0

    if degenerate:
        logger.debug(f"鲁棒水平退化: K={K}, δ={delta}, {shift.divergence.value} ε={shift.epsilon}")
    return RobustLevel(delta=delta, delta_n=delta_n, delta_tilde=delta_tilde, degenerate=degenerate)


def robust_quantile(
    scores: Union[CalibrationScores, Iterable[float], np.ndarray],
    delta: float,
    shift: ShiftSpec,
    on_degenerate: str = "max_score",
) -> QuantileResult:
    """
    鲁棒保形分位数 C̃: K 个分数在水平 1-δ̃ 上的经验分位数

    Args:
        scores: 校准分数
        delta: 目标失效概率
        shift: 偏移描述
        on_degenerate: 水平退化时的处理, "max_score" (最大分数, 带标记) 或 "infinite"

    Returns:
        QuantileResult: 鲁棒分位数
    """
    if on_degenerate not in ("infinite", "max_score"):
        raise ArgumentError(f"未知的退化处理方式: {on_degenerate}")
    calib = CalibrationScores.of(scores)
    robust = robust_adjusted_level(calib.K, delta, shift)
    if robust.degenerate:
        if on_degenerate == "max_score":
            return QuantileResult(float(np.max(calib.values)), calib.K, calib.K, 1.0, ("degenerate_max_score",))
        return QuantileResult.infinite(calib.K + 1, calib.K, robust.level, ("degenerate_level",))
    return empirical_quantile(calib, robust.level, ("robust",))


def gaussian_tv_distance(mean_p: np.ndarray, mean_q: np.ndarray, cov: np.ndarray) -> float:
    """
    协方差相同的两个高斯分布之间的全变差距离

    TV = 2Φ(Δ/2) - 1, Δ 为马氏距离
    """
    diff = np.atleast_1d(np.asarray(mean_p, dtype=float) - np.asarray(mean_q, dtype=float))
    cov_arr = np.atleast_2d(np.asarray(cov, dtype=float))
    mahalanobis = math.sqrt(float(diff @ np.linalg.solve(cov_arr, diff)))
    return float(2.0 * stats.norm.cdf(mahalanobis / 2.0) - 1.0)


def monte_carlo_tv_distance(
    log_density_p: Callable[[np.ndarray], np.ndarray],
    log_density_q: Callable[[np.ndarray], np.ndarray],
    samples_p: np.ndarray,
) -> float:
    """
    用 P 的样本估计全变差距离: TV = E_P[(1 - q/p)^+]

    Args:
        log_density_p: P 的对数密度
        log_density_q: Q 的对数密度
        samples_p: 来自 P 的样本

    Returns:
        float: TV 估计值
    """
    ratio = np.exp(log_density_q(samples_p) - log_density_p(samples_p))
    return float(np.mean(np.clip(1.0 - ratio, 0.0, None)))
