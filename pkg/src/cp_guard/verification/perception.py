"""
基于 ε-网的感知抽象

在紧致定义域上取均匀网格, 每个网格点独立校准估计误差,
再用 Lipschitz 常数把结论推广到整个定义域
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from cp_guard.core.quantile import QuantileResult, conformal_quantile
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ArgumentError
from cp_guard.verification.sets import BoxSet

logger = logging.getLogger("cp_guard.verification.perception")

Sensor = Callable[[np.ndarray, np.random.Generator], np.ndarray]
Estimator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PerceptionBound:
    """sup_z ‖ẑ(y) - z‖ 的概率上界"""

    bound: float
    sup_radius: float
    epsilon: float
    grid: np.ndarray
    radii: Tuple[QuantileResult, ...]
    flags: Tuple[str, ...] = field(default=("lipschitz_unverified",))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.bound)


def epsilon_net(domain: BoxSet, epsilon: float, max_points: Optional[int] = None) -> np.ndarray:
    """
    均匀网格 ε-网

    每个坐标轴取 ⌈宽度 / (2ε/√n)⌉ 个单元中心, 任意点到最近网格点的
    欧氏距离不超过 ε

    Raises:
        ArgumentError: 网格点数超过上限
    """
    if not epsilon > 0:
        raise ArgumentError(f"ε 必须为正: {epsilon}")
    n = domain.dimension
    spacing = 2.0 * epsilon / math.sqrt(n)
    counts = [max(1, math.ceil(width / spacing - 1e-12)) for width in domain.widths]
    cap = Config.EPS_NET_MAX_POINTS if max_points is None else max_points
    total = math.prod(counts)
    if total > cap:
        raise ArgumentError(f"ε-网点数 {total} 超过上限 {cap}, 请使用更大的 ε")

    axes: List[np.ndarray] = []
    for lo, width, count in zip(domain.lo, domain.widths, counts):
        axes.append(lo + (np.arange(count) + 0.5) * width / count)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def perceptual_abstraction(
    domain: BoxSet,
    sensor: Sensor,
    estimator: Estimator,
    epsilon: float,
    delta: float,
    k_per_point: int,
    lipschitz_p: float,
    lipschitz_zhat: float,
    generator: np.random.Generator,
    max_points: Optional[int] = None,
) -> PerceptionBound:
    """
    感知抽象的误差上界

    Args:
        domain: 状态定义域
        sensor: sensor(z, generator) 生成带噪测量 y
        estimator: y ↦ ẑ
        epsilon: ε-网分辨率
        delta: 每个网格点的失效概率
        k_per_point: 每个网格点的噪声样本数
        lipschitz_p: 传感器对状态的 Lipschitz 常数
        lipschitz_zhat: 估计器的 Lipschitz 常数 (用户提供, 未经验证)
        generator: 随机数生成器
        max_points: 网格点数上限

    Returns:
        PerceptionBound: sup_j C_j + (L_p·L_ẑ + 1)·ε
    """
    if lipschitz_p < 0 or lipschitz_zhat < 0:
        raise ArgumentError("Lipschitz 常数不能为负")
    grid = epsilon_net(domain, epsilon, max_points)
    repeated = np.repeat(grid, k_per_point, axis=0)
    estimates = np.asarray(estimator(sensor(repeated, generator)), dtype=float)
    errors = np.linalg.norm(estimates - repeated, axis=-1).reshape(grid.shape[0], k_per_point)

    radii = tuple(conformal_quantile(errors[j], delta) for j in range(grid.shape[0]))
    correction = (lipschitz_p * lipschitz_zhat + 1.0) * epsilon
    if any(r.is_infinite for r in radii):
        logger.warning(f"感知抽象退化: 每点样本数 {k_per_point} 不足以在 δ={delta} 下得到有限半径")
        return PerceptionBound(math.inf, math.inf, epsilon, grid, radii, ("lipschitz_unverified", "infinite_radius"))

    sup_radius = max(r.value for r in radii)
    bound = sup_radius + correction
    logger.info(f"感知抽象完成: 网格点 {grid.shape[0]}, sup C_j={sup_radius:.6f}, 上界 {bound:.6f}")
    return PerceptionBound(bound, sup_radius, epsilon, grid, radii)
