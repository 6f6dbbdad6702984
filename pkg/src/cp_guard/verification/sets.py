"""
输出集合与带符号距离

集合内部距离为负, 外部为正; 球与盒子为闭式, 一般集合用子水平集 {h ≤ 0}
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from cp_guard.utils.errors import ArgumentError


@dataclass(frozen=True)
class BallSet:
    """{y : ‖y - center‖ ≤ radius}"""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(x) for x in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ArgumentError(f"球半径必须为正: {self.radius}")

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.linalg.norm(points - np.asarray(self.center), axis=-1) - self.radius


@dataclass(frozen=True)
class BoxSet:
    """{y : lo ≤ y ≤ hi}"""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(x) for x in np.atleast_1d(self.lo))
        hi = tuple(float(x) for x in np.atleast_1d(self.hi))
        if len(lo) != len(hi):
            raise ArgumentError(f"盒子上下界维数不一致: {len(lo)} 与 {len(hi)}")
        if any(l > h for l, h in zip(lo, hi)):
            raise ArgumentError(f"盒子下界必须逐分量不大于上界: {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        below = lo - points
        above = points - hi
        # 外部: 到盒子的欧氏距离; 内部: 到最近边界距离的相反数
        outside = np.linalg.norm(np.maximum(np.maximum(below, above), 0.0), axis=-1)
        inside = np.max(np.maximum(below, above), axis=-1)
        return np.where(outside > 0.0, outside, np.minimum(inside, 0.0))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.all((points >= np.asarray(self.lo)) & (points <= np.asarray(self.hi)), axis=-1)


@dataclass(frozen=True)
class SublevelSet:
    """{y : h(y) ≤ 0}, 分数直接取 h(y)"""

    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    lipschitz: Optional[float] = None
    name: str = "h_out"

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(points, dtype=float)), dtype=float)


OutputSet = Union[BallSet, BoxSet, SublevelSet]


def whole_space(dimension: int, radius: float = 1e12) -> BallSet:
    """近似整个输出空间的大球"""
    return BallSet(tuple([0.0] * dimension), radius)


def tube_distances(tube: Sequence[OutputSet], states: np.ndarray) -> np.ndarray:
    """
    轨迹到逐时刻集合的带符号距离

    Args:
        tube: 长度 ≥ L 的集合序列
        states: (K, L, d) 轨迹 (已投影到集合所在分量)

    Returns:
        np.ndarray: (K, L)
    """
    length = states.shape[1]
    if len(tube) < length:
        raise ArgumentError(f"集合序列长度 {len(tube)} 小于轨迹长度 {length}")
    return np.stack([tube[t].signed_distance(states[:, t]) for t in range(length)], axis=1)
