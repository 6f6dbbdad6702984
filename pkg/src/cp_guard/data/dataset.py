"""
轨迹数据集

K 条长度为 T+1 的 n 维轨迹, 附带划分标签 (train / tune / calibrate / test)
以及可选的多智能体维度划分
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from cp_guard.utils.errors import ArgumentError, SplitError

AgentRanges = Tuple[Tuple[int, int], ...]


class Split(str, Enum):
    """数据集划分标签"""

    TRAIN = "train"
    TUNE = "tune"
    CALIBRATE = "calibrate"
    TEST = "test"


def _normalize_agents(agents: Optional[Iterable[Sequence[int]]], dimension: int) -> Optional[AgentRanges]:
    if agents is None:
        return None
    ranges = tuple(sorted((int(lo), int(hi)) for lo, hi in agents))
    if not ranges:
        raise ArgumentError("智能体划分不能为空")
    cursor = 0
    for lo, hi in ranges:
        if lo != cursor or hi <= lo:
            raise ArgumentError(f"智能体维度区间必须互不相交且覆盖 [0, {dimension}): {ranges}")
        cursor = hi
    if cursor != dimension:
        raise ArgumentError(f"智能体维度区间必须覆盖 [0, {dimension}): {ranges}")
    return ranges


@dataclass(frozen=True, eq=False)
class TrajectoryDataset:
    """形如 (K, T+1, n) 的轨迹张量"""

    trajectories: np.ndarray
    split: Split
    agents: Optional[AgentRanges] = field(default=None)

    def __post_init__(self):
        arr = np.array(self.trajectories, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ArgumentError(f"轨迹张量应为 (K, T+1, n), 实际为 {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ArgumentError(f"轨迹数据集不能为空: {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("轨迹中存在非有限值")
        arr.setflags(write=False)
        object.__setattr__(self, "trajectories", arr)
        object.__setattr__(self, "split", Split(self.split))
        object.__setattr__(self, "agents", _normalize_agents(self.agents, arr.shape[2]))

    @property
    def K(self) -> int:
        return int(self.trajectories.shape[0])

    @property
    def length(self) -> int:
        return int(self.trajectories.shape[1])

    @property
    def T(self) -> int:
        return self.length - 1

    @property
    def dimension(self) -> int:
        return int(self.trajectories.shape[2])

    @property
    def agent_ranges(self) -> AgentRanges:
        """未划分时整个状态视为一个智能体"""
        return self.agents or ((0, self.dimension),)

    def require(self, *splits: Split) -> "TrajectoryDataset":
        """
        检查划分标签

        Raises:
            SplitError: 标签不在允许范围内
        """
        allowed = tuple(Split(s) for s in splits)
        if self.split not in allowed:
            names = ", ".join(s.value for s in allowed)
            raise SplitError(f"数据集划分为 {self.split.value}, 此处只接受 {names}")
        return self

    def subset(self, indices) -> "TrajectoryDataset":
        return TrajectoryDataset(self.trajectories[np.asarray(indices)], self.split, self.agents)

    def with_split(self, split: Split) -> "TrajectoryDataset":
        return TrajectoryDataset(self.trajectories, split, self.agents)


def partition(
    trajectories: np.ndarray,
    sizes: Dict[Split, int],
    agents: Optional[Iterable[Sequence[int]]] = None,
) -> Dict[Split, TrajectoryDataset]:
    """
    按顺序把轨迹切分为互不相交的数据集

    Args:
        trajectories: (N, T+1, n) 轨迹
        sizes: 每个划分的轨迹数, 按字典顺序依次切分
        agents: 多智能体维度划分

    Returns:
        Dict[Split, TrajectoryDataset]: 各划分的数据集
    """
    arr = np.asarray(trajectories, dtype=float)
    total = sum(sizes.values())
    if total > arr.shape[0]:
        raise ArgumentError(f"划分总数 {total} 超过轨迹数 {arr.shape[0]}")
    result = {}
    start = 0
    for split, count in sizes.items():
        result[Split(split)] = TrajectoryDataset(arr[start : start + count], Split(split), agents)
        start += count
    return result
