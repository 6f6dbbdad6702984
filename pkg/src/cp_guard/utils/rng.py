"""
随机数流模块

基于计数器型 Philox 生成器，每个命名子流由 (种子, 名称路径) 唯一确定，
不同名称的子流互不重叠，训练/调参/校准/测试数据因此来自不相交的随机流
"""

import zlib
from typing import Optional, Sequence, Tuple, Union

import numpy as np

Shape = Union[int, Tuple[int, ...], None]


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class RandomStreams:
    """带命名子流的随机数源"""

    def __init__(self, seed: int, path: Tuple[int, ...] = ()):
        """
        Args:
            seed: 非负整数种子
            path: 子流路径 (由名称哈希组成)，一般无需手动传入
        """
        if seed < 0:
            raise ValueError(f"种子必须为非负整数: {seed}")
        self.seed = int(seed)
        self.path = tuple(path)

    def child(self, name: str) -> "RandomStreams":
        """返回名为 name 的子流源"""
        return RandomStreams(self.seed, self.path + (_name_key(name),))

    def generator(self, name: Optional[str] = None) -> np.random.Generator:
        """
        生成 numpy Generator

        Args:
            name: 子流名称；为空时使用当前路径本身

        Returns:
            np.random.Generator: Philox 生成器
        """
        path = self.path if name is None else self.path + (_name_key(name),)
        sequence = np.random.SeedSequence(self.seed, spawn_key=path)
        return np.random.Generator(np.random.Philox(sequence))


def laplace(gen: np.random.Generator, loc: Union[float, np.ndarray], scale: float, size: Shape = None) -> np.ndarray:
    """
    拉普拉斯分布 (逆 CDF 采样)

    u ~ U(-1/2, 1/2), x = loc - scale * sign(u) * ln(1 - 2|u|)
    """
    if scale <= 0:
        raise ValueError(f"拉普拉斯尺度必须为正: {scale}")
    u = gen.random(size) - 0.5
    return loc - scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def truncated_normal(
    gen: np.random.Generator,
    mean: float,
    std: float,
    low: float,
    high: float,
    size: int,
) -> np.ndarray:
    """
    截断正态分布 (拒绝采样)

    Args:
        gen: 随机数生成器
        mean: 未截断分布均值
        std: 未截断分布标准差
        low: 下界
        high: 上界
        size: 样本数

    Returns:
        np.ndarray: 长度为 size 的样本
    """
    if not low < high:
        raise ValueError(f"截断区间无效: [{low}, {high}]")
    out = np.empty(size)
    filled = 0
    while filled < size:
        draw = gen.normal(mean, std, size=max(2 * (size - filled), 16))
        accepted = draw[(draw >= low) & (draw <= high)]
        take = min(accepted.size, size - filled)
        out[filled : filled + take] = accepted[:take]
        filled += take
    return out


def uniform_box(gen: np.random.Generator, low: Sequence[float], high: Sequence[float], size: int) -> np.ndarray:
    """在轴对齐盒子内均匀采样，返回 (size, d)"""
    low_arr = np.asarray(low, dtype=float)
    high_arr = np.asarray(high, dtype=float)
    return low_arr + (high_arr - low_arr) * gen.random((size, low_arr.size))
