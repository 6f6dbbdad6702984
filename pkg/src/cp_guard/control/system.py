"""
线性系统与安全约束

约束 c(x, e) 对环境状态 e 是 L-Lipschitz 的; 收紧形式 c(x, ê) ≥ L·C
配合 ‖e - ê‖ ≤ C 即可推出 c(x, e) ≥ 0
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from cp_guard.utils.errors import ArgumentError

Selector = Tuple[int, ...]


def _matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} 必须为二维矩阵, 实际形状 {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """
    离散时间线性系统 x⁺ = A x + B u, 输入约束 u_lo ≤ u ≤ u_hi

    selectors 给出命名的输出分量, 例如 {"position": (0, 1)}
    """

    A: np.ndarray
    B: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray
    selectors: Dict[str, Selector] = field(default_factory=dict)

    def __post_init__(self):
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ArgumentError(f"A 必须为方阵, 实际形状 {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ArgumentError(f"B 的行数 {B.shape[0]} 与状态维数 {A.shape[0]} 不一致")
        lo = np.broadcast_to(np.asarray(self.u_lo, dtype=float), (B.shape[1],)).copy()
        hi = np.broadcast_to(np.asarray(self.u_hi, dtype=float), (B.shape[1],)).copy()
        if np.any(lo > hi):
            raise ArgumentError("输入下界不能大于上界")
        for name, indices in self.selectors.items():
            if any(not 0 <= i < A.shape[0] for i in indices):
                raise ArgumentError(f"输出选择器 {name} 越界: {indices}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "u_lo", lo)
        object.__setattr__(self, "u_hi", hi)
        object.__setattr__(self, "selectors", {k: tuple(v) for k, v in self.selectors.items()})

    @classmethod
    def double_integrator(cls, dim: int = 2, dt: float = 1.0, u_max: float = 1.0) -> "LinearSystem":
        """状态 (p, v), p⁺ = p + dt·v, v⁺ = v + dt·u"""
        eye = np.eye(dim)
        zero = np.zeros((dim, dim))
        A = np.block([[eye, dt * eye], [zero, eye]])
        B = np.vstack([zero, dt * eye])
        selectors = {"position": tuple(range(dim)), "velocity": tuple(range(dim, 2 * dim))}
        return cls(A, B, -u_max, u_max, selectors)

    @property
    def state_dim(self) -> int:
        return int(self.A.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.B.shape[1])

    def selector(self, name: Union[str, Sequence[int]]) -> Selector:
        if isinstance(name, str):
            if name not in self.selectors:
                raise ArgumentError(f"未定义的输出选择器: {name}")
            return self.selectors[name]
        return tuple(int(i) for i in name)

    def clip(self, inputs: np.ndarray) -> np.ndarray:
        return np.clip(inputs, self.u_lo, self.u_hi)

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(u, dtype=float)

    def rollout(self, x0: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        """
        Args:
            x0: 初始状态 (n,)
            inputs: (H, m) 输入序列

        Returns:
            np.ndarray: (H+1, n) 状态序列, 第 0 行为 x0
        """
        U = np.asarray(inputs, dtype=float).reshape(-1, self.input_dim)
        states = np.empty((U.shape[0] + 1, self.state_dim))
        states[0] = x0
        for k, u in enumerate(U):
            states[k + 1] = self.step(states[k], u)
        return states

    def prediction_matrices(self, horizon: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        堆叠预测矩阵: x_k = Φ[k-1] x0 + Γ[k-1] vec(U), k = 1..H

        Returns:
            (Φ, Γ): 形如 (H, n, n) 与 (H, n, H·m)
        """
        n, m = self.state_dim, self.input_dim
        phi = np.empty((horizon, n, n))
        gamma = np.zeros((horizon, n, horizon * m))
        power = np.eye(n)
        for k in range(horizon):
            power = self.A @ power
            phi[k] = power
            if k > 0:
                gamma[k, :, : k * m] = self.A @ gamma[k - 1, :, : k * m]
            gamma[k, :, k * m : (k + 1) * m] = self.B
        return phi, gamma


def _unit(diff: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        # 重合点处取任意单位方向作为次梯度
        out = np.zeros_like(diff)
        out[0] = 1.0
        return out
    return diff / norm


@dataclass(frozen=True)
class DistanceConstraint:
    """避碰: c = ‖x[S] - e‖ - d, 对 e 的 Lipschitz 常数为 1"""

    indices: Selector
    distance: float

    def __post_init__(self):
        if self.distance < 0:
            raise ArgumentError(f"安全距离不能为负: {self.distance}")
        object.__setattr__(self, "indices", tuple(self.indices))

    @property
    def lipschitz(self) -> float:
        return 1.0

    def max_attainable(self, e: np.ndarray) -> float:
        return math.inf

    def value(self, x: np.ndarray, e: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(x)[list(self.indices)] - e)) - self.distance

    def gradient_x(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        grad = np.zeros_like(np.asarray(x, dtype=float))
        grad[list(self.indices)] = _unit(np.asarray(x)[list(self.indices)] - e)
        return grad


@dataclass(frozen=True)
class ProximityConstraint:
    """到达: c = d - ‖x[S] - e‖, Lipschitz 常数为 1, 最大可达值为 d"""

    indices: Selector
    distance: float

    def __post_init__(self):
        if self.distance < 0:
            raise ArgumentError(f"到达精度不能为负: {self.distance}")
        object.__setattr__(self, "indices", tuple(self.indices))

    @property
    def lipschitz(self) -> float:
        return 1.0

    def max_attainable(self, e: np.ndarray) -> float:
        return self.distance

    def value(self, x: np.ndarray, e: np.ndarray) -> float:
        return self.distance - float(np.linalg.norm(np.asarray(x)[list(self.indices)] - e))

    def gradient_x(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        grad = np.zeros_like(np.asarray(x, dtype=float))
        grad[list(self.indices)] = -_unit(np.asarray(x)[list(self.indices)] - e)
        return grad


@dataclass(frozen=True, eq=False)
class AffineConstraint:
    """仿射: c = a_xᵀx + a_eᵀe + b, Lipschitz 常数为 ‖a_e‖"""

    a_x: np.ndarray
    a_e: np.ndarray
    b: float

    def __post_init__(self):
        a_x = np.array(self.a_x, dtype=float).reshape(-1)
        a_e = np.array(self.a_e, dtype=float).reshape(-1)
        a_x.setflags(write=False)
        a_e.setflags(write=False)
        object.__setattr__(self, "a_x", a_x)
        object.__setattr__(self, "a_e", a_e)

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.a_e))

    def max_attainable(self, e: np.ndarray) -> float:
        if np.any(self.a_x != 0.0):
            return math.inf
        return float(self.a_e @ np.asarray(e, dtype=float) + self.b)

    def value(self, x: np.ndarray, e: np.ndarray) -> float:
        return float(self.a_x @ np.asarray(x, dtype=float) + self.a_e @ np.asarray(e, dtype=float) + self.b)

    def gradient_x(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        return self.a_x.copy()


SafetyConstraint = Union[DistanceConstraint, ProximityConstraint, AffineConstraint]


@dataclass(frozen=True, eq=False)
class TimedConstraint:
    """
    时刻 time (相对求解起点, 1 起始) 上的收紧约束 c(x, ê) ≥ L·C

    radius 为 0 时退化为名义约束
    """

    time: int
    constraint: SafetyConstraint
    env_prediction: np.ndarray
    radius: float = 0.0
    label: Optional[str] = None

    def __post_init__(self):
        if self.time < 1:
            raise ArgumentError(f"约束时刻必须 ≥ 1: {self.time}")
        if not self.radius >= 0 or math.isnan(self.radius):
            raise ArgumentError(f"约束半径必须为非负有限值: {self.radius}")
        env = np.array(self.env_prediction, dtype=float).reshape(-1)
        env.setflags(write=False)
        object.__setattr__(self, "env_prediction", env)

    @property
    def requirement(self) -> float:
        """收紧量 L·C"""
        return self.constraint.lipschitz * self.radius

    def tightened(self, x: np.ndarray) -> float:
        """c(x, ê) - L·C, 非负即满足收紧约束"""
        return self.constraint.value(x, self.env_prediction) - self.requirement

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.constraint.gradient_x(x, self.env_prediction)


def tightening_sound(constraint: SafetyConstraint, x: np.ndarray, e_hat: np.ndarray, e: np.ndarray, radius: float) -> bool:
    """c(x, ê) ≥ L·C 且 ‖e - ê‖ ≤ C 时是否有 c(x, e) ≥ 0; 前提不成立时返回 True"""
    if np.linalg.norm(np.asarray(e) - e_hat) > radius:
        return True
    if constraint.value(x, e_hat) < constraint.lipschitz * radius:
        return True
    return constraint.value(x, e) >= -1e-12
