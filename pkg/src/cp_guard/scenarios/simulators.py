"""
案例仿真器

每个场景给定随机数生成器即可批量采样 i.i.d. 轨迹 (K, T+1, n);
数据集划分由 RandomStreams 的不相交命名子流保证
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import ClassVar, Dict, Optional, Tuple, Union

import numpy as np

from cp_guard.data.dataset import Split, TrajectoryDataset
from cp_guard.utils.errors import ArgumentError
from cp_guard.utils.rng import RandomStreams, laplace, truncated_normal, uniform_box

logger = logging.getLogger("cp_guard.scenarios")


class Scenario(ABC):
    """场景基类"""

    name: ClassVar[str] = "scenario"

    @property
    @abstractmethod
    def T(self) -> int:
        """终止时刻"""

    @property
    def agents(self) -> Optional[Tuple[Tuple[int, int], ...]]:
        return None

    @abstractmethod
    def sample(self, gen: np.random.Generator, K: int) -> np.ndarray:
        """采样 K 条轨迹, 形如 (K, T+1, n)"""

    def simulate(self, gen: np.random.Generator) -> np.ndarray:
        return self.sample(gen, 1)[0]


@dataclass(frozen=True)
class SensorNavigation(Scenario):
    """
    未知位置 r_l 与拉普拉斯传感器 s_l ~ L(r_l, b)

    每个样本存为长度 1 的轨迹, 状态为 [r_1, r_2, s_1, s_2]
    """

    name: ClassVar[str] = "sensor-navigation"

    regions: Tuple[Tuple[Tuple[float, float], Tuple[float, float]], ...] = (
        ((1.5, 0.5), (2.5, 1.0)),
        ((2.5, 4.0), (3.5, 4.5)),
    )
    sensor_scale: float = 0.025

    @property
    def T(self) -> int:
        return 0

    def sample_locations(self, gen: np.random.Generator, K: int) -> np.ndarray:
        """(K, n_l, 2) 真实位置"""
        return np.stack([uniform_box(gen, lo, hi, K) for lo, hi in self.regions], axis=1)

    def sample_readings(self, gen: np.random.Generator, locations: np.ndarray) -> np.ndarray:
        return laplace(gen, locations, self.sensor_scale, size=locations.shape)

    def sample(self, gen: np.random.Generator, K: int) -> np.ndarray:
        locations = self.sample_locations(gen, K)
        readings = self.sample_readings(gen, locations)
        return np.concatenate([locations.reshape(K, -1), readings.reshape(K, -1)], axis=1)[:, None, :]

    def unpack(self, samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """把 sample 的结果拆为 (读数, 位置), 均为 (K, n_l, 2)"""
        flat = np.asarray(samples, dtype=float).reshape(samples.shape[0], -1)
        half = flat.shape[1] // 2
        n_l = len(self.regions)
        return flat[:, half:].reshape(-1, n_l, 2), flat[:, :half].reshape(-1, n_l, 2)


@dataclass(frozen=True)
class NoisyUnicycle(Scenario):
    """
    恒定航向与速度的独轮车, 位置带加性高斯噪声

    初始状态 (pˣ, pʸ, θ, v): 位置 ~ U([0,1))², θ ~ N(0, σ_θ²), v ~ TN(1, σ_v², [0, 2])
    """

    name: ClassVar[str] = "noisy-unicycle"

    steps: int = 10
    dt: float = 1.3
    heading_std: float = 0.05
    speed_std: float = 0.05
    position_noise: float = 0.01

    @property
    def T(self) -> int:
        return self.steps

    def sample_inputs(self, gen: np.random.Generator, K: int) -> np.ndarray:
        position = uniform_box(gen, (0.0, 0.0), (1.0, 1.0), K)
        heading = gen.normal(0.0, self.heading_std, size=K)
        speed = truncated_normal(gen, 1.0, self.speed_std, 0.0, 2.0, K)
        return np.column_stack([position, heading, speed])

    def rollout(self, gen: np.random.Generator, inputs: np.ndarray) -> np.ndarray:
        """(K, 4) 初始状态 → (K, steps+1, 4) 状态轨迹"""
        u = np.asarray(inputs, dtype=float)
        K = u.shape[0]
        out = np.empty((K, self.steps + 1, 4))
        out[:, 0] = u
        velocity = self.dt * u[:, 3:4] * np.column_stack([np.cos(u[:, 2]), np.sin(u[:, 2])])
        for t in range(self.steps):
            out[:, t + 1, :2] = out[:, t, :2] + velocity + gen.normal(0.0, self.position_noise, size=(K, 2))
            out[:, t + 1, 2:] = u[:, 2:]
        return out

    def final_positions(self, gen: np.random.Generator, inputs: np.ndarray) -> np.ndarray:
        return self.rollout(gen, inputs)[:, -1, :2]

    def sample(self, gen: np.random.Generator, K: int) -> np.ndarray:
        return self.rollout(gen, self.sample_inputs(gen, K))


def unicycle_features(inputs: np.ndarray) -> np.ndarray:
    """回归特征 [1, pˣ, pʸ, v cosθ, v sinθ]"""
    u = np.asarray(inputs, dtype=float)
    return np.column_stack([np.ones(u.shape[0]), u[:, 0], u[:, 1], u[:, 3] * np.cos(u[:, 2]), u[:, 3] * np.sin(u[:, 2])])


def unicycle_safe_set(p: np.ndarray, center=(13.5, 0.5), radius: float = 3.0) -> np.ndarray:
    """h_out(p) = ‖p - center‖² - radius², 非正即在安全集内"""
    arr = np.asarray(p, dtype=float)
    return np.sum((arr - np.asarray(center)) ** 2, axis=-1) - radius**2


@dataclass(frozen=True)
class DoubleIntegrator(Scenario):
    """
    线性反馈下的 (随机) 双积分器

    u = clip(-k_p p - k_v v, ±u_max), 过程噪声标准差为 0 时轨迹只由初值决定
    """

    name: ClassVar[str] = "double-integrator"

    dim: int = 1
    dt: float = 0.1
    horizon: int = 50
    k_p: float = 1.0
    k_v: float = 1.5
    u_max: float = 1.0
    initial_position: Tuple[float, float] = (-1.0, 1.0)
    initial_velocity: Tuple[float, float] = (-0.5, 0.5)
    process_noise: float = 0.0

    @property
    def T(self) -> int:
        return self.horizon

    def sample(self, gen: np.random.Generator, K: int) -> np.ndarray:
        d = self.dim
        lo = [self.initial_position[0]] * d + [self.initial_velocity[0]] * d
        hi = [self.initial_position[1]] * d + [self.initial_velocity[1]] * d
        x = uniform_box(gen, lo, hi, K)
        out = np.empty((K, self.horizon + 1, 2 * d))
        out[:, 0] = x
        for t in range(self.horizon):
            p, v = x[:, :d], x[:, d:]
            u = np.clip(-self.k_p * p - self.k_v * v, -self.u_max, self.u_max)
            x = np.concatenate([p + self.dt * v, v + self.dt * u], axis=1)
            if self.process_noise > 0:
                x = x + gen.normal(0.0, self.process_noise, size=x.shape)
            out[:, t + 1] = x
        return out


@dataclass(frozen=True)
class PedestrianWalkers(Scenario):
    """
    多个行人朝目标点行走, 速度带噪声, 每步以 switch_prob 概率更换目标

    状态为各行人的平面位置拼接 (observe_velocity=True 时每人为 (p, v) 四维),
    目标切换使多步预测误差呈长尾; start_region / goal_region 为空时在整个场地内均匀采样
    """

    name: ClassVar[str] = "pedestrian-walkers"

    n_agents: int = 3
    horizon: int = 21
    dt: float = 0.4
    speed: float = 1.2
    relaxation: float = 0.5
    velocity_noise: float = 0.05
    switch_prob: float = 0.05
    arena: float = 10.0
    start_region: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    goal_region: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    observe_velocity: bool = False

    @property
    def T(self) -> int:
        return self.horizon

    @property
    def block(self) -> int:
        return 4 if self.observe_velocity else 2

    @property
    def agents(self) -> Tuple[Tuple[int, int], ...]:
        b = self.block
        return tuple((b * a, b * a + b) for a in range(self.n_agents))

    @property
    def position_ranges(self) -> Tuple[Tuple[int, int], ...]:
        """各行人位置分量在状态中的区间"""
        return tuple((lo, lo + 2) for lo, _ in self.agents)

    def _region(self, gen: np.random.Generator, region, shape) -> np.ndarray:
        if region is None:
            return gen.uniform(0.0, self.arena, size=shape + (2,))
        lo, hi = region
        return uniform_box(gen, lo, hi, int(np.prod(shape))).reshape(shape + (2,))

    def _desired(self, position: np.ndarray, goal: np.ndarray) -> np.ndarray:
        heading = goal - position
        norm = np.linalg.norm(heading, axis=-1, keepdims=True)
        return self.speed * heading / np.maximum(norm, 1e-9) * np.minimum(norm, 1.0)

    def _state(self, position: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        K = position.shape[0]
        if not self.observe_velocity:
            return position.reshape(K, -1)
        return np.concatenate([position, velocity], axis=-1).reshape(K, -1)

    def sample(self, gen: np.random.Generator, K: int) -> np.ndarray:
        A = self.n_agents
        position = self._region(gen, self.start_region, (K, A))
        goal = self._region(gen, self.goal_region, (K, A))
        velocity = self._desired(position, goal)
        out = np.empty((K, self.horizon + 1, self.block * A))
        out[:, 0] = self._state(position, velocity)
        for t in range(self.horizon):
            switch = gen.random((K, A)) < self.switch_prob
            fresh = gen.uniform(0.0, self.arena, size=(K, A, 2))
            goal = np.where(switch[..., None], fresh, goal)
            velocity = velocity + self.relaxation * (self._desired(position, goal) - velocity)
            velocity = velocity + gen.normal(0.0, self.velocity_noise, size=velocity.shape)
            position = position + self.dt * velocity
            out[:, t + 1] = self._state(position, velocity)
        return out


# 经典参数
_GRAVITY = 9.8
_MASS_CART = 1.0
_MASS_POLE = 0.1
_HALF_LENGTH = 0.5
_FORCE = 10.0

STABILIZING_GAINS = (0.03, 0.07, 1.0, 0.23)
DESTABILIZED_GAINS = (0.0, 0.0, -1.0, -0.23)


def cartpole_step(states: np.ndarray, force: np.ndarray, dt: float = 0.02) -> np.ndarray:
    """
    倒立摆小车的一步显式欧拉积分

    Args:
        states: (..., 4) 状态 (p, v, θ, ω)
        force: (...) 施加在小车上的力
        dt: 步长

    Returns:
        np.ndarray: 下一时刻状态
    """
    p, v, theta, omega = np.moveaxis(np.asarray(states, dtype=float), -1, 0)
    total = _MASS_CART + _MASS_POLE
    pole_ml = _MASS_POLE * _HALF_LENGTH
    cos, sin = np.cos(theta), np.sin(theta)
    temp = (force + pole_ml * omega**2 * sin) / total
    theta_acc = (_GRAVITY * sin - cos * temp) / (_HALF_LENGTH * (4.0 / 3.0 - _MASS_POLE * cos**2 / total))
    p_acc = temp - pole_ml * theta_acc * cos / total
    return np.stack([p + dt * v, v + dt * p_acc, theta + dt * omega, omega + dt * theta_acc], axis=-1)


@dataclass(frozen=True)
class CartPole(Scenario):
    """
    倒立摆小车, 线性切换面的 bang-bang 控制器

    F = +10 当 k·z > 0, 否则 -10; 初始状态 ~ U((-0.05, 0.05)⁴)
    """

    name: ClassVar[str] = "cartpole"

    gains: Tuple[float, float, float, float] = STABILIZING_GAINS
    horizon: int = 228
    dt: float = 0.02
    initial_bound: float = 0.05

    @property
    def T(self) -> int:
        return self.horizon

    def controller(self, states: np.ndarray) -> np.ndarray:
        return np.where(states @ np.asarray(self.gains) > 0.0, _FORCE, -_FORCE)

    def sample(self, gen: np.random.Generator, K: int) -> np.ndarray:
        b = self.initial_bound
        z = uniform_box(gen, [-b] * 4, [b] * 4, K)
        out = np.empty((K, self.horizon + 1, 4))
        out[:, 0] = z
        for t in range(self.horizon):
            z = cartpole_step(z, self.controller(z), self.dt)
            out[:, t + 1] = z
        return out


@dataclass(frozen=True)
class AircraftSurrogate(Scenario):
    """
    俯冲拉起的高度/速度代理过程

    内部状态含垂直速度 w: 低空时附加与高度缺口平方成正比的下沉加速度;
    输出为 (高度, 速度)。shifted=True 时使用偏移后的初值分布
    """

    name: ClassVar[str] = "aircraft-surrogate"

    horizon: int = 150
    dt: float = 0.2
    altitude: Tuple[float, float] = (1000.0, 10.0)
    speed: Tuple[float, float] = (650.0, 5.0)
    shifted_altitude: Tuple[float, float] = (998.0, 10.0)
    shifted_speed: Tuple[float, float] = (651.0, 5.0)
    shifted: bool = False
    dive_slope: float = 0.0923
    pull_up: float = 2.73
    sink_gain: float = 7e-6
    sink_floor: float = 600.0
    vertical_noise: float = 0.3
    speed_noise: float = 0.2

    @property
    def T(self) -> int:
        return self.horizon

    def initial_law(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        if self.shifted:
            return self.shifted_altitude, self.shifted_speed
        return self.altitude, self.speed

    def sample(self, gen: np.random.Generator, K: int) -> np.ndarray:
        (h_mean, h_std), (s_mean, s_std) = self.initial_law()
        h = gen.normal(h_mean, h_std, size=K)
        s = gen.normal(s_mean, s_std, size=K)
        w = -self.dive_slope * s
        out = np.empty((K, self.horizon + 1, 2))
        out[:, 0, 0], out[:, 0, 1] = h, s
        noise_scale = math.sqrt(self.dt)
        for t in range(self.horizon):
            sink = self.sink_gain * np.maximum(self.sink_floor - h, 0.0) ** 2
            h = h + self.dt * w
            s = s + self.dt * (-0.05 * w - 0.1 * (s - 650.0)) + self.speed_noise * noise_scale * gen.normal(size=K)
            w = w + self.dt * (self.pull_up - sink) + self.vertical_noise * noise_scale * gen.normal(size=K)
            out[:, t + 1, 0], out[:, t + 1, 1] = h, s
        return out

    def with_shift(self, shifted: bool = True) -> "AircraftSurrogate":
        return replace(self, shifted=shifted)


AIRCRAFT_SPEC = "G[0,150] (h >= 100 and (h < 300 => s <= 650))"
CARTPOLE_SPEC = "G[0,228] (theta <= 0.2 and theta >= -0.2 and p <= 4.5 and p >= -4.5)"

SCENARIOS: Dict[str, type] = {
    cls.name: cls
    for cls in (SensorNavigation, NoisyUnicycle, DoubleIntegrator, PedestrianWalkers, CartPole, AircraftSurrogate)
}


def build_scenario(name: str, params: Optional[dict] = None) -> Scenario:
    """按名称与参数构造场景"""
    if name not in SCENARIOS:
        raise ArgumentError(f"未知场景: {name}, 可选 {sorted(SCENARIOS)}")
    params = dict(params or {})
    for key, value in list(params.items()):
        if isinstance(value, list):
            params[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
    try:
        return SCENARIOS[name](**params)
    except TypeError as e:
        raise ArgumentError(f"场景 {name} 参数无效: {e}") from e


def _streams(seed: Union[int, RandomStreams]) -> RandomStreams:
    return seed if isinstance(seed, RandomStreams) else RandomStreams(int(seed))


def simulate(scenario: Scenario, seed: Union[int, RandomStreams]) -> np.ndarray:
    """由种子确定的单条轨迹"""
    return scenario.simulate(_streams(seed).child(scenario.name).generator("simulate"))


def sample_dataset(
    scenario: Scenario,
    K: int,
    seed: Union[int, RandomStreams],
    split: Split = Split.CALIBRATE,
    agents: bool = True,
) -> TrajectoryDataset:
    """
    采样一个带划分标签的数据集

    不同 split 使用 (seed, 场景名, split) 决定的不相交子流; seed 也可以是
    某次重复实验的子流源

    Args:
        scenario: 场景
        K: 轨迹数
        seed: 整数种子或 RandomStreams
        split: 划分标签
        agents: 是否带上场景的多智能体划分, 否则整个状态视为一个智能体

    Returns:
        TrajectoryDataset: (K, T+1, n)
    """
    if K < 1:
        raise ArgumentError(f"K 必须为正整数: {K}")
    split = Split(split)
    gen = _streams(seed).child(scenario.name).generator(split.value)
    trajectories = scenario.sample(gen, K)
    logger.debug(f"采样完成: {scenario.name}, split={split.value}, 形状 {trajectories.shape}")
    return TrajectoryDataset(trajectories, split, scenario.agents if agents else None)


def sample_splits(
    scenario: Scenario, sizes: Dict[Split, int], seed: Union[int, RandomStreams], agents: bool = True
) -> Dict[Split, TrajectoryDataset]:
    return {Split(split): sample_dataset(scenario, K, seed, split, agents) for split, K in sizes.items() if K > 0}
