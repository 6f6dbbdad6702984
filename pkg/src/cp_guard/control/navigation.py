"""
传感器校准的航点导航

机器人须在指定时刻到达两个未知位置附近, 位置只能通过带噪传感器读数 s_l 获知;
校准得到 ‖s_l - r_l‖ ≤ C 后, 规划约束 ‖p_τ - s_l‖ ≤ ε - C 经三角不等式保证
‖p_τ - r_l‖ ≤ ε
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from cp_guard.control.solver import ControlProblem, CostSpec, PenaltySolver, SolveResult
from cp_guard.control.system import LinearSystem, ProximityConstraint, TimedConstraint
from cp_guard.core.quantile import QuantileResult, conformal_quantile
from cp_guard.utils.errors import ArgumentError, InfeasibleError

logger = logging.getLogger("cp_guard.control.navigation")


@dataclass(frozen=True)
class NavigationTask:
    """航点时刻、精度与终点要求"""

    waypoint_times: Tuple[int, ...] = (5, 15)
    epsilon: float = 0.6
    goal: Tuple[float, ...] = (5.0, 5.0)
    goal_tolerance: float = 0.2
    T: int = 20
    input_weight: float = 0.4
    goal_weight: float = 0.6

    def __post_init__(self):
        if any(not 1 <= t <= self.T for t in self.waypoint_times):
            raise ArgumentError(f"航点时刻必须位于 [1, {self.T}]: {self.waypoint_times}")
        if self.epsilon <= 0 or self.goal_tolerance < 0:
            raise ArgumentError("到达精度必须为正")

    def cost(self) -> CostSpec:
        return CostSpec(self.input_weight, self.goal_weight, np.array(self.goal))


def sensor_scores(readings: np.ndarray, locations: np.ndarray) -> np.ndarray:
    """
    R⁽ⁱ⁾ = max_l ‖s_l⁽ⁱ⁾ - r_l⁽ⁱ⁾‖

    Args:
        readings: (K, n_l, d) 传感器读数
        locations: (K, n_l, d) 真实位置

    Returns:
        np.ndarray: (K,)
    """
    s = np.asarray(readings, dtype=float)
    r = np.asarray(locations, dtype=float)
    if s.shape != r.shape or s.ndim != 3:
        raise ArgumentError(f"读数与位置形状应同为 (K, n_l, d): {s.shape} 与 {r.shape}")
    return np.linalg.norm(s - r, axis=-1).max(axis=1)


def calibrate_sensors(readings: np.ndarray, locations: np.ndarray, delta: float) -> QuantileResult:
    """传感器误差的保形上界 C"""
    result = conformal_quantile(sensor_scores(readings, locations), delta)
    logger.info(f"传感器校准完成: K={result.K}, C={result.as_float():.6f}")
    return result


def plan_sensor_navigation(
    system: LinearSystem,
    x0: np.ndarray,
    readings: np.ndarray,
    radius: float,
    task: NavigationTask = NavigationTask(),
    solver: Optional[PenaltySolver] = None,
) -> SolveResult:
    """
    规划经过航点并到达终点的输入序列

    Args:
        system: 线性系统 (需定义 position 选择器)
        x0: 初始状态
        readings: (n_l, d) 测试时的传感器读数, 与 waypoint_times 一一对应
        radius: 传感器校准得到的 C
        task: 导航任务
        solver: 求解器

    Returns:
        SolveResult: 满足 ‖p_τ - s_l‖ ≤ ε - C 与 ‖p_T - goal‖ ≤ 精度 的解

    Raises:
        InfeasibleError: C ≥ ε, 或迭代预算内不可行
    """
    s = np.asarray(readings, dtype=float)
    if s.shape[0] != len(task.waypoint_times):
        raise ArgumentError(f"读数个数 {s.shape[0]} 与航点个数 {len(task.waypoint_times)} 不一致")
    if radius >= task.epsilon:
        raise InfeasibleError(f"传感器误差上界 C={radius:.6g} 不小于精度 ε={task.epsilon}", radius - task.epsilon)

    position = system.selector("position")
    reach = ProximityConstraint(position, task.epsilon)
    items = [TimedConstraint(t, reach, s[l], radius, f"waypoint{l + 1}") for l, t in enumerate(task.waypoint_times)]
    terminal = ProximityConstraint(position, task.goal_tolerance)
    items.append(TimedConstraint(task.T, terminal, np.array(task.goal), 0.0, "goal"))

    problem = ControlProblem(system, x0, task.T, tuple(items), task.cost())
    result = (solver or PenaltySolver()).solve(problem)
    logger.info(f"导航规划完成: C={radius:.4f}, 代价 {result.cost:.6g}, 迭代 {result.iterations}")
    return result


def waypoint_errors(states: np.ndarray, locations: np.ndarray, task: NavigationTask, system: LinearSystem) -> np.ndarray:
    """各航点时刻的 ‖p_τ - r_l‖"""
    position = list(system.selector("position"))
    r = np.asarray(locations, dtype=float)
    return np.array([np.linalg.norm(states[t, position] - r[l]) for l, t in enumerate(task.waypoint_times)])


def waypoints_reached(
    states: np.ndarray, locations: Sequence, task: NavigationTask, system: LinearSystem
) -> bool:
    """max_l ‖p_{τ_l} - r_l‖ ≤ ε"""
    return bool(waypoint_errors(states, np.asarray(locations), task, system).max() <= task.epsilon)
