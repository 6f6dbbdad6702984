"""
控制模块

线性系统上的收紧约束规划、滚动时域控制与传感器校准导航
"""

from .navigation import (
    NavigationTask,
    calibrate_sensors,
    plan_sensor_navigation,
    sensor_scores,
    waypoint_errors,
    waypoints_reached,
)
from .planner import (
    ControlEpisodeReport,
    HorizonMode,
    SafetySummary,
    StepLog,
    constraint_values,
    control_episode_closed_loop,
    episode_cost,
    execute_plan,
    plan_open_loop,
    summarize_episodes,
    tightened_constraints,
)
from .solver import ControlProblem, CostSpec, PenaltySolver, SolveResult
from .system import (
    AffineConstraint,
    DistanceConstraint,
    LinearSystem,
    ProximityConstraint,
    SafetyConstraint,
    TimedConstraint,
    tightening_sound,
)

__all__ = [
    "AffineConstraint",
    "ControlEpisodeReport",
    "ControlProblem",
    "CostSpec",
    "DistanceConstraint",
    "HorizonMode",
    "LinearSystem",
    "NavigationTask",
    "PenaltySolver",
    "ProximityConstraint",
    "SafetyConstraint",
    "SafetySummary",
    "SolveResult",
    "StepLog",
    "TimedConstraint",
    "calibrate_sensors",
    "constraint_values",
    "control_episode_closed_loop",
    "episode_cost",
    "execute_plan",
    "plan_open_loop",
    "plan_sensor_navigation",
    "sensor_scores",
    "summarize_episodes",
    "tightened_constraints",
    "tightening_sound",
    "waypoint_errors",
    "waypoints_reached",
]
