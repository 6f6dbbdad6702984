"""
开环规划与滚动时域控制

开环: t = 0 时以 H = T 求解一次, 约束半径取开环抽象 C_{τ|0}
闭环: 每个时刻重新求解并只执行第一个输入, 约束半径取单步抽象 C_{τ|τ-1}
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from cp_guard.abstraction.statistical import Abstraction, AbstractionMode
from cp_guard.control.solver import ControlProblem, CostSpec, PenaltySolver, SolveResult
from cp_guard.control.system import LinearSystem, SafetyConstraint, TimedConstraint
from cp_guard.predictors.models import PredictionBundle, PredictorModel, predict_openloop
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ArgumentError, CPGuardError, InfeasibleError

logger = logging.getLogger("cp_guard.control")

AgentRanges = Tuple[Tuple[int, int], ...]
EnvSampler = Callable[[np.random.Generator], np.ndarray]


class HorizonMode(str, Enum):
    RECEDING = "receding"
    SHRINKING = "shrinking"


@dataclass(frozen=True)
class StepLog:
    """单次求解的记录, status 为 optimal / soft / infeasible"""

    t: int
    horizon: int
    status: str
    iterations: int
    max_violation: float


@dataclass(frozen=True, eq=False)
class ControlEpisodeReport:
    """
    一次控制过程的结果

    constraint_values[t-1, a] = c(x_t, e_t) 对智能体 a 的取值, t = 1..T
    """

    inputs: np.ndarray
    states: np.ndarray
    environment: np.ndarray
    constraint_values: np.ndarray
    cost: float
    log: Tuple[StepLog, ...] = field(default=())

    @property
    def satisfied(self) -> bool:
        return bool(np.all(self.constraint_values >= 0.0))

    @property
    def soft_steps(self) -> int:
        return sum(1 for entry in self.log if entry.status == "soft")

    @property
    def infeasible_steps(self) -> int:
        return sum(1 for entry in self.log if entry.status == "infeasible")

    @property
    def always_feasible(self) -> bool:
        return all(entry.status == "optimal" for entry in self.log)

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "cost": self.cost,
            "min_constraint": float(self.constraint_values.min()) if self.constraint_values.size else None,
            "soft_steps": self.soft_steps,
            "infeasible_steps": self.infeasible_steps,
            "log": [entry.__dict__ for entry in self.log],
        }


@dataclass(frozen=True)
class SafetySummary:
    """
    多次控制过程的安全率

    unconditional 把含松弛或不可行步的过程计为不安全;
    given_feasible 只在每步都可行的过程中统计
    """

    episodes: int
    unconditional: float
    given_feasible: Optional[float]
    feasible_episodes: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize_episodes(reports: Sequence[ControlEpisodeReport]) -> SafetySummary:
    if not reports:
        raise ArgumentError("控制过程列表不能为空")
    safe = [r.satisfied and r.always_feasible for r in reports]
    feasible = [r for r in reports if r.always_feasible]
    given = None if not feasible else sum(r.satisfied for r in feasible) / len(feasible)
    return SafetySummary(len(reports), sum(safe) / len(reports), given, len(feasible))


def _ranges(agent_ranges: Optional[AgentRanges], env_dim: int) -> AgentRanges:
    if agent_ranges is None:
        return ((0, env_dim),)
    return tuple((int(lo), int(hi)) for lo, hi in agent_ranges)


def _check_abstraction(abstraction: Abstraction, mode: AbstractionMode) -> None:
    if abstraction.mode is not mode:
        raise ArgumentError(f"需要 {mode.value} 抽象, 实际为 {abstraction.mode.value}")
    if abstraction.is_infinite:
        raise ArgumentError("抽象半径为无穷, 无法收紧约束")


def constraint_values(
    constraint: SafetyConstraint,
    states: np.ndarray,
    environment: np.ndarray,
    agent_ranges: Optional[AgentRanges] = None,
) -> np.ndarray:
    """
    实际约束值 c(x_t, e_t), t = 1..T

    Returns:
        np.ndarray: (T, A)
    """
    ranges = _ranges(agent_ranges, environment.shape[1])
    T = states.shape[0] - 1
    out = np.empty((T, len(ranges)))
    for t in range(1, T + 1):
        for a, (lo, hi) in enumerate(ranges):
            out[t - 1, a] = constraint.value(states[t], environment[t, lo:hi])
    return out


def episode_cost(cost: CostSpec, system: LinearSystem, inputs: np.ndarray, states: np.ndarray) -> float:
    value = cost.input_weight * float(np.sum(inputs**2))
    if cost.goal is not None:
        err = states[-1, list(system.selector(cost.goal_selector))] - cost.goal
        value += cost.goal_weight * float(err @ err)
    return value


def tightened_constraints(
    constraint: SafetyConstraint,
    predictions: np.ndarray,
    radii: np.ndarray,
    agent_ranges: AgentRanges,
    offset: int = 0,
) -> List[TimedConstraint]:
    """
    逐时刻逐智能体的收紧约束

    Args:
        constraint: 安全约束
        predictions: (H, d_env) 环境预测, 第 k 行对应求解时域的第 k+1 步
        radii: (H, A) 半径
        agent_ranges: 智能体在环境状态中的分量区间
        offset: 绝对时刻与求解时域的偏移, 仅用于标签

    Returns:
        List[TimedConstraint]: H·A 个约束
    """
    items = []
    for k in range(predictions.shape[0]):
        for a, (lo, hi) in enumerate(agent_ranges):
            items.append(
                TimedConstraint(k + 1, constraint, predictions[k, lo:hi], float(radii[k, a]), f"τ={offset + k + 1},a={a}")
            )
    return items


def plan_open_loop(
    system: LinearSystem,
    x0: np.ndarray,
    constraint: SafetyConstraint,
    abstraction: Abstraction,
    predictions,
    cost: CostSpec,
    T: int,
    agent_ranges: Optional[AgentRanges] = None,
    extra_constraints: Sequence[TimedConstraint] = (),
    solver: Optional[PenaltySolver] = None,
    slack: bool = False,
) -> SolveResult:
    """
    开环规划: t = 0, H = T, 约束 c(x_τ, ê_{τ|0}) ≥ L·C_{τ|0}

    Args:
        system: 线性系统
        x0: 初始状态
        constraint: 安全约束
        abstraction: 基准时刻为 0 的开环抽象
        predictions: (T, d_env) 预测 ê_{1|0}..ê_{T|0} 或 PredictionBundle
        cost: 代价
        T: 任务时域
        agent_ranges: 多智能体时各自的分量区间
        extra_constraints: 附加约束 (例如终端约束)
        solver: 求解器, 默认按 Config 构造
        slack: 是否启用松弛

    Returns:
        SolveResult: 带可行性证书的输入序列

    Raises:
        InfeasibleError: 迭代预算内不可行
    """
    _check_abstraction(abstraction, AbstractionMode.OPEN_LOOP)
    if abstraction.base_time != 0:
        raise ArgumentError(f"开环规划需要基准时刻为 0 的抽象, 实际为 {abstraction.base_time}")
    pred = predictions.predictions if isinstance(predictions, PredictionBundle) else np.asarray(predictions, dtype=float)
    if pred.ndim == 1:
        pred = pred[:, None]
    if pred.shape[0] < T:
        raise ArgumentError(f"预测只有 {pred.shape[0]} 步, 少于任务时域 {T}")
    ranges = _ranges(agent_ranges, pred.shape[1])
    radii = np.array([[abstraction.radius(tau, a) for a in range(len(ranges))] for tau in range(1, T + 1)])

    items = tightened_constraints(constraint, pred[:T], radii, ranges) + list(extra_constraints)
    problem = ControlProblem(system, x0, T, tuple(items), cost)
    result = (solver or PenaltySolver()).solve(problem, slack=slack)
    logger.info(f"开环规划完成: T={T}, 约束数 {len(items)}, 代价 {result.cost:.6g}, 状态 {result.status}")
    return result


def execute_plan(
    system: LinearSystem,
    x0: np.ndarray,
    result: SolveResult,
    environment: np.ndarray,
    constraint: SafetyConstraint,
    cost: CostSpec,
    agent_ranges: Optional[AgentRanges] = None,
) -> ControlEpisodeReport:
    """在实际环境轨迹上执行开环输入"""
    states = system.rollout(x0, result.inputs)
    env = np.asarray(environment, dtype=float)
    values = constraint_values(constraint, states, env[: states.shape[0]], agent_ranges)
    log = (StepLog(0, result.inputs.shape[0], result.status, result.iterations, result.max_violation),)
    return ControlEpisodeReport(
        result.inputs, states, env, values, episode_cost(cost, system, result.inputs, states), log
    )


def _shifted(previous: Optional[np.ndarray], horizon: int, system: LinearSystem) -> np.ndarray:
    """上一次计划左移一步并按新时域截断或用末输入延长"""
    if previous is None or previous.shape[0] <= 1:
        return np.zeros((horizon, system.input_dim))
    tail = previous[1:]
    if tail.shape[0] >= horizon:
        return tail[:horizon].copy()
    return np.vstack([tail, np.repeat(tail[-1:], horizon - tail.shape[0], axis=0)])


def _sample_environment(env_sampler: EnvSampler, generator: np.random.Generator, T: int) -> np.ndarray:
    try:
        env = np.asarray(env_sampler(generator), dtype=float)
    except CPGuardError:
        raise
    except Exception as e:
        raise CPGuardError(f"环境采样失败: {e}") from e
    if env.ndim == 1:
        env = env[:, None]
    if env.shape[0] < T + 1:
        raise ArgumentError(f"环境轨迹长度 {env.shape[0]} 小于 T+1 = {T + 1}")
    return env[: T + 1]


def control_episode_closed_loop(
    system: LinearSystem,
    x0: np.ndarray,
    constraint: SafetyConstraint,
    abstraction: Abstraction,
    model: PredictorModel,
    env_sampler: EnvSampler,
    cost: CostSpec,
    T: int,
    H: int,
    mode: HorizonMode,
    generator: np.random.Generator,
    agent_ranges: Optional[AgentRanges] = None,
    solver: Optional[PenaltySolver] = None,
    slack: Optional[bool] = None,
) -> ControlEpisodeReport:
    """
    滚动时域控制过程

    每个时刻 t 由 e_0..e_t 预测 ê_{τ|t}, 对 τ = t+1..t+H 施加
    c(x_{τ|t}, ê_{τ|t}) ≥ L·C_{τ|τ-1}, 只执行 u_{t|t}

    不可行时: 启用松弛则改用松弛求解并记为 soft; 否则执行上一次计划左移后的输入,
    记为 infeasible

    Args:
        system: 线性系统
        x0: 初始状态
        constraint: 安全约束
        abstraction: 闭环 (单步) 抽象, 覆盖 τ = 1..T
        model: 环境预测器
        env_sampler: env_sampler(generator) 返回 (≥T+1, d_env) 的环境轨迹
        cost: 代价
        T: 任务时域
        H: 预测时域 (shrinking 模式下忽略, 取 T - t)
        mode: receding 或 shrinking
        generator: 随机数生成器
        agent_ranges: 多智能体分量区间
        solver: 求解器
        slack: 是否启用松弛, 默认取 Config.SLACK_FALLBACK

    Returns:
        ControlEpisodeReport: 控制过程结果
    """
    _check_abstraction(abstraction, AbstractionMode.CLOSED_LOOP)
    mode = HorizonMode(mode)
    if H < 1:
        raise ArgumentError(f"预测时域必须 ≥ 1: {H}")
    if T < 1:
        raise ArgumentError(f"任务时域必须 ≥ 1: {T}")
    solver = solver or PenaltySolver()
    slack = Config.SLACK_FALLBACK if slack is None else slack

    env = _sample_environment(env_sampler, generator, T)
    ranges = _ranges(agent_ranges, env.shape[1])
    radii_all = np.array([[abstraction.radius(tau, a) for a in range(len(ranges))] for tau in range(1, T + 1)])

    x = np.asarray(x0, dtype=float).reshape(-1)
    states = [x]
    inputs = []
    log: List[StepLog] = []
    plan: Optional[np.ndarray] = None

    for t in range(T):
        horizon = T - t if mode is HorizonMode.SHRINKING else min(H, T - t)
        predictions = predict_openloop(model, env[: t + 1], t + horizon, pad=True).predictions
        items = tightened_constraints(constraint, predictions, radii_all[t : t + horizon], ranges, offset=t)
        problem = ControlProblem(system, x, horizon, tuple(items), cost)
        warm = _shifted(plan, horizon, system)

        try:
            result = solver.solve(problem, warm_start=warm)
            plan = result.inputs
            log.append(StepLog(t, horizon, result.status, result.iterations, result.max_violation))
        except InfeasibleError as e:
            if slack:
                result = solver.solve(problem, warm_start=warm, slack=True)
                plan = result.inputs
                log.append(StepLog(t, horizon, "soft", result.iterations, result.max_violation))
                logger.info(f"t={t} 收紧约束不可行, 使用松弛解: 违反量 {result.max_violation:.3e}")
            else:
                plan = warm
                log.append(StepLog(t, horizon, "infeasible", 0, e.max_violation))
                logger.warning(f"t={t} 收紧约束不可行, 沿用上一次计划: {e}")

        u = system.clip(plan[0])
        inputs.append(u)
        x = system.step(x, u)
        states.append(x)

    inputs_arr = np.array(inputs)
    states_arr = np.array(states)
    values = constraint_values(constraint, states_arr, env, ranges)
    report = ControlEpisodeReport(
        inputs_arr, states_arr, env, values, episode_cost(cost, system, inputs_arr, states_arr), tuple(log)
    )
    logger.debug(
        f"闭环控制完成 ({mode.value}): 满足={report.satisfied}, 松弛步 {report.soft_steps}, "
        f"不可行步 {report.infeasible_steps}"
    )
    return report
