"""
收紧约束下的有限时域最优控制求解器

外点二次罚函数 (带乘子更新) + 盒约束上的投影梯度下降, 步长由 Armijo 回溯确定;
罚系数 μ 从 1e1 逐级放大到 1e8
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from cp_guard.control.system import AffineConstraint, DistanceConstraint, LinearSystem, TimedConstraint
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ArgumentError, InfeasibleError

logger = logging.getLogger("cp_guard.control.solver")

# 内部目标值比收紧约束再多留的余量
INTERNAL_MARGIN = 1e-6
MU_START = 1e1
MU_MAX = 1e8


@dataclass(frozen=True, eq=False)
class CostSpec:
    """J = w_u Σ‖u_k‖² + w_g ‖x_H[S] - goal‖²"""

    input_weight: float = 0.4
    goal_weight: float = 0.6
    goal: Optional[np.ndarray] = None
    goal_selector: Union[str, Tuple[int, ...]] = "position"

    def __post_init__(self):
        if self.input_weight < 0 or self.goal_weight < 0:
            raise ArgumentError("代价权重不能为负")
        if self.goal is not None:
            goal = np.array(self.goal, dtype=float).reshape(-1)
            goal.setflags(write=False)
            object.__setattr__(self, "goal", goal)


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """从 x0 出发、时域为 horizon 的一次求解"""

    system: LinearSystem
    x0: np.ndarray
    horizon: int
    constraints: Tuple[TimedConstraint, ...]
    cost: CostSpec = field(default_factory=CostSpec)

    def __post_init__(self):
        if self.horizon < 1:
            raise ArgumentError(f"求解时域必须 ≥ 1: {self.horizon}")
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.size != self.system.state_dim:
            raise ArgumentError(f"初始状态维数 {x0.size} 与系统维数 {self.system.state_dim} 不一致")
        for item in self.constraints:
            if item.time > self.horizon:
                raise ArgumentError(f"约束时刻 {item.time} 超出求解时域 {self.horizon}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "constraints", tuple(self.constraints))


@dataclass(frozen=True, eq=False)
class SolveResult:
    """
    求解结果

    tightened 为各约束的 c(x, ê) - L·C; status 为 optimal 或 soft (松弛变量生效)
    """

    inputs: np.ndarray
    states: np.ndarray
    cost: float
    tightened: np.ndarray
    slack: np.ndarray
    iterations: int
    status: str

    @property
    def max_violation(self) -> float:
        if self.tightened.size == 0:
            return 0.0
        return float(max(0.0, -self.tightened.min()))

    @property
    def soft(self) -> bool:
        return self.status == "soft"


class _CompiledConstraints:
    """按 (类型, 分量) 分组后向量化求值"""

    def __init__(self, constraints: Sequence[TimedConstraint], state_dim: int):
        self.count = len(constraints)
        self.times = np.array([c.time - 1 for c in constraints], dtype=int)
        self.requirement = np.array([c.requirement for c in constraints], dtype=float)
        self._norm_groups: Dict[Tuple[str, Tuple[int, ...]], List[int]] = {}
        affine: List[int] = []
        for i, item in enumerate(constraints):
            if isinstance(item.constraint, AffineConstraint):
                affine.append(i)
            else:
                sign = "distance" if isinstance(item.constraint, DistanceConstraint) else "proximity"
                self._norm_groups.setdefault((sign, item.constraint.indices), []).append(i)

        self._groups = []
        for (kind, indices), members in self._norm_groups.items():
            members_arr = np.array(members, dtype=int)
            env = np.stack([constraints[i].env_prediction for i in members])
            if env.shape[1] != len(indices):
                raise ArgumentError(f"环境预测维数 {env.shape[1]} 与约束分量数 {len(indices)} 不一致")
            dist = np.array([constraints[i].constraint.distance for i in members])
            self._groups.append((1.0 if kind == "distance" else -1.0, list(indices), members_arr, env, dist))

        self._affine_idx = np.array(affine, dtype=int)
        if affine:
            self._affine_ax = np.stack([constraints[i].constraint.a_x for i in affine])
            if self._affine_ax.shape[1] != state_dim:
                raise ArgumentError("仿射约束 a_x 维数与状态维数不一致")
            self._affine_const = np.array(
                [constraints[i].constraint.a_e @ constraints[i].env_prediction + constraints[i].constraint.b for i in affine]
            )

    def evaluate(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Args:
            states: (H, n) 为 x_1..x_H

        Returns:
            (values, grads): 收紧值 (N,) 与对各自时刻状态的梯度 (N, n)
        """
        values = np.empty(self.count)
        grads = np.zeros((self.count, states.shape[1]))
        for sign, indices, members, env, dist in self._groups:
            diff = states[self.times[members]][:, indices] - env
            norms = np.linalg.norm(diff, axis=1)
            safe = np.where(norms > 0.0, norms, 1.0)
            unit = diff / safe[:, None]
            unit[norms == 0.0] = 0.0
            unit[norms == 0.0, 0] = 1.0
            values[members] = sign * (norms - dist)
            block = np.zeros((members.size, states.shape[1]))
            block[:, indices] = sign * unit
            grads[members] = block
        if self._affine_idx.size:
            x = states[self.times[self._affine_idx]]
            values[self._affine_idx] = np.einsum("ij,ij->i", x, self._affine_ax) + self._affine_const
            grads[self._affine_idx] = self._affine_ax
        return values - self.requirement, grads


class PenaltySolver:
    """
    罚函数投影梯度求解器

    每次 solve 之间无状态; 热启动由调用方提供上一次的输入
    """

    def __init__(
        self,
        max_iter: Optional[int] = None,
        tol: Optional[float] = None,
        feasibility_tol: Optional[float] = None,
        slack_weight: float = 1e3,
    ):
        solver_config = Config.get_solver_config()
        self.max_iter = solver_config["max_iter"] if max_iter is None else int(max_iter)
        self.tol = solver_config["tol"] if tol is None else float(tol)
        self.feasibility_tol = solver_config["feasibility_tol"] if feasibility_tol is None else float(feasibility_tol)
        self.slack_weight = float(slack_weight)
        if self.max_iter < 1:
            raise ArgumentError(f"迭代预算必须为正整数: {self.max_iter}")

    def precheck(self, problem: ControlProblem) -> None:
        """
        收紧量超过约束可达上限时直接判为不可行

        Raises:
            InfeasibleError: 存在 L·C + 余量 > max c 的约束
        """
        for item in problem.constraints:
            attainable = item.constraint.max_attainable(item.env_prediction)
            if item.requirement + INTERNAL_MARGIN > attainable:
                raise InfeasibleError(
                    f"时刻 {item.time} 的收紧量 L·C={item.requirement:.6g} 不小于约束可达上限 {attainable:.6g}",
                    item.requirement - attainable,
                )

    def solve(
        self,
        problem: ControlProblem,
        warm_start: Optional[np.ndarray] = None,
        slack: bool = False,
    ) -> SolveResult:
        """
        求解收紧后的最优控制问题

        Args:
            problem: 求解问题
            warm_start: (H, m) 初始输入, 默认为零输入
            slack: 是否启用 L1 松弛变量

        Returns:
            SolveResult: 满足所有收紧约束 ≥ -feasibility_tol 的解 (slack 模式下可能为 soft)

        Raises:
            InfeasibleError: 非 slack 模式下预检查失败或迭代预算内未达到可行
        """
        if not slack:
            self.precheck(problem)

        system = problem.system
        H, m, n = problem.horizon, system.input_dim, system.state_dim
        phi, gamma = system.prediction_matrices(H)
        free = phi @ problem.x0  # (H, n)
        gamma_flat = gamma.reshape(H * n, H * m)
        compiled = _CompiledConstraints(problem.constraints, n)
        n_c = compiled.count

        cost = problem.cost
        goal_idx = list(system.selector(cost.goal_selector)) if cost.goal is not None else []
        if cost.goal is not None and len(goal_idx) != cost.goal.size:
            raise ArgumentError(f"目标维数 {cost.goal.size} 与选择器 {cost.goal_selector} 不一致")

        lo = np.tile(system.u_lo, H)
        hi = np.tile(system.u_hi, H)
        if warm_start is None:
            u = np.clip(np.zeros(H * m), lo, hi)
        else:
            u = np.clip(np.asarray(warm_start, dtype=float).reshape(-1), lo, hi)
            if u.size != H * m:
                raise ArgumentError(f"热启动输入长度 {u.size} 与 H·m = {H * m} 不一致")
        s = np.zeros(n_c) if slack else np.zeros(0)

        def states_of(u_vec: np.ndarray) -> np.ndarray:
            return free + (gamma_flat @ u_vec).reshape(H, n)

        def base_cost(u_vec: np.ndarray, X: np.ndarray) -> Tuple[float, np.ndarray]:
            value = cost.input_weight * float(u_vec @ u_vec)
            grad = 2.0 * cost.input_weight * u_vec
            if cost.goal is not None:
                err = X[-1, goal_idx] - cost.goal
                value += cost.goal_weight * float(err @ err)
                gx = np.zeros(n)
                gx[goal_idx] = 2.0 * cost.goal_weight * err
                grad = grad + gamma[-1].T @ gx
            return value, grad

        def lagrangian(u_vec, s_vec, lam, mu):
            X = states_of(u_vec)
            value, grad_u = base_cost(u_vec, X)
            grad_s = np.full(s_vec.size, self.slack_weight)
            value += self.slack_weight * float(s_vec.sum())
            if n_c:
                g, gx = compiled.evaluate(X)
                g = g - INTERNAL_MARGIN
                if slack:
                    g = g + s_vec
                active = np.maximum(0.0, lam - mu * g)
                value += float((active**2 - lam**2).sum()) / (2.0 * mu)
                weighted = np.zeros((H, n))
                np.add.at(weighted, compiled.times, active[:, None] * gx)
                grad_u = grad_u - np.einsum("knj,kn->j", gamma, weighted)
                if slack:
                    grad_s = grad_s - active
            return value, grad_u, grad_s

        def violation(u_vec, s_vec) -> float:
            if not n_c:
                return 0.0
            g, _ = compiled.evaluate(states_of(u_vec))
            g = g - INTERNAL_MARGIN
            if slack:
                g = g + s_vec
            return float(max(0.0, -g.min()))

        lam = np.zeros(n_c)
        mu = MU_START
        step = 1.0
        iterations = 0
        previous_violation = violation(u, s)
        stage_budget = max(50, self.max_iter // 8)

        while iterations < self.max_iter:
            stage_iters = 0
            value, grad_u, grad_s = lagrangian(u, s, lam, mu)
            while stage_iters < stage_budget and iterations < self.max_iter:
                step = min(step * 2.0, 1e6)
                for _ in range(60):
                    u_new = np.clip(u - step * grad_u, lo, hi)
                    s_new = np.maximum(s - step * grad_s, 0.0)
                    du, ds = u_new - u, s_new - s
                    new_value, new_grad_u, new_grad_s = lagrangian(u_new, s_new, lam, mu)
                    decrease = float(grad_u @ du + grad_s @ ds) + (float(du @ du) + float(ds @ ds)) / (2.0 * step)
                    if new_value <= value + decrease + 1e-15 * abs(value):
                        break
                    step *= 0.5
                moved = math.sqrt(float(du @ du) + float(ds @ ds))
                u, s, value, grad_u, grad_s = u_new, s_new, new_value, new_grad_u, new_grad_s
                iterations += 1
                stage_iters += 1
                if moved <= self.tol * (1.0 + math.sqrt(float(u @ u))):
                    break

            current = violation(u, s)
            if n_c:
                X = states_of(u)
                g, _ = compiled.evaluate(X)
                g = g - INTERNAL_MARGIN + (s if slack else 0.0)
                lam = np.maximum(0.0, lam - mu * g)
            if current <= INTERNAL_MARGIN and stage_iters < stage_budget:
                break
            if current > 0.25 * previous_violation and mu < MU_MAX:
                mu = min(mu * 10.0, MU_MAX)
            previous_violation = current

        inputs = u.reshape(H, m)
        states = system.rollout(problem.x0, inputs)
        tightened, _ = compiled.evaluate(states[1:]) if n_c else (np.zeros(0), None)
        final_cost, _ = base_cost(u, states[1:])
        worst = float(max(0.0, -tightened.min())) if n_c else 0.0

        if worst > self.feasibility_tol:
            if not slack:
                raise InfeasibleError(f"迭代 {iterations} 次后仍不可行", worst)
            logger.info(f"松弛求解: 最大收紧约束违反 {worst:.3e}, 松弛总量 {float(s.sum()):.3e}")
            status = "soft"
        else:
            status = "optimal"
        logger.debug(f"求解完成: H={H}, 约束数 {n_c}, 迭代 {iterations}, 代价 {final_cost:.6g}, μ={mu:.0e}")
        return SolveResult(inputs, states, final_cost + self.slack_weight * float(s.sum()), tightened, s, iterations, status)
