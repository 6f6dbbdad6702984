"""
STL 语义

- horizon: 判定公式所需的轨迹长度 - 1
- boolean_sat: 逐点递归的布尔语义
- robustness_signal / robustness: 定量语义 (min/max 递归), True 的鲁棒度为 TRUE_ROBUSTNESS 标记 (+inf)
- to_negation_normal_form: 把否定下推并吸收进原子谓词, 鲁棒度严格不变
- worst_case_robustness: 已观测时刻用真实状态, 未来时刻取预测球上的最坏值
"""

import logging
import math
from typing import Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from cp_guard.stl.formula import (
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Implies,
    Not,
    Or,
    Predicate,
    Release,
    TrueFormula,
    Until,
    walk,
)
from cp_guard.utils.errors import ArgumentError, TraceTooShortError

logger = logging.getLogger("cp_guard.stl.semantics")

# True 与 ¬True 的鲁棒度标记, 只经 min/max 与取负传播
TRUE_ROBUSTNESS = math.inf
FALSE_ROBUSTNESS = -math.inf

AtomFn = Callable[[Predicate, np.ndarray], np.ndarray]


def _evaluate_atom(predicate: Predicate, states: np.ndarray) -> np.ndarray:
    return predicate.evaluate(states)


def horizon(formula: Formula) -> int:
    """
    公式的时间跨度

    原子与 True 为 0; 时序算子加上区间上界
    """
    if isinstance(formula, (TrueFormula, Atom)):
        return 0
    if isinstance(formula, Not):
        return horizon(formula.child)
    if isinstance(formula, (And, Or, Implies)):
        return max(horizon(formula.left), horizon(formula.right))
    if isinstance(formula, (Always, Eventually)):
        return formula.interval.b + horizon(formula.child)
    return formula.interval.b + max(horizon(formula.left), horizon(formula.right))


def as_trace(trace) -> np.ndarray:
    """把轨迹整理为 (L, n) 数组, 标量序列视为 n = 1"""
    arr = np.asarray(trace, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ArgumentError(f"轨迹形状应为 (L, n), 实际为 {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError("轨迹中存在非有限值")
    return arr


def _check_length(formula: Formula, length: int, t: int) -> int:
    if t < 0:
        raise ArgumentError(f"评估时刻不能为负: {t}")
    required = t + horizon(formula) + 1
    if length < required:
        raise TraceTooShortError(required, length)
    return required


# ---------------------------------------------------------------------------
# 布尔语义


def _sat(formula: Formula, trace: np.ndarray, t: int) -> bool:
    if isinstance(formula, TrueFormula):
        return True
    if isinstance(formula, Atom):
        return bool(formula.predicate.evaluate(trace[t]) >= 0.0)
    if isinstance(formula, Not):
        return not _sat(formula.child, trace, t)
    if isinstance(formula, And):
        return _sat(formula.left, trace, t) and _sat(formula.right, trace, t)
    if isinstance(formula, Or):
        return _sat(formula.left, trace, t) or _sat(formula.right, trace, t)
    if isinstance(formula, Implies):
        return (not _sat(formula.left, trace, t)) or _sat(formula.right, trace, t)

    a, b = formula.interval.a, formula.interval.b
    if isinstance(formula, Always):
        return all(_sat(formula.child, trace, s) for s in range(t + a, t + b + 1))
    if isinstance(formula, Eventually):
        return any(_sat(formula.child, trace, s) for s in range(t + a, t + b + 1))
    if isinstance(formula, Until):
        # 存在 t'' ∈ t+[a,b] 使右侧成立, 且左侧在 [t, t''] 上处处成立
        return any(
            _sat(formula.right, trace, s) and all(_sat(formula.left, trace, r) for r in range(t, s + 1))
            for s in range(t + a, t + b + 1)
        )
    # Release: 对任意 t'' ∈ t+[a,b], 右侧成立或左侧在 [t, t''] 上某处成立
    return all(
        _sat(formula.right, trace, s) or any(_sat(formula.left, trace, r) for r in range(t, s + 1))
        for s in range(t + a, t + b + 1)
    )


def boolean_sat(formula: Formula, trace, t: int = 0) -> bool:
    """
    轨迹在时刻 t 是否满足公式

    Raises:
        TraceTooShortError: 轨迹长度 < t + horizon + 1
    """
    arr = as_trace(trace)
    _check_length(formula, arr.shape[0], t)
    return _sat(formula, arr, t)


# ---------------------------------------------------------------------------
# 定量语义


def is_robustness_marker(values) -> np.ndarray:
    """逐元素判断鲁棒度是否为 TRUE_ROBUSTNESS / FALSE_ROBUSTNESS 标记"""
    return np.isinf(np.asarray(values, dtype=float))


def _truncate(signal: np.ndarray, length: int) -> np.ndarray:
    return signal[..., :length]


def _signal(formula: Formula, states: np.ndarray, atom_fn: AtomFn) -> np.ndarray:
    if isinstance(formula, TrueFormula):
        return np.full(states.shape[:-1], TRUE_ROBUSTNESS)
    if isinstance(formula, Atom):
        return np.asarray(atom_fn(formula.predicate, states), dtype=float)
    if isinstance(formula, Not):
        return -_signal(formula.child, states, atom_fn)

    if isinstance(formula, (And, Or, Implies)):
        left = _signal(formula.left, states, atom_fn)
        right = _signal(formula.right, states, atom_fn)
        if isinstance(formula, Implies):
            left = -left
        length = min(left.shape[-1], right.shape[-1])
        left, right = _truncate(left, length), _truncate(right, length)
        return np.minimum(left, right) if isinstance(formula, And) else np.maximum(left, right)

    a, b = formula.interval.a, formula.interval.b
    if isinstance(formula, (Always, Eventually)):
        child = _signal(formula.child, states, atom_fn)
        length = child.shape[-1] - b
        windows = sliding_window_view(child, b - a + 1, axis=-1)[..., a : a + length, :]
        return windows.min(axis=-1) if isinstance(formula, Always) else windows.max(axis=-1)

    left = _signal(formula.left, states, atom_fn)
    right = _signal(formula.right, states, atom_fn)
    length = min(left.shape[-1], right.shape[-1]) - b
    until = isinstance(formula, Until)
    running = left[..., :length]
    best = None
    for k in range(b + 1):
        if k > 0:
            shifted = left[..., k : k + length]
            running = np.minimum(running, shifted) if until else np.maximum(running, shifted)
        if k < a:
            continue
        target = right[..., k : k + length]
        candidate = np.minimum(target, running) if until else np.maximum(target, running)
        if best is None:
            best = candidate
        else:
            best = np.maximum(best, candidate) if until else np.minimum(best, candidate)
    return best


def robustness_signal(formula: Formula, states: np.ndarray, atom_fn: Optional[AtomFn] = None) -> np.ndarray:
    """
    在所有可评估的起始时刻上计算鲁棒度

    Args:
        formula: 公式
        states: 形如 (..., L, n) 的状态数组, 前导维为批次
        atom_fn: 原子谓词在 (..., L, n) 上的取值函数, 默认为 h(z)

    Returns:
        np.ndarray: 形如 (..., L - horizon) 的鲁棒度信号

    Raises:
        TraceTooShortError: L ≤ horizon
    """
    arr = np.asarray(states, dtype=float)
    if arr.ndim < 2:
        raise ArgumentError(f"状态数组至少为二维 (L, n), 实际为 {arr.shape}")
    _check_length(formula, arr.shape[-2], 0)
    return _signal(formula, arr, atom_fn or _evaluate_atom)


def robustness(formula: Formula, trace, t: int = 0) -> float:
    """
    轨迹在时刻 t 的鲁棒度

    Raises:
        TraceTooShortError: 轨迹长度 < t + horizon + 1
    """
    arr = as_trace(trace)
    required = _check_length(formula, arr.shape[0], t)
    return float(_signal(formula, arr[t:required], _evaluate_atom)[0])


def batch_robustness(formula: Formula, trajectories: np.ndarray) -> np.ndarray:
    """一批 (K, L, n) 轨迹在时刻 0 的鲁棒度, 返回 (K,)"""
    return robustness_signal(formula, trajectories)[..., 0]


# ---------------------------------------------------------------------------
# 否定范式


def _nnf(formula: Formula, negate: bool) -> Formula:
    if isinstance(formula, TrueFormula):
        return Not(formula) if negate else formula
    if isinstance(formula, Atom):
        return Atom(formula.predicate.negate()) if negate else formula
    if isinstance(formula, Not):
        return _nnf(formula.child, not negate)
    if isinstance(formula, And):
        node = Or if negate else And
        return node(_nnf(formula.left, negate), _nnf(formula.right, negate))
    if isinstance(formula, Or):
        node = And if negate else Or
        return node(_nnf(formula.left, negate), _nnf(formula.right, negate))
    if isinstance(formula, Implies):
        # a => b ≡ (not a) or b
        if negate:
            return And(_nnf(formula.left, False), _nnf(formula.right, True))
        return Or(_nnf(formula.left, True), _nnf(formula.right, False))
    if isinstance(formula, Always):
        node = Eventually if negate else Always
        return node(formula.interval, _nnf(formula.child, negate))
    if isinstance(formula, Eventually):
        node = Always if negate else Eventually
        return node(formula.interval, _nnf(formula.child, negate))
    if isinstance(formula, Until):
        node = Release if negate else Until
        return node(formula.interval, _nnf(formula.left, negate), _nnf(formula.right, negate))
    node = Until if negate else Release
    return node(formula.interval, _nnf(formula.left, negate), _nnf(formula.right, negate))


def to_negation_normal_form(formula: Formula) -> Formula:
    """
    转换为否定范式

    否定经 De Morgan 律与时序对偶 (G/F, U/R) 下推到原子, 再以 h ↦ -h 吸收;
    结果中只可能剩下 not true
    """
    return _nnf(formula, False)


def is_negation_normal_form(formula: Formula) -> bool:
    """除 not true 外不含否定, 且不含蕴含"""
    for node in walk(formula):
        if isinstance(node, Implies):
            return False
        if isinstance(node, Not) and not isinstance(node.child, TrueFormula):
            return False
    return True


def _radius_vector(radii, steps: int) -> np.ndarray:
    radius = np.asarray(radii, dtype=float).reshape(-1)
    if radius.size != steps:
        raise ArgumentError(f"预测步数 {steps} 与半径个数 {radius.size} 不一致")
    if not np.all(np.isfinite(radius)) or np.any(radius < 0):
        raise ArgumentError("半径必须为非负有限值")
    return radius


def worst_case_robustness_batch(formula: Formula, prefixes, predictions, radii) -> np.ndarray:
    """
    批量最坏鲁棒度

    Args:
        formula: 否定范式公式
        prefixes: (J, t+1, n) 已观测前缀
        predictions: (J, T-t, n) 预测
        radii: (T-t,) 半径, 所有轨迹共用

    Returns:
        np.ndarray: (J,) 时刻 0 的最坏鲁棒度
    """
    if not is_negation_normal_form(formula):
        raise ArgumentError("公式必须为否定范式: 否定只能出现在原子上")
    observed = np.asarray(prefixes, dtype=float)
    future = np.asarray(predictions, dtype=float)
    if observed.ndim != 3 or future.ndim != 3 or observed.shape[0] != future.shape[0]:
        raise ArgumentError(f"前缀与预测形状不一致: {observed.shape}, {future.shape}")
    radius = _radius_vector(radii, future.shape[1])
    split = observed.shape[1]
    states = np.concatenate([observed, future], axis=1)

    def atom_fn(predicate: Predicate, batch: np.ndarray) -> np.ndarray:
        exact = predicate.evaluate(batch[:, :split])
        if future.shape[1] == 0:
            return exact
        return np.concatenate([exact, predicate.worst_case(batch[:, split:], radius)], axis=1)

    _check_length(formula, states.shape[1], 0)
    return _signal(formula, states, atom_fn)[:, 0]


def worst_case_robustness(formula: Formula, prefix, predictions, radii, t: Optional[int] = None) -> float:
    """
    鲁棒度的最坏情况下界

    τ ≤ t 时原子取 h(z_τ); τ > t 时取以 ê_τ 为中心、C_τ 为半径的球上 h 的最小值
    (仿射与球谓词为闭式, 一般谓词用 h(ê) - L·C)

    Args:
        formula: 否定范式公式
        prefix: 已观测状态 z_0..z_t, 形如 (t+1, n)
        predictions: 未来预测 ê_{t+1}..ê_T, 形如 (T-t, n), 可以为空
        radii: 与 predictions 对应的有限半径
        t: 当前时刻, 默认取 len(prefix) - 1

    Returns:
        float: 时刻 0 的最坏鲁棒度

    Raises:
        ArgumentError: 公式含非原子之上的否定, 或形状不一致
        TraceTooShortError: 观测加预测不足 horizon + 1
    """
    observed = as_trace(prefix)
    if t is not None and observed.shape[0] != t + 1:
        raise ArgumentError(f"前缀长度 {observed.shape[0]} 与时刻 t={t} 不一致")
    future = np.asarray(predictions, dtype=float).reshape(-1, observed.shape[1])
    return float(worst_case_robustness_batch(formula, observed[None], future[None], radii)[0])
