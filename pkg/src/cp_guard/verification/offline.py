"""
离线概率验证

学习组件 (LEC) 与闭环系统 (LEAS) 的可达性、逻辑规约验证,
极值估计、状态估计器的保形化以及定性统计模型检验 (SMC)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from cp_guard.core.quantile import QuantileResult, conformal_quantile, conformal_quantile_extended
from cp_guard.data.dataset import Split, TrajectoryDataset
from cp_guard.stl.formula import Formula, is_temporal_free
from cp_guard.stl.semantics import batch_robustness, boolean_sat, horizon
from cp_guard.utils.errors import ArgumentError, CPGuardError, NumericalError, TraceTooShortError
from cp_guard.verification.sets import OutputSet, tube_distances

logger = logging.getLogger("cp_guard.verification")

Component = Callable[[np.ndarray], np.ndarray]
Sampler = Callable[[np.random.Generator, int], np.ndarray]


class VerdictStatus(str, Enum):
    CERTIFIED = "certified"
    REFUTED = "refuted"
    INCONCLUSIVE = "inconclusive"

    @property
    def exit_code(self) -> int:
        return {"certified": 0, "refuted": 2, "inconclusive": 3}[self.value]


@dataclass(frozen=True)
class Verdict:
    """
    验证结论

    Certified 当且仅当 C < 0; Refuted 只来自符号翻转后的分数 C' < 0
    """

    status: VerdictStatus
    margin: QuantileResult
    delta: float
    K: int
    score_kind: str
    flipped_margin: Optional[QuantileResult] = None

    @property
    def certified(self) -> bool:
        return self.status is VerdictStatus.CERTIFIED

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "margin": self.margin.to_dict(),
            "flipped_margin": None if self.flipped_margin is None else self.flipped_margin.to_dict(),
            "delta": self.delta,
            "K": self.K,
            "score_kind": self.score_kind,
        }


def _negative(result: QuantileResult) -> bool:
    return result.is_finite and result.value < 0.0


def decide(scores: np.ndarray, delta: float, score_kind: str) -> Verdict:
    """
    由分数给出验证结论

    先用原分数求 C, C < 0 即 Certified; 否则对 -分数 重新校准,
    C' < 0 为 Refuted, 其余情况 (含 C = 0) 为 Inconclusive
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    margin = conformal_quantile_extended(scores, delta)
    if _negative(margin):
        verdict = Verdict(VerdictStatus.CERTIFIED, margin, delta, scores.size, score_kind)
    else:
        flipped = conformal_quantile_extended(-scores, delta)
        status = VerdictStatus.REFUTED if _negative(flipped) else VerdictStatus.INCONCLUSIVE
        verdict = Verdict(status, margin, delta, scores.size, score_kind, flipped)
    logger.info(f"验证结论 [{score_kind}]: {verdict.status.value}, C={verdict.margin.as_float():.6g}, K={scores.size}")
    return verdict


def _draw(component: Component, sampler: Sampler, K: int, generator: np.random.Generator) -> np.ndarray:
    if K < 1:
        raise ArgumentError(f"K 必须为正整数: {K}")
    try:
        inputs = sampler(generator, K)
    except CPGuardError:
        raise
    except Exception as e:
        raise CPGuardError(f"输入采样失败: {e}") from e
    outputs = np.asarray(component(inputs), dtype=float)
    if outputs.shape[0] != K:
        raise ArgumentError(f"组件输出个数 {outputs.shape[0]} 与样本数 {K} 不一致")
    return outputs


def verify_lec_reachability(
    component: Component,
    sampler: Sampler,
    output_set: OutputSet,
    delta: float,
    K: int,
    generator: np.random.Generator,
) -> Verdict:
    """
    学习组件的输出可达性验证

    分数为输出到集合的带符号距离 (子水平集为 h_out 值), C < 0 时
    以至少 1-δ 的概率输出落在集合内

    Args:
        component: 输入 (K, d_in) 到输出 (K, d_out) 的映射
        sampler: sampler(generator, K) 采样 K 个独立输入
        output_set: 输出集合
        delta: 失效概率
        K: 校准样本数
        generator: 随机数生成器

    Returns:
        Verdict: 验证结论
    """
    outputs = _draw(component, sampler, K, generator)
    return decide(output_set.signed_distance(outputs), delta, "lec_reachability")


def verify_lec_logic(
    component: Component,
    sampler: Sampler,
    spec: Formula,
    delta: float,
    K: int,
    generator: np.random.Generator,
) -> Verdict:
    """
    学习组件的谓词逻辑规约验证, 分数为 -ρ(输出)

    Raises:
        ArgumentError: 规约含时序算子
    """
    if not is_temporal_free(spec):
        raise ArgumentError("组件规约只能是谓词逻辑公式, 不能含时序算子")
    outputs = _draw(component, sampler, K, generator)
    rho = batch_robustness(spec, outputs.reshape(K, 1, -1))
    return decide(-rho, delta, "lec_logic")


def extremum_from_scores(scores: Sequence[float]) -> Tuple[float, float]:
    """极值估计的闭式: C = 最大分数, δ* = 1/(K+1)"""
    arr = np.asarray(scores, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ArgumentError("分数不能为空")
    return float(arr.max()), 1.0 / (arr.size + 1)


def estimate_extremum(
    component: Component,
    sampler: Sampler,
    K: int,
    generator: np.random.Generator,
) -> Tuple[float, float]:
    """
    标量输出的极值估计

    Returns:
        (C, δ*): Prob(输出 ≤ C) ≥ 1 - δ*, δ* 为可取的最小失效概率
    """
    outputs = _draw(component, sampler, K, generator)
    return extremum_from_scores(outputs.reshape(K, -1)[:, 0])


def _project(dataset: TrajectoryDataset, selector: Optional[Sequence[int]]) -> np.ndarray:
    if selector is None:
        return dataset.trajectories
    return dataset.trajectories[..., list(selector)]


def verify_leas_reachability(
    dataset: TrajectoryDataset,
    tube: Sequence[OutputSet],
    delta: float,
    aggregate: str = "min",
    selector: Optional[Sequence[int]] = None,
) -> Verdict:
    """
    闭环系统可达性验证

    aggregate="min": 分数为各时刻带符号距离的最小值 (某时刻进入集合);
    aggregate="max": 取最大值 (所有时刻都在集合内)

    Args:
        dataset: 校准轨迹
        tube: 逐时刻集合, 长度 ≥ T+1
        delta: 失效概率
        aggregate: min 或 max
        selector: 集合所在的状态分量

    Returns:
        Verdict: 验证结论
    """
    dataset.require(Split.CALIBRATE)
    if aggregate not in ("min", "max"):
        raise ArgumentError(f"未知的聚合方式: {aggregate}")
    distances = tube_distances(tube, _project(dataset, selector))
    scores = distances.min(axis=1) if aggregate == "min" else distances.max(axis=1)
    return decide(scores, delta, f"leas_reachability_{aggregate}")


def _check_spec_length(dataset: TrajectoryDataset, spec: Formula) -> None:
    required = horizon(spec) + 1
    if dataset.length < required:
        raise TraceTooShortError(required, dataset.length)


def verify_leas_stl(dataset: TrajectoryDataset, spec: Formula, delta: float) -> Verdict:
    """
    闭环系统的 STL 规约验证

    分数为 -ρ(z), C < 0 时 -C 为以 1-δ 概率成立的鲁棒度下界
    """
    dataset.require(Split.CALIBRATE)
    _check_spec_length(dataset, spec)
    rho = batch_robustness(spec, dataset.trajectories)
    return decide(-rho, delta, "leas_stl")


def smc_satisfaction_bound(dataset: TrajectoryDataset, spec: Formula) -> float:
    """
    定性 SMC 的满足概率下界

    分数为 -𝟙(z ⊨ φ), 返回使 (K+1)(1-δ) 分位数仍为 -1 的最大 1-δ,
    线性搜索结果与闭式 S/(K+1) 交叉校验

    Raises:
        NumericalError: 线性搜索与闭式不一致
    """
    dataset.require(Split.CALIBRATE)
    _check_spec_length(dataset, spec)
    satisfied = np.array([boolean_sat(spec, trajectory) for trajectory in dataset.trajectories])
    K = dataset.K
    S = int(satisfied.sum())
    ordered = np.sort(-satisfied.astype(float))

    best_rank = 0
    for rank in range(1, K + 1):
        if ordered[rank - 1] == -1.0:
            best_rank = rank
        else:
            break
    bound = best_rank / (K + 1)
    if bound != S / (K + 1):
        raise NumericalError(f"SMC 线性搜索结果 {bound} 与闭式 {S}/{K + 1} 不一致")
    logger.info(f"SMC 满足概率下界: {S}/{K + 1} = {bound:.4f}")
    return bound


def conformalize_estimator(
    estimates: np.ndarray,
    truths: np.ndarray,
    delta: float,
    alpha: Optional[np.ndarray] = None,
) -> QuantileResult:
    """
    状态估计器的保形化

    分数为 max_t α_t‖ẑ_t - z_t‖ (默认 α = 1), 所有时刻的估计误差
    以 1-δ 的概率不超过 C/α_t

    Args:
        estimates: (K, L, n) 估计
        truths: (K, L, n) 真值
        delta: 失效概率
        alpha: (L,) 正权重

    Returns:
        QuantileResult: C
    """
    est = np.asarray(estimates, dtype=float)
    truth = np.asarray(truths, dtype=float)
    if est.shape != truth.shape:
        raise ArgumentError(f"估计与真值形状不一致: {est.shape} 与 {truth.shape}")
    if est.ndim == 2:
        est, truth = est[..., None], truth[..., None]
    errors = np.linalg.norm(est - truth, axis=-1)
    if alpha is not None:
        weights = np.asarray(alpha, dtype=float).reshape(-1)
        if weights.size != errors.shape[1] or not np.all(weights > 0):
            raise ArgumentError("α 必须为长度 L 的正权重")
        errors = errors * weights[None]
    return conformal_quantile(errors.max(axis=1), delta)
