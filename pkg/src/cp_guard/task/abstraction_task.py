"""
统计抽象对比实验

行人场景上比较并集界 (UB) 与单一分数 (SNSA, 闭式 α 与优化 α) 两类构造:
逐时刻平均半径、联合覆盖率, 以及单步 (闭环) 半径与开环半径的大小关系
"""

import math

import numpy as np
import pandas as pd

from cp_guard.abstraction.statistical import (
    Abstraction,
    AbstractionMode,
    abstraction_naive,
    abstraction_single_score,
    normalization_closed_form,
    optimize_alpha,
    prediction_errors,
)
from cp_guard.data.dataset import Split
from cp_guard.predictors.models import PredictorConfig, fit
from cp_guard.scenarios.simulators import PedestrianWalkers, sample_dataset
from cp_guard.scenarios.statistics import histogram
from cp_guard.task.base_task import BaseExperiment, ExperimentReport, registry

OPEN = AbstractionMode.OPEN_LOOP
CLOSED = AbstractionMode.CLOSED_LOOP


def _radii(abstraction: Abstraction) -> np.ndarray:
    """(H,) 每个时刻的半径, 无穷时为 inf"""
    if abstraction.is_infinite:
        return np.full(abstraction.horizon, math.inf)
    return abstraction.radii[:, 0].copy()


@registry.register
class AbstractionCompareExperiment(BaseExperiment):
    """UB 与 SNSA 统计抽象的对比"""

    name = "abstraction-compare"
    description = "行人场景上并集界与单一分数统计抽象的半径与联合覆盖率对比"
    defaults = {
        "repetitions": 50,
        "k": 596,
        "train_size": 500,
        "tune_size": 500,
        "test_size": 500,
        "delta": 0.05,
        "n_agents": 3,
        "horizon": 21,
        "order": 2,
        "alpha_restarts": 2,
        "alpha_scale": 3.7,
    }

    def execute(self) -> ExperimentReport:
        scenario = PedestrianWalkers(n_agents=int(self.params["n_agents"]), horizon=int(self.params["horizon"]))
        K, J = int(self.params["k"]), int(self.params["test_size"])

        # 所有行人拼成一个分数块, 逐时刻只有一个半径
        train = sample_dataset(scenario, int(self.params["train_size"]), self.streams, Split.TRAIN, agents=False)
        tune = sample_dataset(scenario, int(self.params["tune_size"]), self.streams, Split.TUNE, agents=False)
        model = fit(train, PredictorConfig(order=int(self.params["order"])))
        alphas = {
            "snsa_cf": normalization_closed_form(tune, model, OPEN),
            "snsa_opt": optimize_alpha(
                tune, model, self.delta, OPEN, restarts=int(self.params["alpha_restarts"]), seed=self.seed
            ),
        }

        def trial(n: int):
            streams = self.repetition_streams(n)
            calib = sample_dataset(scenario, K, streams, Split.CALIBRATE, agents=False)
            test = sample_dataset(scenario, J, streams, Split.TEST, agents=False)
            errors = prediction_errors(test, model, OPEN).values
            variants = {"ub": abstraction_naive(calib, model, self.delta, OPEN)}
            for name, alpha in alphas.items():
                variants[name] = abstraction_single_score(calib, model, self.delta, alpha, OPEN)
            closed = abstraction_naive(calib, model, self.delta, CLOSED)
            radii = {name: _radii(a) for name, a in variants.items()}
            coverage = {name: float(a.covers(errors).mean()) for name, a in variants.items()}
            return radii, coverage, _radii(closed)

        results = self.map_repetitions(trial)
        report = self.new_report()
        names = list(results[0][0])
        times = prediction_errors(train, model, OPEN).times

        mean_radii = {name: np.mean([r[0][name] for r in results], axis=0) for name in names}
        report.c_values = pd.DataFrame(
            [{"variant": name, "tau": tau, "mean_radius": float(mean_radii[name][h])} for name in names for h, tau in enumerate(times)]
        )
        report.cec = pd.DataFrame(
            [{"variant": name, "repetition": n, "cec": r[1][name]} for name in names for n, r in enumerate(results)]
        )
        for name in names:
            cec = np.array([r[1][name] for r in results])
            report.coverage[name] = float(cec.mean())
            report.histograms[name] = histogram(cec)

        for name in alphas:
            report.summary[f"{name}_below_ub_fraction"] = float(np.mean(mean_radii[name] < mean_radii["ub"]))
        closed_mean = np.mean([r[2] for r in results], axis=0)
        report.summary["closed_below_open_fraction"] = float(np.mean(closed_mean <= mean_radii["ub"]))
        report.summary["ub_infinite_count"] = int(sum(np.isinf(r[0]["ub"]).any() for r in results))
        report.summary["alpha_scale_invariance"] = self._scale_gap(scenario, model, alphas["snsa_cf"])
        report.summary["alpha_cf"] = alphas["snsa_cf"].values[:, 0].tolist()
        self.logger.info(
            "覆盖率: " + ", ".join(f"{name}={report.coverage[name]:.4f}" for name in names)
            + f"; SNSA 半径小于 UB 的时刻比例 {report.summary['snsa_cf_below_ub_fraction']:.2f}"
        )
        return report

    def _scale_gap(self, scenario, model, alpha) -> float:
        """α 乘以常数后半径的最大变化量"""
        calib = sample_dataset(scenario, int(self.params["k"]), self.repetition_streams(0), Split.CALIBRATE, agents=False)
        base = abstraction_single_score(calib, model, self.delta, alpha, OPEN)
        scaled = abstraction_single_score(calib, model, self.delta, alpha.scaled(float(self.params["alpha_scale"])), OPEN)
        if base.is_infinite or scaled.is_infinite:
            return 0.0 if base.is_infinite == scaled.is_infinite else math.inf
        return float(np.max(np.abs(base.radii - scaled.radii)))
