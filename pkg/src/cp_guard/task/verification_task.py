"""
离线验证实验

- unicycle-verify: 独轮车终点位置预测组件的输出可达性验证 (训练过的回归器 vs 未训练组件)
- cartpole-verify: 倒立摆闭环系统的 STL 规约验证 (稳定增益 vs 失稳增益)
"""

from typing import Callable, Dict

import numpy as np
import pandas as pd

from cp_guard.data.dataset import Split
from cp_guard.predictors.models import RidgeRegressor, UntrainedComponent
from cp_guard.scenarios.simulators import (
    CARTPOLE_SPEC,
    DESTABILIZED_GAINS,
    STABILIZING_GAINS,
    CartPole,
    NoisyUnicycle,
    sample_dataset,
    unicycle_features,
    unicycle_safe_set,
)
from cp_guard.scenarios.statistics import histogram
from cp_guard.stl.parser import parse_formula, signal_table
from cp_guard.stl.semantics import batch_robustness
from cp_guard.task.base_task import BaseExperiment, ExperimentReport, registry
from cp_guard.verification.offline import Verdict, VerdictStatus, verify_lec_reachability, verify_leas_stl
from cp_guard.verification.sets import SublevelSet

CARTPOLE_SIGNALS = ("p", "v", "theta", "omega")


def unicycle_components(
    scenario: NoisyUnicycle, train_size: int, generator: np.random.Generator
) -> Dict[str, Callable[[np.ndarray], np.ndarray]]:
    """
    终点位置预测组件: 在 train_size 个样本上拟合的岭回归器, 以及直接返回初始位置的未训练组件
    """
    inputs = scenario.sample_inputs(generator, train_size)
    targets = scenario.final_positions(generator, inputs)
    regressor = RidgeRegressor().fit(unicycle_features(inputs), targets)
    return {
        "fitted": lambda u: regressor.predict(unicycle_features(u)),
        "untrained": UntrainedComponent().predict,
    }


def _verdict_row(variant: str, n: int, verdict: Verdict) -> dict:
    return {"variant": variant, "repetition": n, "C": verdict.margin.as_float(), "status": verdict.status.value}


@registry.register
class UnicycleVerifyExperiment(BaseExperiment):
    """独轮车终点预测组件的可达性验证"""

    name = "unicycle-verify"
    description = "独轮车终点位置预测组件的输出可达性验证, 比较训练过的回归器与未训练组件"
    defaults = {
        "repetitions": 100,
        "k": 1000,
        "train_size": 1000,
        "test_size": 200,
        "delta": 0.05,
        "heading_std": 0.05,
        "speed_std": 0.05,
    }

    def execute(self) -> ExperimentReport:
        scenario = NoisyUnicycle(heading_std=float(self.params["heading_std"]), speed_std=float(self.params["speed_std"]))
        output_set = SublevelSet(unicycle_safe_set)
        K, J = int(self.params["k"]), int(self.params["test_size"])
        report = self.new_report()
        c_rows, cec_rows = [], []

        components = unicycle_components(
            scenario, int(self.params["train_size"]), self.streams.generator(Split.TRAIN.value)
        )
        for variant, component in components.items():

            def trial(n: int):
                streams = self.repetition_streams(n).child(variant)
                verdict = verify_lec_reachability(
                    component, scenario.sample_inputs, output_set, self.delta, K, streams.generator(Split.CALIBRATE.value)
                )
                test_inputs = scenario.sample_inputs(streams.generator(Split.TEST.value), J)
                scores = output_set.signed_distance(component(test_inputs))
                return verdict, float(np.mean([verdict.margin.covers(s) for s in scores]))

            results = self.map_repetitions(trial)
            c_rows += [_verdict_row(variant, n, v) for n, (v, _) in enumerate(results)]
            cec = np.array([r[1] for r in results])
            cec_rows += [{"variant": variant, "repetition": n, "cec": v} for n, v in enumerate(cec)]
            margins = np.array([v.margin.as_float() for v, _ in results])
            report.coverage[variant] = float(cec.mean())
            report.summary[f"mean_C_{variant}"] = float(margins.mean())
            report.summary[f"certified_{variant}"] = float(np.mean([v.certified for v, _ in results]))
            report.histograms[f"C_{variant}"] = histogram(margins)
            self.logger.info(f"{variant}: 平均 C={margins.mean():.4f}, 认证比例 {report.summary[f'certified_{variant}']:.2f}")

        report.c_values = pd.DataFrame(c_rows)
        report.cec = pd.DataFrame(cec_rows)
        return report


@registry.register
class CartpoleVerifyExperiment(BaseExperiment):
    """倒立摆 STL 规约验证"""

    name = "cartpole-verify"
    description = "倒立摆 bang-bang 控制闭环的 STL 规约验证, 比较稳定增益与失稳增益"
    defaults = {
        "repetitions": 100,
        "k": 1000,
        "test_size": 200,
        "delta": 0.05,
        "spec": CARTPOLE_SPEC,
    }

    def execute(self) -> ExperimentReport:
        spec = parse_formula(self.params["spec"], signal_table(CARTPOLE_SIGNALS))
        K, J = int(self.params["k"]), int(self.params["test_size"])
        report = self.new_report()
        c_rows, cec_rows = [], []

        for variant, gains in (("stabilizing", STABILIZING_GAINS), ("destabilized", DESTABILIZED_GAINS)):
            scenario = CartPole(gains=gains)

            def trial(n: int):
                streams = self.repetition_streams(n).child(variant)
                verdict = verify_leas_stl(sample_dataset(scenario, K, streams, Split.CALIBRATE), spec, self.delta)
                test = sample_dataset(scenario, J, streams, Split.TEST)
                rho = batch_robustness(spec, test.trajectories)
                # 认证的鲁棒度下界 -C
                floor = -verdict.margin.as_float()
                return verdict, float(np.mean(rho >= floor))

            results = self.map_repetitions(trial)
            c_rows += [_verdict_row(variant, n, v) for n, (v, _) in enumerate(results)]
            cec = np.array([r[1] for r in results])
            cec_rows += [{"variant": variant, "repetition": n, "cec": v} for n, v in enumerate(cec)]
            statuses = [v.status for v, _ in results]
            report.coverage[variant] = float(cec.mean())
            report.summary[f"certified_{variant}"] = statuses.count(VerdictStatus.CERTIFIED) / len(statuses)
            report.summary[f"refuted_{variant}"] = statuses.count(VerdictStatus.REFUTED) / len(statuses)
            report.summary[f"mean_C_{variant}"] = float(np.mean([v.margin.as_float() for v, _ in results]))
            self.logger.info(
                f"{variant}: 认证比例 {report.summary[f'certified_{variant}']:.2f}, "
                f"平均 C={report.summary[f'mean_C_{variant}']:.4f}"
            )

        report.c_values = pd.DataFrame(c_rows)
        report.cec = pd.DataFrame(cec_rows)
        return report
