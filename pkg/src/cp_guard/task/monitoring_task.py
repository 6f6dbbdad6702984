"""
预测式运行时监控实验

- monitor-aircraft: 俯冲拉起代理过程上 accurate / interpretable 两种监控的覆盖率
- monitor-robust: 初值分布偏移下普通校准与全变差鲁棒校准的覆盖率对比
"""

import numpy as np
import pandas as pd
from scipy import stats

from cp_guard.core.robust import ShiftSpec, gaussian_tv_distance, monte_carlo_tv_distance
from cp_guard.data.dataset import Split
from cp_guard.monitoring.predictive import MonitorCalibration, MonitorMethod, calibrate_monitor, monitor_batch
from cp_guard.predictors.models import PredictorConfig, PredictorModel, fit
from cp_guard.scenarios.simulators import AIRCRAFT_SPEC, AircraftSurrogate, sample_dataset
from cp_guard.scenarios.statistics import histogram
from cp_guard.stl.parser import parse_formula, signal_table
from cp_guard.stl.semantics import batch_robustness
from cp_guard.task.base_task import BaseExperiment, ExperimentReport, registry

AIRCRAFT_SIGNALS = ("h", "s")


def monitor_coverage(
    calibration: MonitorCalibration, model: PredictorModel, trajectories: np.ndarray, actual: np.ndarray
) -> float:
    """ρ(z) ≥ ρ* 的比例"""
    rho_star = monitor_batch(calibration, trajectories[:, : calibration.t + 1], model)
    return float(np.mean(actual >= rho_star))


class _AircraftMonitorBase(BaseExperiment):
    """共用的规约解析与预测器训练"""

    def setup(self, scenario: AircraftSurrogate):
        spec = parse_formula(self.params["spec"], signal_table(AIRCRAFT_SIGNALS))
        train = sample_dataset(scenario, int(self.params["train_size"]), self.streams, Split.TRAIN)
        model = fit(train, PredictorConfig(order=int(self.params["order"])))
        return spec, model


@registry.register
class MonitorAircraftExperiment(_AircraftMonitorBase):
    """accurate 与 interpretable 监控的覆盖率"""

    name = "monitor-aircraft"
    description = "俯冲拉起代理过程的 STL 预测式监控, 比较 accurate 与 interpretable 两种方法"
    defaults = {
        "repetitions": 100,
        "k": 700,
        "test_size": 200,
        "train_size": 500,
        "t": 80,
        "order": 2,
        "delta": 0.05,
        "spec": AIRCRAFT_SPEC,
    }

    def execute(self) -> ExperimentReport:
        scenario = AircraftSurrogate()
        spec, model = self.setup(scenario)
        K, J, t = int(self.params["k"]), int(self.params["test_size"]), int(self.params["t"])
        methods = (MonitorMethod.ACCURATE, MonitorMethod.INTERPRETABLE)

        def trial(n: int):
            streams = self.repetition_streams(n)
            calib = sample_dataset(scenario, K, streams, Split.CALIBRATE)
            test = sample_dataset(scenario, J, streams, Split.TEST)
            actual = batch_robustness(spec, test.trajectories)
            out = {}
            for method in methods:
                calibration = calibrate_monitor(calib, model, spec, t, self.delta, method)
                out[method.value] = (calibration.margin, monitor_coverage(calibration, model, test.trajectories, actual))
            return out

        results = self.map_repetitions(trial)
        report = self.new_report()
        c_rows, cec_rows = [], []
        for method in methods:
            variant = method.value
            cec = np.array([r[variant][1] for r in results])
            c_rows += [{"variant": variant, "repetition": n, "C": r[variant][0]} for n, r in enumerate(results)]
            cec_rows += [{"variant": variant, "repetition": n, "cec": v} for n, v in enumerate(cec)]
            report.coverage[variant] = float(cec.mean())
            report.histograms[variant] = histogram(cec)
            self.logger.info(f"{variant}: EC={cec.mean():.4f}")
        report.c_values = pd.DataFrame(c_rows)
        report.cec = pd.DataFrame(cec_rows)
        for method in methods:
            report.summary[f"exact_at_T_max_gap_{method.value}"] = self._exactness(scenario, spec, model, method)
        return report

    def _exactness(self, scenario, spec, model, method: MonitorMethod) -> float:
        """t = T 时监控给出的 ρ* 与真实鲁棒度的最大差"""
        streams = self.repetition_streams(0)
        calib = sample_dataset(scenario, int(self.params["k"]), streams, Split.CALIBRATE)
        test = sample_dataset(scenario, int(self.params["test_size"]), streams, Split.TEST)
        calibration = calibrate_monitor(calib, model, spec, scenario.T, self.delta, method)
        rho_star = monitor_batch(calibration, test.trajectories, model)
        actual = batch_robustness(spec, test.trajectories)
        finite = np.isfinite(actual)
        if not finite.any():
            return 0.0
        return float(np.max(np.abs(rho_star[finite] - actual[finite])))


@registry.register
class MonitorRobustExperiment(_AircraftMonitorBase):
    """分布偏移下的鲁棒监控"""

    name = "monitor-robust"
    description = "训练与校准用标称初值分布, 测试用偏移分布, 比较普通校准与全变差鲁棒校准"
    defaults = {
        "repetitions": 100,
        "k": 700,
        "test_size": 200,
        "train_size": 500,
        "t": 80,
        "order": 2,
        "delta": 0.2,
        "epsilon": 0.129,
        "tv_samples": 100000,
        "spec": AIRCRAFT_SPEC,
    }

    def tv_estimates(self, scenario: AircraftSurrogate) -> dict:
        """标称与偏移初值分布之间全变差的闭式值与蒙特卡洛估计"""
        (h_p, hs_p), (s_p, ss_p) = scenario.with_shift(False).initial_law()
        (h_q, _), (s_q, _) = scenario.with_shift(True).initial_law()
        mean_p, mean_q = np.array([h_p, s_p]), np.array([h_q, s_q])
        cov = np.diag([hs_p**2, ss_p**2])
        p = stats.multivariate_normal(mean_p, cov)
        q = stats.multivariate_normal(mean_q, cov)
        samples = p.rvs(size=int(self.params["tv_samples"]), random_state=self.streams.generator("tv"))
        return {
            "closed_form": gaussian_tv_distance(mean_p, mean_q, cov),
            "monte_carlo": monte_carlo_tv_distance(p.logpdf, q.logpdf, samples),
        }

    def execute(self) -> ExperimentReport:
        nominal = AircraftSurrogate()
        shifted = nominal.with_shift()
        spec, model = self.setup(nominal)
        K, J, t = int(self.params["k"]), int(self.params["test_size"]), int(self.params["t"])
        shift = ShiftSpec.tv(float(self.params["epsilon"]))
        tv = self.tv_estimates(nominal)
        if tv["closed_form"] > shift.epsilon:
            self.logger.warning(f"初值分布的全变差 {tv['closed_form']:.4f} 超过 ε={shift.epsilon}")

        def trial(n: int):
            streams = self.repetition_streams(n)
            calib = sample_dataset(nominal, K, streams, Split.CALIBRATE)
            test = sample_dataset(shifted, J, streams, Split.TEST)
            actual = batch_robustness(spec, test.trajectories)
            out = {}
            for variant, spec_shift in (("vanilla", None), ("robust", shift)):
                calibration = calibrate_monitor(calib, model, spec, t, self.delta, MonitorMethod.ACCURATE, shift=spec_shift)
                out[variant] = (
                    calibration.quantile.as_float(),
                    monitor_coverage(calibration, model, test.trajectories, actual),
                )
            return out

        results = self.map_repetitions(trial)
        report = self.new_report()
        target = report.coverage_target
        c_rows, cec_rows = [], []
        for variant in ("vanilla", "robust"):
            cec = np.array([r[variant][1] for r in results])
            c_rows += [{"variant": variant, "repetition": n, "C": r[variant][0]} for n, r in enumerate(results)]
            cec_rows += [{"variant": variant, "repetition": n, "cec": v} for n, v in enumerate(cec)]
            report.coverage[variant] = float(cec.mean())
            report.histograms[variant] = histogram(cec)
            report.summary[f"{variant}_below_target_fraction"] = float(np.mean(cec < target))
            report.summary[f"{variant}_at_target_fraction"] = float(np.mean(cec >= target))
        report.c_values = pd.DataFrame(c_rows)
        report.cec = pd.DataFrame(cec_rows)
        report.summary["robust_C_exceeds_vanilla"] = float(
            np.mean([r["robust"][0] > r["vanilla"][0] for r in results])
        )
        report.summary["tv_distance"] = tv
        report.summary["epsilon"] = shift.epsilon
        self.logger.info(
            f"偏移测试: 普通 EC={report.coverage['vanilla']:.4f}, 鲁棒 EC={report.coverage['robust']:.4f}, "
            f"TV≈{tv['closed_form']:.4f}"
        )
        return report
