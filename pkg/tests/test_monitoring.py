"""预测式运行时监控的测试"""

import math
from dataclasses import replace

import numpy as np
import pytest

from cp_guard.core import QuantileResult, ShiftSpec
from cp_guard.data import Split, TrajectoryDataset
from cp_guard.monitoring import MonitorMethod, calibrate_monitor, monitor, monitor_batch, robustness_gap
from cp_guard.predictors import PredictorModel
from cp_guard.scenarios.statistics import binomial_band
from cp_guard.stl.parser import parse_formula, signal_table
from cp_guard.stl.semantics import batch_robustness, robustness
from cp_guard.utils.errors import ArgumentError, TraceTooShortError

CV = PredictorModel.constant_velocity(1)
SPEC = parse_formula("G[0,10] x <= 6 and F[0,10] x >= -1", signal_table(["x"]))


def walks(rng: np.random.Generator, K: int, split: Split = Split.CALIBRATE) -> TrajectoryDataset:
    return TrajectoryDataset(np.cumsum(0.5 * rng.normal(size=(K, 11, 1)), axis=1), split)


class TestRobustnessGap:
    def test_matching_infinities(self):
        gap = robustness_gap(np.array([math.inf, -math.inf, 2.0]), np.array([math.inf, -math.inf, 0.5]))
        assert gap.tolist() == [0.0, 0.0, 1.5]


class TestCalibration:
    """监控校准"""

    @pytest.mark.parametrize("method", ["accurate", "interpretable"])
    def test_exact_at_final_time(self, rng, method):
        """t = T 时整条轨迹已知, ρ* 等于 ρ"""
        calibration = calibrate_monitor(walks(rng, 50), CV, SPEC, 10, 0.05, method)
        assert calibration.margin == 0.0
        test = walks(rng, 5, Split.TEST).trajectories
        np.testing.assert_allclose(monitor_batch(calibration, test, CV), batch_robustness(SPEC, test))

    @pytest.mark.parametrize("method", ["accurate", "interpretable"])
    def test_small_calibration_set(self, rng, method):
        calibration = calibrate_monitor(walks(rng, 10), CV, SPEC, 3, 0.05, method)
        assert calibration.is_infinite
        assert calibration.margin == math.inf
        assert np.all(monitor_batch(calibration, walks(rng, 2).trajectories[:, :4], CV) == -math.inf)

    def test_prefix_length_must_match(self, rng):
        calibration = calibrate_monitor(walks(rng, 50), CV, SPEC, 4, 0.1)
        with pytest.raises(ArgumentError):
            monitor_batch(calibration, walks(rng, 2).trajectories[:, :3], CV)

    def test_trace_too_short(self, rng):
        short = TrajectoryDataset(np.zeros((30, 5, 1)), Split.CALIBRATE)
        with pytest.raises(TraceTooShortError):
            calibrate_monitor(short, CV, SPEC, 2, 0.1)

    def test_time_out_of_range(self, rng):
        with pytest.raises(ArgumentError):
            calibrate_monitor(walks(rng, 30), CV, SPEC, 11, 0.1)

    def test_interpretable_uses_negation_normal_form(self, rng):
        spec = parse_formula("not F[0,10] x >= 6", signal_table(["x"]))
        calibration = calibrate_monitor(walks(rng, 50), CV, spec, 5, 0.1, MonitorMethod.INTERPRETABLE)
        assert calibration.spec.__class__.__name__ == "Always"

    def test_robust_margin_dominates(self, rng):
        calib = walks(rng, 500)
        vanilla = calibrate_monitor(calib, CV, SPEC, 4, 0.2)
        robust = calibrate_monitor(calib, CV, SPEC, 4, 0.2, shift=ShiftSpec.tv(0.05))
        assert robust.margin >= vanilla.margin

    def test_single_prefix(self, rng):
        calibration = calibrate_monitor(walks(rng, 100), CV, SPEC, 6, 0.1)
        prefix = walks(rng, 1, Split.TEST).trajectories[0, :7]
        first = monitor(calibration, prefix, CV)
        second = monitor(calibration, prefix.copy(), CV)
        assert first.rho_star == second.rho_star
        assert first.digest == second.digest
        assert len(first.digest) == 64
        assert first.to_dict()["method"] == "accurate"

    @pytest.mark.parametrize("text, expected", [("true", math.inf), ("not true", -math.inf)])
    def test_markers_survive_infinite_margin(self, rng, text, expected):
        """扩展分位数为 -inf 时, ±inf 标记保持不变而不是变成 NaN"""
        calibration = calibrate_monitor(walks(rng, 50), CV, SPEC, 4, 0.1)
        calibration = replace(
            calibration,
            spec=parse_formula(text, signal_table(["x"])),
            quantile=QuantileResult(-math.inf, 46, 50, 0.9, ("extended_real",)),
        )
        rho_star = monitor_batch(calibration, walks(rng, 3).trajectories[:, :5], CV)
        assert rho_star.tolist() == [expected] * 3

    def test_markers_ignore_finite_margin(self, rng):
        calibration = calibrate_monitor(walks(rng, 50), CV, SPEC, 4, 0.1)
        calibration = replace(calibration, spec=parse_formula("not true", signal_table(["x"])))
        assert calibration.quantile.is_finite
        rho_star = monitor_batch(calibration, walks(rng, 2).trajectories[:, :5], CV)
        assert rho_star.tolist() == [-math.inf, -math.inf]


@pytest.mark.slow
class TestMonitorCoverage:
    """ρ* ≤ ρ 的边际概率"""

    @pytest.mark.parametrize("method", ["accurate", "interpretable"])
    def test_lower_bound_holds(self, rng, method):
        N, delta, t = 300, 0.1, 4
        hits = 0
        for _ in range(N):
            calibration = calibrate_monitor(walks(rng, 100), CV, SPEC, t, delta, method)
            trace = walks(rng, 1, Split.TEST).trajectories[0]
            hits += int(monitor(calibration, trace[: t + 1], CV).rho_star <= robustness(SPEC, trace))
        lo, _ = binomial_band(1 - delta, N)
        assert hits / N >= lo
