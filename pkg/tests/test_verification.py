"""离线验证、SMC 与感知抽象的测试"""

import numpy as np
import pytest

from cp_guard.data import Split, TrajectoryDataset
from cp_guard.stl.parser import parse_formula, signal_table
from cp_guard.utils.errors import ArgumentError, SplitError, TraceTooShortError
from cp_guard.verification import (
    BallSet,
    BoxSet,
    SublevelSet,
    VerdictStatus,
    conformalize_estimator,
    decide,
    epsilon_net,
    estimate_extremum,
    extremum_from_scores,
    perceptual_abstraction,
    smc_satisfaction_bound,
    verify_leas_reachability,
    verify_leas_stl,
    verify_lec_logic,
    verify_lec_reachability,
)

TABLE = signal_table(["x"])


def gaussian_sampler(scale: float, dim: int = 2):
    def sample(generator: np.random.Generator, K: int) -> np.ndarray:
        return scale * generator.standard_normal(size=(K, dim))

    return sample


def identity(inputs: np.ndarray) -> np.ndarray:
    return inputs


class TestDecide:
    """验证结论与退出码"""

    def test_certified(self):
        verdict = decide(-np.arange(1.0, 21.0), 0.05, "test")
        assert verdict.status is VerdictStatus.CERTIFIED
        assert verdict.status.exit_code == 0
        assert verdict.flipped_margin is None

    def test_refuted(self):
        verdict = decide(np.arange(1.0, 21.0), 0.05, "test")
        assert verdict.status is VerdictStatus.REFUTED
        assert verdict.status.exit_code == 2

    def test_too_few_samples_is_inconclusive(self):
        verdict = decide(-np.arange(1.0, 11.0), 0.05, "test")
        assert verdict.status is VerdictStatus.INCONCLUSIVE
        assert verdict.status.exit_code == 3
        assert verdict.margin.is_infinite

    def test_zero_margin_is_inconclusive(self):
        assert decide(np.zeros(30), 0.05, "test").status is VerdictStatus.INCONCLUSIVE

    def test_to_dict(self):
        data = decide(np.arange(1.0, 21.0), 0.05, "test").to_dict()
        assert data["status"] == "refuted"
        assert data["K"] == 20
        assert data["flipped_margin"]["value"] < 0


class TestLearnedComponent:
    """学习组件验证"""

    def test_reachability_certified(self, rng):
        verdict = verify_lec_reachability(identity, gaussian_sampler(0.1), BallSet((0.0, 0.0), 1.0), 0.05, 100, rng)
        assert verdict.certified

    def test_reachability_refuted(self, rng):
        verdict = verify_lec_reachability(identity, gaussian_sampler(0.1), BallSet((5.0, 5.0), 1.0), 0.05, 100, rng)
        assert verdict.status is VerdictStatus.REFUTED

    def test_reachability_straddling_set(self, rng):
        """约一半输出落在集合内"""
        verdict = verify_lec_reachability(identity, gaussian_sampler(1.0), BoxSet((0.0, -10.0), (10.0, 10.0)), 0.05, 200, rng)
        assert verdict.status is VerdictStatus.INCONCLUSIVE

    def test_sublevel_set_scores(self, rng):
        output_set = SublevelSet(lambda y: y[:, 0] - 10.0)
        assert verify_lec_reachability(identity, gaussian_sampler(1.0), output_set, 0.05, 50, rng).certified

    def test_logic_spec_must_be_temporal_free(self, rng):
        with pytest.raises(ArgumentError):
            verify_lec_logic(identity, gaussian_sampler(1.0, 1), parse_formula("G[0,1] x >= 0", TABLE), 0.05, 20, rng)

    def test_logic_spec(self, rng):
        spec = parse_formula("x <= 5 and x >= -5", TABLE)
        assert verify_lec_logic(identity, gaussian_sampler(0.5, 1), spec, 0.05, 100, rng).certified

    def test_output_count_mismatch(self, rng):
        with pytest.raises(ArgumentError):
            verify_lec_reachability(lambda x: x[:-1], gaussian_sampler(1.0), BallSet((0.0, 0.0), 1.0), 0.05, 20, rng)

    def test_extremum(self, rng):
        assert extremum_from_scores([0.3, 2.0, -1.0]) == (2.0, 0.25)
        C, delta_star = estimate_extremum(identity, gaussian_sampler(1.0, 1), 99, rng)
        assert delta_star == pytest.approx(0.01)
        assert np.isfinite(C)


class TestClosedLoop:
    """闭环系统验证"""

    def test_stl_certified_with_margin(self, rng):
        data = 1.0 + rng.uniform(size=(50, 4, 1))
        verdict = verify_leas_stl(TrajectoryDataset(data, Split.CALIBRATE), parse_formula("G[0,3] x >= 0", TABLE), 0.05)
        assert verdict.certified
        assert verdict.margin.value <= -1.0

    def test_stl_trace_too_short(self):
        ds = TrajectoryDataset(np.ones((30, 3, 1)), Split.CALIBRATE)
        with pytest.raises(TraceTooShortError):
            verify_leas_stl(ds, parse_formula("F[0,5] x >= 0", TABLE), 0.05)

    def test_reachability_tube(self):
        data = np.tile(np.array([0.0, 0.5, 1.0])[None, :, None], (40, 1, 1))
        tube = [BoxSet((-1.0,), (2.0,))] * 3
        ds = TrajectoryDataset(data, Split.CALIBRATE)
        assert verify_leas_reachability(ds, tube, 0.05, aggregate="max").certified
        with pytest.raises(ArgumentError):
            verify_leas_reachability(ds, tube, 0.05, aggregate="mean")

    def test_smc_bound(self):
        """S 条满足规约的轨迹给出 S/(K+1)"""
        values = np.array([1.0] * 7 + [-1.0] * 3)
        ds = TrajectoryDataset(values.reshape(10, 1, 1), Split.CALIBRATE)
        assert smc_satisfaction_bound(ds, parse_formula("x >= 0", TABLE)) == pytest.approx(7 / 11)

    def test_smc_requires_calibration(self):
        with pytest.raises(SplitError):
            smc_satisfaction_bound(TrajectoryDataset(np.ones((3, 1, 1)), Split.TRAIN), parse_formula("x >= 0", TABLE))


class TestEstimators:
    """估计器保形化与感知抽象"""

    def test_conformalize_estimator(self, rng):
        truths = rng.normal(size=(40, 5, 2))
        estimates = truths + 0.01
        result = conformalize_estimator(estimates, truths, 0.05)
        assert result.value == pytest.approx(0.01 * np.sqrt(2))

    def test_conformalize_estimator_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            conformalize_estimator(np.zeros((2, 3)), np.zeros((2, 4)), 0.1)

    def test_epsilon_net_covers_domain(self, rng):
        domain = BoxSet((0.0, 0.0), (1.0, 2.0))
        grid = epsilon_net(domain, 0.2)
        points = rng.uniform((0.0, 0.0), (1.0, 2.0), size=(2000, 2))
        nearest = np.linalg.norm(points[:, None] - grid[None], axis=-1).min(axis=1)
        assert nearest.max() <= 0.2

    def test_epsilon_net_size_cap(self):
        with pytest.raises(ArgumentError):
            epsilon_net(BoxSet((0.0, 0.0), (1.0, 1.0)), 1e-3, max_points=100)

    def test_perceptual_abstraction(self, rng):
        def sensor(z, generator):
            return z + 0.05 * generator.standard_normal(size=z.shape)

        domain = BoxSet((0.0, 0.0), (1.0, 1.0))
        bound = perceptual_abstraction(domain, sensor, identity, 0.25, 0.05, 50, 1.0, 1.0, rng)
        assert not bound.is_infinite
        assert bound.bound == pytest.approx(bound.sup_radius + 2 * 0.25)
        assert "lipschitz_unverified" in bound.flags

        degenerate = perceptual_abstraction(domain, sensor, identity, 0.25, 0.05, 5, 1.0, 1.0, rng)
        assert degenerate.is_infinite
