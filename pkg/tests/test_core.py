"""保形分位数、鲁棒与自适应变体的测试"""

import math

import numpy as np
import pytest
from scipy import stats

from cp_guard.core import (
    AdaptiveState,
    BoundVariant,
    ShiftSpec,
    adaptive_quantile,
    adaptive_update,
    beta_conditional_params,
    calibration_conditional_quantile,
    conformal_quantile,
    conformal_quantile_extended,
    gaussian_tv_distance,
    min_calibration_size,
    monte_carlo_tv_distance,
    quantile_lp,
    robust_adjusted_level,
    robust_quantile,
    run_adaptive,
)
from cp_guard.scenarios.statistics import beta_ks_distance, binomial_band
from cp_guard.utils.errors import ArgumentError


def _oracle(scores: np.ndarray, delta: float):
    p = math.ceil((scores.size + 1) * (1 - delta) - 1e-9)
    return None if p > scores.size else float(np.sort(scores)[p - 1])


class TestConformalQuantile:
    """分割保形分位数"""

    def test_rank_of_small_set(self):
        """K=19, δ=0.05 时 p=19, 取最大值"""
        result = conformal_quantile(np.arange(1.0, 20.0), 0.05)
        assert result.value == 19.0
        assert result.rank == 19
        assert result.K == 19

    def test_too_few_scores_is_infinite(self):
        """K=10, δ=0.05 时 p=11 > K"""
        result = conformal_quantile(np.arange(10.0), 0.05)
        assert result.is_infinite
        assert result.as_float() == math.inf
        assert result.covers(1e300)

    def test_matches_order_statistic_oracle(self, rng):
        """随机实例与排序法结果完全一致"""
        for _ in range(10_000):
            K = int(rng.integers(1, 60))
            delta = float(rng.uniform(0.01, 0.6))
            scores = rng.normal(size=K)
            expected = _oracle(scores, delta)
            result = conformal_quantile(scores, delta)
            if expected is None:
                assert result.is_infinite
            else:
                assert result.value == expected

    def test_ties_are_handled(self):
        """并列值不影响结果"""
        assert conformal_quantile([2.0] * 30, 0.1).value == 2.0

    def test_floating_point_rank(self):
        """20 × 0.95 的浮点误差不能把秩推到 20"""
        result = conformal_quantile(np.arange(19.0), 0.05)
        assert result.rank == 19

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
    def test_delta_out_of_range(self, delta):
        with pytest.raises(ArgumentError):
            conformal_quantile([1.0, 2.0], delta)

    def test_empty_scores(self):
        with pytest.raises(ArgumentError):
            conformal_quantile([], 0.1)

    def test_nan_scores(self):
        with pytest.raises(ArgumentError):
            conformal_quantile([1.0, float("nan")], 0.1)

    def test_scaled_and_order(self):
        finite = conformal_quantile(np.arange(1.0, 20.0), 0.05)
        infinite = conformal_quantile(np.arange(10.0), 0.05)
        assert finite.scaled(2.0).value == 38.0
        assert finite <= infinite
        assert not infinite <= finite

    def test_min_calibration_size(self):
        assert min_calibration_size(0.05) == 19
        assert min_calibration_size(0.1) == 9
        assert conformal_quantile(np.zeros(19), 0.05).is_finite
        assert conformal_quantile(np.zeros(18), 0.05).is_infinite


class TestExtendedScores:
    """含 ±inf 的分数"""

    def test_negative_infinity_is_kept(self):
        result = conformal_quantile_extended(np.full(20, -math.inf), 0.05)
        assert result.value == -math.inf
        assert "extended_real" in result.flags

    def test_positive_infinity_is_unbounded(self):
        scores = np.concatenate([np.zeros(10), np.full(10, math.inf)])
        result = conformal_quantile_extended(scores, 0.05)
        assert result.is_infinite
        assert "unbounded_score" in result.flags

    def test_finite_scores_delegate(self, rng):
        scores = rng.normal(size=50)
        assert conformal_quantile_extended(scores, 0.1) == conformal_quantile(scores, 0.1)


class TestCalibrationConditional:
    """校准条件保证与 Beta 参数"""

    def test_beta_params(self):
        assert beta_conditional_params(100, 0.05) == (96, 5)

    def test_beta_params_degenerate(self):
        with pytest.raises(ArgumentError):
            beta_conditional_params(10, 0.05)

    @pytest.mark.parametrize("variant", [BoundVariant.HOEFFDING, BoundVariant.BERNSTEIN])
    def test_conditional_is_more_conservative(self, rng, variant):
        scores = rng.exponential(size=1000)
        assert calibration_conditional_quantile(scores, 0.05, 0.1, variant).value >= conformal_quantile(scores, 0.05).value

    def test_level_above_one_is_infinite(self):
        result = calibration_conditional_quantile(np.arange(20.0), 0.05, 0.1)
        assert result.is_infinite
        assert "level_exceeds_one" in result.flags

    def test_quantile_lp(self):
        """pinball 损失的最优解"""
        assert quantile_lp([3.0, 1.0, 2.0, 4.0], 0.5) == 2.0
        assert quantile_lp([3.0, 1.0, 2.0, 4.0], 0.6) == 3.0


@pytest.mark.slow
class TestCoverageStatistics:
    """边际覆盖率与条件覆盖率的统计检验"""

    def test_marginal_coverage_band(self, rng):
        """K=100, δ=0.05, 5000 次重新校准的覆盖率落在 [0.95, 0.96] 的 3σ 带内"""
        K, delta, N = 100, 0.05, 5000
        covered = np.empty(N, dtype=bool)
        for n in range(N):
            scores = rng.uniform(size=K + 1)
            covered[n] = conformal_quantile(scores[:K], delta).covers(scores[K])
        lo, _ = binomial_band(0.95, N)
        _, hi = binomial_band(0.96, N)
        assert lo <= covered.mean() <= hi

    def test_conditional_coverage_follows_beta(self, rng):
        """均匀分数下条件覆盖率恰为 C, 其经验分布与 Beta(96, 5) 的 KS 距离不超过 0.1"""
        K, delta, N = 100, 0.05, 500
        cec = np.array([conformal_quantile(rng.uniform(size=K), delta).value for _ in range(N)])
        assert beta_ks_distance(cec, K, delta) <= 0.1


class TestRobustQuantile:
    """分布偏移下的鲁棒分位数"""

    def test_zero_radius_reduces_to_vanilla(self, rng):
        for _ in range(1000):
            K = int(rng.integers(1, 80))
            delta = float(rng.uniform(0.02, 0.5))
            scores = rng.normal(size=K)
            robust = robust_quantile(scores, delta, ShiftSpec.tv(0.0))
            vanilla = conformal_quantile(scores, delta)
            assert robust.as_float() == vanilla.as_float()

    @pytest.mark.parametrize("make", [ShiftSpec.tv, ShiftSpec.kl])
    def test_monotone_in_radius(self, rng, make):
        scores = rng.normal(size=1000)
        values = [robust_quantile(scores, 0.1, make(eps)).as_float() for eps in np.linspace(0.0, 0.08, 9)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_degenerate_level(self):
        """1-δ+ε > 1 时水平退化, 默认取最大分数并带标记"""
        scores = np.arange(10.0)
        assert robust_adjusted_level(10, 0.05, ShiftSpec.tv(0.1)).degenerate
        result = robust_quantile(scores, 0.05, ShiftSpec.tv(0.1))
        assert result.value == 9.0
        assert result.rank == 10
        assert "degenerate_max_score" in result.flags
        infinite = robust_quantile(scores, 0.05, ShiftSpec.tv(0.1), on_degenerate="infinite")
        assert infinite.is_infinite
        assert "degenerate_level" in infinite.flags

    def test_dominating_shift_keeps_finite_margin(self):
        """ε 压过置信预算时 C̃ 仍是有限的最大分数"""
        scores = np.linspace(-1.0, 3.0, 100)
        assert robust_adjusted_level(100, 0.05, ShiftSpec.tv(0.95)).degenerate
        result = robust_quantile(scores, 0.05, ShiftSpec.tv(0.95))
        assert result.is_finite
        assert result.value == 3.0

    def test_unknown_degenerate_policy(self):
        with pytest.raises(ArgumentError):
            robust_quantile([1.0, 2.0], 0.1, ShiftSpec.tv(0.0), on_degenerate="clip")

    def test_negative_radius_rejected(self):
        with pytest.raises(ArgumentError):
            ShiftSpec.tv(-0.1)

    def test_kl_adjusted_level_tightens(self):
        level = robust_adjusted_level(1000, 0.1, ShiftSpec.kl(0.01))
        assert not level.degenerate
        assert level.delta_tilde < 0.1


class TestTotalVariation:
    """高斯分布之间的全变差距离"""

    def test_identical_means(self):
        assert gaussian_tv_distance([0.0, 0.0], [0.0, 0.0], np.eye(2)) == 0.0

    def test_aircraft_initial_shift(self):
        """N(1000,10²)×N(650,5²) 与 N(998,10²)×N(651,5²)"""
        tv = gaussian_tv_distance([1000.0, 650.0], [998.0, 651.0], np.diag([100.0, 25.0]))
        assert tv == pytest.approx(0.1125, abs=1e-3)
        assert tv <= 0.129

    def test_monte_carlo_agrees(self, rng):
        p, q = stats.norm(0.0, 1.0), stats.norm(0.5, 1.0)
        estimate = monte_carlo_tv_distance(p.logpdf, q.logpdf, p.rvs(size=200_000, random_state=rng))
        assert estimate == pytest.approx(gaussian_tv_distance([0.0], [0.5], [[1.0]]), abs=0.01)


class TestAdaptive:
    """自适应保形预测"""

    def test_update_rule(self):
        state = adaptive_update(AdaptiveState.start(0.1, 0.01), 1)
        assert state.delta_t == pytest.approx(0.091)
        assert state.miss_history == (1,)

    def test_invalid_miss(self):
        with pytest.raises(ArgumentError):
            adaptive_update(AdaptiveState.start(0.1, 0.01), 2)

    def test_empty_history(self):
        result = adaptive_quantile([], AdaptiveState.start(0.1, 0.01))
        assert result.is_infinite
        assert "empty_history" in result.flags

    def test_stream_matches_stepwise_updates(self, rng):
        scores = rng.normal(size=200)
        final = run_adaptive(scores, 0.02, 0.1)
        state = AdaptiveState.start(0.1, 0.02)
        for n, score in enumerate(scores):
            miss = int(not adaptive_quantile(scores[:n], state).covers(score))
            state = adaptive_update(state, miss)
        assert final.miss_history == state.miss_history
        assert final.delta_t == pytest.approx(state.delta_t)

    @pytest.mark.slow
    def test_long_run_miss_rate(self, rng):
        final = run_adaptive(rng.uniform(size=5000), 0.01, 0.1)
        assert abs(final.miss_rate - 0.1) < 0.03
