"""轨迹数据集与预测器的测试"""

import numpy as np
import pytest

from cp_guard.data import Split, TrajectoryDataset, partition
from cp_guard.predictors import (
    PredictorConfig,
    PredictorKind,
    RidgeRegressor,
    UntrainedComponent,
    fit,
    predict_onestep_batch,
    predict_onestep_series,
    predict_openloop,
)
from cp_guard.utils.errors import ArgumentError, SplitError

A = np.array([[0.9, 0.1], [-0.1, 0.9]])
B = np.array([0.1, -0.2])


def linear_trajectories(rng: np.random.Generator, K: int = 20, length: int = 30, noise: float = 0.0) -> np.ndarray:
    out = np.empty((K, length, 2))
    out[:, 0] = rng.uniform(-5.0, 5.0, size=(K, 2))
    for t in range(1, length):
        out[:, t] = out[:, t - 1] @ A.T + B + noise * rng.normal(size=(K, 2))
    return out


class TestTrajectoryDataset:
    """数据集构造与划分"""

    def test_two_dimensional_input_is_scalar_state(self):
        ds = TrajectoryDataset(np.zeros((4, 6)), Split.TRAIN)
        assert (ds.K, ds.length, ds.T, ds.dimension) == (4, 6, 5, 1)

    def test_non_finite_rejected(self):
        data = np.zeros((2, 3, 1))
        data[1, 2, 0] = np.inf
        with pytest.raises(ArgumentError):
            TrajectoryDataset(data, Split.TRAIN)

    def test_read_only(self):
        ds = TrajectoryDataset(np.zeros((2, 3, 1)), "calibrate")
        assert ds.split is Split.CALIBRATE
        with pytest.raises(ValueError):
            ds.trajectories[0, 0, 0] = 1.0

    def test_agent_ranges(self):
        ds = TrajectoryDataset(np.zeros((1, 2, 4)), Split.TEST, agents=[(2, 4), (0, 2)])
        assert ds.agents == ((0, 2), (2, 4))
        assert TrajectoryDataset(np.zeros((1, 2, 4)), Split.TEST).agent_ranges == ((0, 4),)

    @pytest.mark.parametrize("agents", [[(0, 1), (2, 4)], [(0, 3)], []])
    def test_invalid_agent_ranges(self, agents):
        with pytest.raises(ArgumentError):
            TrajectoryDataset(np.zeros((1, 2, 4)), Split.TEST, agents=agents)

    def test_require(self):
        ds = TrajectoryDataset(np.zeros((2, 3, 1)), Split.TEST)
        with pytest.raises(SplitError):
            ds.require(Split.TRAIN, Split.TUNE)
        assert ds.require(Split.TEST) is ds

    def test_partition_is_disjoint_and_ordered(self):
        data = np.arange(10.0).reshape(10, 1, 1)
        parts = partition(data, {Split.TRAIN: 3, Split.CALIBRATE: 5})
        assert parts[Split.TRAIN].trajectories[:, 0, 0].tolist() == [0.0, 1.0, 2.0]
        assert parts[Split.CALIBRATE].trajectories[:, 0, 0].tolist() == [3.0, 4.0, 5.0, 6.0, 7.0]
        assert parts[Split.CALIBRATE].split is Split.CALIBRATE

    def test_partition_too_large(self):
        with pytest.raises(ArgumentError):
            partition(np.zeros((3, 2, 1)), {Split.TRAIN: 2, Split.TEST: 2})


class TestPredictorConfig:
    """训练参数"""

    def test_from_dict_ignores_extra_keys(self):
        config = PredictorConfig.from_dict({"kind": "ridge_ar", "order": 3, "train_size": 500})
        assert config.kind is PredictorKind.RIDGE_AR
        assert config.order == 3

    @pytest.mark.parametrize("order", [0, 11])
    def test_order_range(self, order):
        with pytest.raises(ArgumentError):
            PredictorConfig(order=order)

    def test_negative_ridge(self):
        with pytest.raises(ArgumentError):
            PredictorConfig(ridge=-1.0)


class TestRidgeAR:
    """岭回归 AR 预测器"""

    def test_recovers_linear_system(self, rng):
        train = TrajectoryDataset(linear_trajectories(rng), Split.TRAIN)
        model = fit(train, PredictorConfig(order=1, ridge=1e-9))
        trace = linear_trajectories(rng, K=1)[0]
        bundle = predict_openloop(model, trace[:5], horizon=15)
        assert bundle.predictions.shape == (11, 2)
        np.testing.assert_allclose(bundle.predictions, trace[5:16], atol=1e-4)
        np.testing.assert_allclose(bundle.at(15), trace[15], atol=1e-4)

    def test_rejects_calibration_split(self, rng):
        with pytest.raises(SplitError):
            fit(TrajectoryDataset(linear_trajectories(rng), Split.CALIBRATE))

    def test_order_longer_than_trajectory(self):
        with pytest.raises(ArgumentError):
            fit(TrajectoryDataset(np.zeros((3, 2, 1)), Split.TRAIN), PredictorConfig(order=2))

    def test_singular_normal_equation_without_ridge(self):
        """常数轨迹加 λ = 0 时正规方程奇异, 取最小范数解"""
        model = fit(TrajectoryDataset(np.zeros((5, 10, 2)), Split.TRAIN), PredictorConfig(order=2, ridge=0.0))
        assert model.coefficients.shape == (5, 2)
        np.testing.assert_array_equal(model.coefficients, 0.0)

    def test_shared_velocity_without_ridge(self, rng):
        """共同速度的直线轨迹: λ = 0 时特征共线, 单步预测仍然精确"""
        v = np.array([0.3, -0.2])
        t = np.arange(15.0)[None, :, None]

        def lines(K):
            return rng.uniform(-5.0, 5.0, size=(K, 1, 2)) + v * t

        model = fit(TrajectoryDataset(lines(20), Split.TRAIN), PredictorConfig(order=2, ridge=0.0))
        assert np.all(np.isfinite(model.coefficients))
        test = lines(10)
        np.testing.assert_allclose(predict_onestep_batch(model, test), test[:, 2:], atol=1e-9)

    def test_ridge_shrinks_coefficients(self, rng):
        """λ 增大时系数范数严格减小, 且不超过 ‖Xᵀy‖ / λ"""
        data = rng.normal(size=(30, 20, 2))
        X = data[:, :-1].reshape(-1, 2)
        y = data[:, 1:].reshape(-1, 2)
        bound = np.linalg.norm(X.T @ y)
        norms = []
        for ridge in (1.0, 10.0, 100.0, 1000.0):
            model = fit(TrajectoryDataset(data, Split.TRAIN), PredictorConfig(order=1, ridge=ridge, intercept=False))
            norm = np.linalg.norm(model.coefficients)
            assert norm <= bound / ridge
            norms.append(norm)
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_coefficients_are_frozen(self, rng):
        model = fit(TrajectoryDataset(linear_trajectories(rng, noise=0.1), Split.TUNE), PredictorConfig(order=2))
        with pytest.raises(ValueError):
            model.coefficients[0, 0] = 0.0

    def test_onestep_uses_true_prefix(self, rng):
        """训练集上 AR(2) 单步残差不超过过程噪声水平"""
        data = linear_trajectories(rng, K=50, noise=0.05)
        model = fit(TrajectoryDataset(data, Split.TRAIN), PredictorConfig(order=2, ridge=1e-9))
        onestep = predict_onestep_batch(model, data)
        assert onestep.shape == (50, 28, 2)
        assert np.sqrt(np.mean((onestep - data[:, 2:]) ** 2)) < 0.06
        assert predict_onestep_series(model, data[0]).shape == (28, 2)


class TestConstantVelocity:
    """常速度外推"""

    def test_extrapolation(self):
        model = fit(TrajectoryDataset(np.zeros((1, 3, 1)), Split.TRAIN), PredictorConfig(kind="constant_velocity"))
        bundle = predict_openloop(model, [0.0, 1.0, 2.0], horizon=5)
        assert bundle.base_time == 2
        assert bundle.predictions[:, 0].tolist() == [3.0, 4.0, 5.0]

    def test_short_prefix_needs_padding(self):
        model = fit(TrajectoryDataset(np.zeros((1, 3, 1)), Split.TRAIN), PredictorConfig(kind="constant_velocity"))
        with pytest.raises(ArgumentError):
            predict_openloop(model, [1.0], horizon=3)
        padded = predict_openloop(model, [1.0], horizon=3, pad=True)
        assert padded.predictions[:, 0].tolist() == [1.0, 1.0, 1.0]

    def test_bundle_index_range(self):
        model = fit(TrajectoryDataset(np.zeros((1, 3, 1)), Split.TRAIN), PredictorConfig(kind="constant_velocity"))
        bundle = predict_openloop(model, [0.0, 1.0], horizon=4)
        with pytest.raises(ArgumentError):
            bundle.at(1)
        with pytest.raises(ArgumentError):
            bundle.at(5)


class TestComponents:
    """学习组件"""

    def test_ridge_regressor(self, rng):
        X = rng.normal(size=(200, 3))
        W = np.array([[1.0, 0.0], [2.0, -1.0], [0.0, 0.5]])
        model = RidgeRegressor(ridge=1e-9).fit(X, X @ W)
        np.testing.assert_allclose(model.predict(X[:5]), X[:5] @ W, atol=1e-6)

    def test_predict_before_fit(self):
        with pytest.raises(ArgumentError):
            RidgeRegressor().predict(np.zeros((1, 2)))

    def test_untrained_component_outputs_initial_position(self):
        states = np.array([[1.0, 2.0, 0.3], [4.0, 5.0, 0.1]])
        np.testing.assert_array_equal(UntrainedComponent().predict(states), states[:, :2])
