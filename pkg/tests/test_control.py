"""收紧约束、规划求解与导航的测试"""

import numpy as np
import pytest

from cp_guard.abstraction import AbstractionMode
from cp_guard.abstraction.statistical import Abstraction
from cp_guard.control import (
    AffineConstraint,
    ControlEpisodeReport,
    CostSpec,
    DistanceConstraint,
    HorizonMode,
    LinearSystem,
    NavigationTask,
    PenaltySolver,
    ProximityConstraint,
    StepLog,
    calibrate_sensors,
    constraint_values,
    control_episode_closed_loop,
    execute_plan,
    plan_open_loop,
    plan_sensor_navigation,
    sensor_scores,
    summarize_episodes,
    tightening_sound,
    waypoints_reached,
)
from cp_guard.predictors import PredictorModel
from cp_guard.utils.errors import ArgumentError, CPGuardError, InfeasibleError

T = 10
ROBOT = LinearSystem.double_integrator(dim=2, dt=1.0, u_max=1.0)
# 机器人纵坐标须高于环境给出的下界 e 再加 0.5
FLOOR = AffineConstraint([0.0, 1.0, 0.0, 0.0], [-1.0], -0.5)


def abstraction(mode: AbstractionMode, radius: float, base_time: int = 0) -> Abstraction:
    times = tuple(range(base_time + 1, T + 1))
    return Abstraction(mode, base_time, times, np.full((len(times), 1), radius), 0.05, 100, "single_score")


def ball_perturbation(rng: np.random.Generator, radius: float, size: int, dim: int) -> np.ndarray:
    direction = rng.normal(size=(size, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * (radius * rng.uniform(size=size))[:, None]


class TestLinearSystem:
    """线性系统"""

    def test_prediction_matrices_match_rollout(self, rng):
        x0 = rng.normal(size=4)
        inputs = rng.uniform(-1.0, 1.0, size=(6, 2))
        phi, gamma = ROBOT.prediction_matrices(6)
        stacked = phi @ x0 + (gamma @ inputs.reshape(-1))
        np.testing.assert_allclose(stacked, ROBOT.rollout(x0, inputs)[1:], atol=1e-12)

    def test_double_integrator(self):
        x = ROBOT.step(np.array([0.0, 0.0, 1.0, 0.0]), np.array([0.0, 1.0]))
        assert x.tolist() == [1.0, 0.0, 1.0, 1.0]
        assert ROBOT.selector("position") == (0, 1)

    def test_unknown_selector(self):
        with pytest.raises(ArgumentError):
            ROBOT.selector("heading")

    def test_non_square_dynamics(self):
        with pytest.raises(ArgumentError):
            LinearSystem(np.zeros((2, 3)), np.zeros((2, 1)), -1.0, 1.0)


class TestTightening:
    """收紧约束的可靠性: c(x, ê) ≥ L·C 且 ‖e - ê‖ ≤ C 蕴含 c(x, e) ≥ 0"""

    @pytest.mark.parametrize(
        "constraint",
        [
            DistanceConstraint((0, 1), 0.5),
            ProximityConstraint((0, 1), 1.5),
            AffineConstraint([0.3, -1.0, 0.0, 0.0], [0.8, -0.6], 0.2),
        ],
        ids=["distance", "proximity", "affine"],
    )
    def test_sound_on_random_samples(self, rng, constraint):
        premise = 0
        for _ in range(10_000):
            e_hat = rng.uniform(-2.0, 2.0, size=2)
            radius = float(rng.uniform(0.0, 1.0))
            x = np.concatenate([e_hat + rng.normal(scale=1.0, size=2), rng.normal(size=2)])
            e = e_hat + ball_perturbation(rng, radius, 1, 2)[0]
            assert tightening_sound(constraint, x, e_hat, e, radius)
            premise += int(constraint.value(x, e_hat) >= constraint.lipschitz * radius)
        assert premise > 500

    def test_negative_distance_rejected(self):
        with pytest.raises(ArgumentError):
            DistanceConstraint((0, 1), -0.1)


class TestOpenLoopPlanning:
    """开环规划"""

    def test_plan_is_feasible_and_safe(self, rng):
        cost = CostSpec(0.1, 1.0, goal=(5.0, 0.0))
        x0 = np.array([0.0, 1.0, 0.0, 0.0])
        predictions = np.zeros((T, 1))
        solver = PenaltySolver()
        result = plan_open_loop(ROBOT, x0, FLOOR, abstraction(AbstractionMode.OPEN_LOOP, 0.2), predictions, cost, T, solver=solver)
        assert result.status == "optimal"
        assert result.max_violation <= solver.feasibility_tol
        assert np.all(np.abs(result.inputs) <= 1.0)

        environment = np.vstack([np.zeros((1, 1)), rng.uniform(-0.1, 0.1, size=(T, 1))])
        report = execute_plan(ROBOT, x0, result, environment, FLOOR, cost)
        assert report.satisfied
        assert report.constraint_values.shape == (T, 1)
        assert report.to_dict()["satisfied"] is True

    def test_obstacle_avoidance(self):
        cost = CostSpec(0.1, 1.0, goal=(5.0, 0.0))
        obstacle = DistanceConstraint((0, 1), 0.5)
        predictions = np.tile([2.5, 0.4], (T, 1))
        result = plan_open_loop(
            ROBOT, np.zeros(4), obstacle, abstraction(AbstractionMode.OPEN_LOOP, 0.2), predictions, cost, T
        )
        positions = result.states[1:, :2]
        assert np.linalg.norm(positions - predictions, axis=1).min() >= 0.7 - 1e-5

    def test_precheck_rejects_oversized_radius(self):
        reach = ProximityConstraint((0, 1), 0.5)
        with pytest.raises(InfeasibleError) as info:
            plan_open_loop(
                ROBOT, np.zeros(4), reach, abstraction(AbstractionMode.OPEN_LOOP, 0.6), np.zeros((T, 2)), CostSpec(), T
            )
        assert info.value.max_violation == pytest.approx(0.1)

    def test_requires_open_loop_abstraction(self):
        with pytest.raises(ArgumentError):
            plan_open_loop(
                ROBOT, np.zeros(4), FLOOR, abstraction(AbstractionMode.CLOSED_LOOP, 0.1), np.zeros((T, 1)), CostSpec(), T
            )

    def test_infinite_abstraction_rejected(self):
        infinite = Abstraction(AbstractionMode.OPEN_LOOP, 0, tuple(range(1, T + 1)), None, 0.05, 10, "naive")
        with pytest.raises(ArgumentError):
            plan_open_loop(ROBOT, np.zeros(4), FLOOR, infinite, np.zeros((T, 1)), CostSpec(), T)


class TestClosedLoopControl:
    """滚动时域控制"""

    @pytest.mark.parametrize("mode", [HorizonMode.RECEDING, HorizonMode.SHRINKING])
    def test_episode(self, rng, mode):
        cost = CostSpec(0.1, 1.0, goal=(5.0, 0.0))
        report = control_episode_closed_loop(
            ROBOT,
            np.array([0.0, 1.0, 0.0, 0.0]),
            FLOOR,
            abstraction(AbstractionMode.CLOSED_LOOP, 0.1),
            PredictorModel.constant_velocity(1),
            lambda generator: np.zeros((T + 1, 1)),
            cost,
            T,
            4,
            mode,
            rng,
        )
        assert report.states.shape == (T + 1, 4)
        assert report.inputs.shape == (T, 2)
        assert len(report.log) == T
        assert report.always_feasible
        assert report.satisfied

    def test_sampler_failure_is_wrapped(self, rng):
        def broken(generator):
            raise RuntimeError("no data")

        with pytest.raises(CPGuardError) as info:
            control_episode_closed_loop(
                ROBOT,
                np.zeros(4),
                FLOOR,
                abstraction(AbstractionMode.CLOSED_LOOP, 0.1),
                PredictorModel.constant_velocity(1),
                broken,
                CostSpec(),
                T,
                3,
                "receding",
                rng,
            )
        assert "环境采样失败" in str(info.value)

    def test_summary(self):
        def report(satisfied: bool, status: str) -> ControlEpisodeReport:
            values = np.array([[1.0 if satisfied else -1.0]])
            return ControlEpisodeReport(
                np.zeros((1, 2)), np.zeros((2, 4)), np.zeros((2, 1)), values, 0.0, (StepLog(0, 1, status, 1, 0.0),)
            )

        summary = summarize_episodes(
            [report(True, "optimal"), report(False, "optimal"), report(True, "soft"), report(True, "optimal")]
        )
        assert summary.episodes == 4
        assert summary.unconditional == 0.5
        assert summary.given_feasible == pytest.approx(2 / 3)
        assert summary.feasible_episodes == 3
        with pytest.raises(ArgumentError):
            summarize_episodes([])

    def test_constraint_values_per_agent(self):
        states = np.zeros((2, 4))
        environment = np.array([[0.0, 0.0, 0.0, 0.0], [3.0, 4.0, 1.0, 0.0]])
        values = constraint_values(DistanceConstraint((0, 1), 0.5), states, environment, ((0, 2), (2, 4)))
        assert values.tolist() == [[4.5, 0.5]]


class TestSensorNavigation:
    """传感器校准的航点导航"""

    def test_scores_and_calibration(self, rng):
        locations = rng.uniform(0.0, 5.0, size=(100, 2, 2))
        readings = locations + rng.laplace(scale=0.05, size=locations.shape)
        scores = sensor_scores(readings, locations)
        assert scores.shape == (100,)
        result = calibrate_sensors(readings, locations, 0.05)
        assert np.mean(scores <= result.value) >= 0.95

    def test_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            sensor_scores(np.zeros((3, 2, 2)), np.zeros((3, 1, 2)))

    def test_radius_above_epsilon_is_infeasible(self):
        with pytest.raises(InfeasibleError):
            plan_sensor_navigation(ROBOT, np.zeros(4), np.array([[2.0, 1.0], [4.0, 4.0]]), 0.6)

    def test_plan_reaches_waypoints(self):
        task = NavigationTask()
        readings = np.array([[2.0, 1.0], [4.0, 4.0]])
        result = plan_sensor_navigation(ROBOT, np.zeros(4), readings, 0.2, task)
        # 真实位置与读数相距不超过 C 时, 航点一定在 ε 内
        locations = readings + np.array([[0.15, 0.0], [0.0, -0.15]])
        assert waypoints_reached(result.states, locations, task, ROBOT)
        assert np.linalg.norm(result.states[-1, :2] - np.array(task.goal)) <= task.goal_tolerance + 1e-5

    def test_waypoint_time_out_of_range(self):
        with pytest.raises(ArgumentError):
            NavigationTask(waypoint_times=(5, 25))
