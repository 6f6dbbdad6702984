"""
导航控制实验

1. 传感器校准的航点导航: 每次重复校准 C, 对 J 组新读数规划并检查是否真正到达未知位置
2. 避让行人: 行人轨迹由 AR 预测器预测, 开环规划与滚动时域控制分别使用开环与单步抽象收紧
   距离约束, 统计整段安全的比例
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from cp_guard.abstraction.statistical import (
    AbstractionMode,
    AlphaWeights,
    abstraction_single_score,
    normalization_closed_form,
)
from cp_guard.control.navigation import NavigationTask, plan_sensor_navigation, sensor_scores, waypoints_reached
from cp_guard.control.planner import (
    ControlEpisodeReport,
    HorizonMode,
    SafetySummary,
    control_episode_closed_loop,
    execute_plan,
    plan_open_loop,
    summarize_episodes,
)
from cp_guard.control.solver import CostSpec, PenaltySolver
from cp_guard.control.system import DistanceConstraint, LinearSystem
from cp_guard.core.quantile import conformal_quantile
from cp_guard.data.dataset import Split
from cp_guard.predictors.models import PredictorConfig, PredictorModel, fit, predict_openloop
from cp_guard.scenarios.simulators import PedestrianWalkers, SensorNavigation, sample_dataset
from cp_guard.scenarios.statistics import binomial_band, histogram
from cp_guard.task.base_task import BaseExperiment, ExperimentReport, registry
from cp_guard.utils.errors import InfeasibleError

OPEN = AbstractionMode.OPEN_LOOP
CLOSED = AbstractionMode.CLOSED_LOOP


@dataclass(frozen=True, eq=False)
class ObstacleSetup:
    """避让行人实验中各控制过程共用的对象"""

    obstacle: PedestrianWalkers
    system: LinearSystem
    constraint: DistanceConstraint
    cost: CostSpec
    x0: np.ndarray
    model: PredictorModel
    alpha_closed: AlphaWeights
    alpha_open: AlphaWeights
    solver: PenaltySolver


@registry.register
class NavigationControlExperiment(BaseExperiment):
    """航点导航与避让行人的安全率"""

    name = "navigation-control"
    description = "传感器校准的航点导航与避让行人的开环/滚动时域控制, 统计约束满足率"
    defaults = {
        "repetitions": 50,
        "k": 1000,
        "test_size": 20,
        "delta": 0.05,
        "epsilon": 0.6,
        "episodes": 300,
        "open_loop_episodes": 50,
        "env_train_size": 500,
        "env_tune_size": 500,
        "env_k": 500,
        "horizon": 25,
        "receding_horizon": 8,
        "mode": "receding",
        "safe_distance": 0.5,
        "obstacle_switch_prob": 0.0,
    }

    def execute(self) -> ExperimentReport:
        report = self.new_report()
        self._waypoint_navigation(report)
        self._obstacle_avoidance(report)
        return report

    # ------------------------------------------------------------------
    # 航点导航

    def _waypoint_navigation(self, report: ExperimentReport) -> None:
        scenario = SensorNavigation()
        system = LinearSystem.double_integrator(dim=2, dt=1.0, u_max=1.0)
        task = NavigationTask(epsilon=float(self.params["epsilon"]))
        solver = PenaltySolver()
        K, J = int(self.params["k"]), int(self.params["test_size"])
        x0 = np.zeros(system.state_dim)

        def trial(n: int):
            streams = self.repetition_streams(n).child("waypoints")
            calib = sample_dataset(scenario, K, streams, Split.CALIBRATE)
            C = conformal_quantile(sensor_scores(*scenario.unpack(calib.trajectories)), self.delta).as_float()
            readings, locations = scenario.unpack(sample_dataset(scenario, J, streams, Split.TEST).trajectories)
            reached = []
            for s, r in zip(readings, locations):
                try:
                    result = plan_sensor_navigation(system, x0, s, C, task, solver)
                except InfeasibleError as e:
                    self.logger.warning(f"航点导航规划不可行: {e}")
                    reached.append(False)
                    continue
                reached.append(waypoints_reached(result.states, r, task, system))
            return C, float(np.mean(reached))

        results = self.map_repetitions(trial)
        cec = np.array([r[1] for r in results])
        report.coverage["waypoints"] = float(cec.mean())
        report.histograms["waypoints"] = histogram(cec)
        report.summary["waypoints_mean_C"] = float(np.mean([r[0] for r in results]))
        self._rows(report, "waypoints", [{"C": c} for c, _ in results], cec)
        self.logger.info(f"航点导航: 到达率 {cec.mean():.4f}, 平均 C={report.summary['waypoints_mean_C']:.4f}")

    # ------------------------------------------------------------------
    # 避让行人

    def obstacle_setup(self) -> ObstacleSetup:
        """构造行人场景与机器人模型, 训练行人预测器并在 tune 集上求闭式 α"""
        obstacle = PedestrianWalkers(
            n_agents=1,
            horizon=int(self.params["horizon"]),
            switch_prob=float(self.params["obstacle_switch_prob"]),
            start_region=((4.5, 0.0), (5.5, 1.0)),
            goal_region=((4.5, 9.0), (5.5, 10.0)),
            observe_velocity=True,
        )
        system = LinearSystem.double_integrator(dim=2, dt=obstacle.dt, u_max=2.0)

        # 行人状态含速度, AR(1) 只需当前状态即可预测, 抽象基准时刻取 0
        train = sample_dataset(obstacle, int(self.params["env_train_size"]), self.streams, Split.TRAIN, agents=False)
        tune = sample_dataset(obstacle, int(self.params["env_tune_size"]), self.streams, Split.TUNE, agents=False)
        model = fit(train, PredictorConfig(order=1))
        return ObstacleSetup(
            obstacle=obstacle,
            system=system,
            constraint=DistanceConstraint(system.selector("position"), float(self.params["safe_distance"])),
            cost=CostSpec(input_weight=0.1, goal_weight=1.0, goal=(10.0, 5.0)),
            x0=np.array([0.0, 5.0, 0.0, 0.0]),
            model=model,
            alpha_closed=normalization_closed_form(tune, model, CLOSED, base_time=0),
            alpha_open=normalization_closed_form(tune, model, OPEN, base_time=0),
            solver=PenaltySolver(),
        )

    def _episode_calibration(self, setup: ObstacleSetup, n: int):
        streams = self.repetition_streams(n).child("obstacle")
        calib = sample_dataset(setup.obstacle, int(self.params["env_k"]), streams, Split.CALIBRATE, agents=False)
        return streams, calib

    def closed_loop_episode(self, setup: ObstacleSetup, n: int) -> ControlEpisodeReport:
        """第 n 个滚动时域控制过程, 每个过程重新采样校准集"""
        streams, calib = self._episode_calibration(setup, n)
        abstraction = abstraction_single_score(calib, setup.model, self.delta, setup.alpha_closed, CLOSED, base_time=0)
        return control_episode_closed_loop(
            setup.system,
            setup.x0,
            setup.constraint,
            abstraction,
            setup.model,
            setup.obstacle.simulate,
            setup.cost,
            setup.obstacle.T,
            int(self.params["receding_horizon"]),
            HorizonMode(self.params["mode"]),
            streams.generator("environment"),
            agent_ranges=setup.obstacle.position_ranges,
            solver=setup.solver,
        )

    def open_loop_episode(self, setup: ObstacleSetup, n: int) -> Optional[ControlEpisodeReport]:
        """第 n 个开环规划过程, 与闭环使用同一条行人轨迹; 不可行时返回 None"""
        streams, calib = self._episode_calibration(setup, n)
        abstraction = abstraction_single_score(calib, setup.model, self.delta, setup.alpha_open, OPEN, base_time=0)
        env = setup.obstacle.simulate(streams.generator("environment"))
        T = setup.obstacle.T
        ranges = setup.obstacle.position_ranges
        try:
            result = plan_open_loop(
                setup.system,
                setup.x0,
                setup.constraint,
                abstraction,
                predict_openloop(setup.model, env[:1], T),
                setup.cost,
                T,
                agent_ranges=ranges,
                solver=setup.solver,
            )
        except InfeasibleError as e:
            self.logger.warning(f"开环规划不可行: {e}")
            return None
        return execute_plan(setup.system, setup.x0, result, env, setup.constraint, setup.cost, ranges)

    def _obstacle_avoidance(self, report: ExperimentReport) -> None:
        setup = self.obstacle_setup()

        closed = self.map_repetitions(lambda n: self.closed_loop_episode(setup, n), int(self.params["episodes"]))
        summary = summarize_episodes(closed)
        report.coverage["closed_loop"] = summary.unconditional
        report.summary["closed_loop"] = summary.to_dict()
        report.summary["closed_loop_band"] = list(binomial_band(1.0 - self.delta, summary.episodes))
        self._rows(
            report,
            "closed_loop",
            [{"satisfied": r.satisfied, "feasible": r.always_feasible, "cost": r.cost} for r in closed],
            np.array([float(r.satisfied and r.always_feasible) for r in closed]),
        )

        opened = self.map_repetitions(lambda n: self.open_loop_episode(setup, n), int(self.params["open_loop_episodes"]))
        safe = np.array([float(r is not None and r.satisfied) for r in opened])
        feasible = [r for r in opened if r is not None]
        report.coverage["open_loop"] = float(safe.mean())
        report.summary["open_loop"] = SafetySummary(
            len(opened),
            float(safe.mean()),
            None if not feasible else float(np.mean([r.satisfied for r in feasible])),
            len(feasible),
        ).to_dict()
        self._rows(
            report,
            "open_loop",
            [
                {"satisfied": r is not None and r.satisfied, "feasible": r is not None, "cost": None if r is None else r.cost}
                for r in opened
            ],
            safe,
        )
        self.logger.info(
            f"避让行人: 闭环安全率 {summary.unconditional:.4f} (可行 {summary.feasible_episodes}/{summary.episodes}), "
            f"开环安全率 {safe.mean():.4f}"
        )

    def _rows(self, report: ExperimentReport, variant: str, rows, outcomes: np.ndarray) -> None:
        c_frame = pd.DataFrame([{"variant": variant, "repetition": n, **row} for n, row in enumerate(rows)])
        cec_frame = pd.DataFrame({"variant": variant, "repetition": np.arange(len(outcomes)), "cec": outcomes})
        report.c_values = c_frame if report.c_values is None else pd.concat([report.c_values, c_frame], ignore_index=True)
        report.cec = cec_frame if report.cec is None else pd.concat([report.cec, cec_frame], ignore_index=True)
