"""
命令服务

每个 CLI 命令对应一个方法, 返回进程退出码; 库函数抛出的 CPGuardError 在 run 中统一记录并返回 1
"""

from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cp_guard.abstraction.statistical import (
    AbstractionMode,
    AlphaWeights,
    abstraction_naive,
    abstraction_single_score,
    normalization_closed_form,
    optimize_alpha,
    prediction_errors,
)
from cp_guard.control.navigation import sensor_scores
from cp_guard.control.solver import PenaltySolver
from cp_guard.core.quantile import conformal_quantile
from cp_guard.core.robust import ShiftSpec
from cp_guard.data.dataset import Split, TrajectoryDataset
from cp_guard.monitoring.predictive import MonitorMethod, calibrate_monitor, monitor_batch
from cp_guard.predictors.models import PredictorConfig, PredictorModel, fit
from cp_guard.scenarios.io import read_dataset, write_report, write_table
from cp_guard.scenarios.simulators import (
    AIRCRAFT_SPEC,
    CARTPOLE_SPEC,
    NoisyUnicycle,
    Scenario,
    SensorNavigation,
    build_scenario,
    sample_dataset,
    unicycle_safe_set,
)
from cp_guard.stl.formula import Formula
from cp_guard.stl.parser import parse_formula, signal_table
from cp_guard.stl.semantics import batch_robustness
from cp_guard.task.base_task import registry
from cp_guard.task.control_task import NavigationControlExperiment
from cp_guard.task.monitoring_task import AIRCRAFT_SIGNALS
from cp_guard.task.runner import run_experiment
from cp_guard.task.verification_task import CARTPOLE_SIGNALS, unicycle_components
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ArgumentError, CPGuardError
from cp_guard.utils.logger import get_logger
from cp_guard.utils.rng import RandomStreams
from cp_guard.verification.offline import Verdict, smc_satisfaction_bound, verify_lec_reachability, verify_leas_stl
from cp_guard.verification.sets import SublevelSet

# 场景自带的默认规约
DEFAULT_SPECS: Dict[str, Tuple[str, Sequence[str]]] = {
    "cartpole": (CARTPOLE_SPEC, CARTPOLE_SIGNALS),
    "aircraft-surrogate": (AIRCRAFT_SPEC, AIRCRAFT_SIGNALS),
}


class CommandService:
    """命令服务"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        初始化命令服务

        Args:
            config: 已校验的配置字典 (CLI 参数已合并)
        """
        self.config: Dict[str, Any] = dict(config or {})
        self.seed = int(self.config.get("seed", Config.DEFAULT_SEED))
        self.delta = float(self.config.get("delta", Config.DEFAULT_DELTA))
        self.out_dir = Path(self.config.get("out", Config.OUTPUT_DIR))
        self.streams = RandomStreams(self.seed)
        self.logger = get_logger("service")

    def run(self, command: str, **kwargs) -> int:
        """
        执行命令

        Args:
            command: 命令名称
            **kwargs: 传给命令方法的参数

        Returns:
            int: 退出码; 验证类命令为 0 / 2 / 3, 出错为 1
        """
        handlers: Dict[str, Callable[..., int]] = {
            "calibrate": self.calibrate,
            "verify-lec": self.verify_lec,
            "verify-leas": self.verify_leas,
            "abstract": self.abstract,
            "monitor": self.monitor,
            "control": self.control,
            "experiment": self.experiment,
            "smc": self.smc,
        }
        if command not in handlers:
            self.logger.error(f"未知命令: {command}")
            return 1
        try:
            self.logger.info(f"执行命令: {command}, 种子 {self.seed}, δ={self.delta}")
            return handlers[command](**kwargs)
        except CPGuardError as e:
            self.logger.error(f"命令 {command} 执行失败: {e}")
            return 1

    # ------------------------------------------------------------------
    # 配置辅助

    def _section(self, name: str) -> Dict[str, Any]:
        return dict(self.config.get(name) or {})

    def _k(self, default: int = 1000) -> int:
        return int(self.config.get("k", default))

    def _scenario(self, default: str) -> Scenario:
        section = self._section("scenario")
        return build_scenario(section.get("name", default), section.get("params"))

    def _dataset(self, scenario: Scenario, split: Split, K: int, agents: bool = True) -> TrajectoryDataset:
        """dataset 节给出 CSV 时读取文件, 否则由场景采样"""
        section = self._section("dataset")
        key = "test_path" if split is Split.TEST else "path"
        agents = section.get("agents", agents)
        if key in section:
            ranges = scenario.agents if agents else None
            return read_dataset(section[key], split, ranges)
        return sample_dataset(scenario, K, self.streams, split, agents)

    def _spec(self, scenario: Scenario) -> Formula:
        section = self._section("stl")
        if section:
            return parse_formula(section["formula"], signal_table(section["signals"]))
        if scenario.name not in DEFAULT_SPECS:
            raise ArgumentError(f"场景 {scenario.name} 没有默认规约, 请在配置的 stl 节给出 formula 与 signals")
        formula, signals = DEFAULT_SPECS[scenario.name]
        return parse_formula(formula, signal_table(signals))

    def _predictor(self, scenario: Scenario, agents: bool = True) -> Tuple[PredictorModel, Dict[str, Any]]:
        section = self._section("predictor")
        train = self._dataset(scenario, Split.TRAIN, int(section.get("train_size", 500)), agents)
        return fit(train, PredictorConfig.from_dict(section)), section

    def _solver(self) -> PenaltySolver:
        return PenaltySolver(**self._section("solver"))

    def _write(self, payload: Dict[str, Any]) -> Path:
        path = write_report(payload, self.out_dir)
        self.logger.info(f"结果已写入: {path}")
        return path

    def _verdict(self, verdict: Verdict, extra: Optional[Dict[str, Any]] = None) -> int:
        self._write({**verdict.to_dict(), **(extra or {}), "seed": self.seed})
        self.logger.info(f"验证结论: {verdict.status.value}, C={verdict.margin.as_float():.6g}")
        return verdict.status.exit_code

    # ------------------------------------------------------------------
    # 命令

    def calibrate(self) -> int:
        """保形分位数: 读取 scores 节的 CSV, 或在传感器场景上采样校准"""
        section = self._section("scores")
        if section:
            frame = pd.read_csv(section["path"])
            column = section.get("column", frame.columns[0])
            if column not in frame.columns:
                raise ArgumentError(f"分数文件中没有列 {column}")
            scores = frame[column].to_numpy(dtype=float)
            source = str(section["path"])
        else:
            scenario = self._scenario("sensor-navigation")
            if not isinstance(scenario, SensorNavigation):
                raise ArgumentError("calibrate 需要 scores 节或 sensor-navigation 场景")
            calib = sample_dataset(scenario, self._k(), self.streams, Split.CALIBRATE)
            scores = sensor_scores(*scenario.unpack(calib.trajectories))
            source = scenario.name

        result = conformal_quantile(scores, self.delta)
        self._write({"quantile": result.to_dict(), "delta": self.delta, "source": source, "seed": self.seed})
        self.logger.info(f"校准完成: K={result.K}, C={result.as_float():.6g}")
        return 0

    def verify_lec(self) -> int:
        """独轮车终点预测组件的输出可达性验证"""
        scenario = self._scenario("noisy-unicycle")
        if not isinstance(scenario, NoisyUnicycle):
            raise ArgumentError("verify-lec 只支持 noisy-unicycle 场景")
        section = self._section("verification")
        name = section.get("component", "fitted")
        components = unicycle_components(
            scenario, int(section.get("train_size", 1000)), self.streams.child("verify-lec").generator(Split.TRAIN.value)
        )
        verdict = verify_lec_reachability(
            components[name],
            scenario.sample_inputs,
            SublevelSet(unicycle_safe_set),
            self.delta,
            self._k(),
            self.streams.child("verify-lec").generator(Split.CALIBRATE.value),
        )
        return self._verdict(verdict, {"component": name})

    def verify_leas(self) -> int:
        """闭环系统轨迹的 STL 规约验证"""
        scenario = self._scenario("cartpole")
        spec = self._spec(scenario)
        return self._verdict(verify_leas_stl(self._dataset(scenario, Split.CALIBRATE, self._k()), spec, self.delta))

    def _alpha(self, scenario: Scenario, model: PredictorModel, mode: AbstractionMode, base_time, agents) -> AlphaWeights:
        kind = self._section("abstraction").get("alpha", "closed_form")
        predictor = self._section("predictor")
        if kind == "ones":
            calib = self._dataset(scenario, Split.CALIBRATE, self._k(), agents)
            shape = prediction_errors(calib, model, mode, base_time).values.shape[1:]
            return AlphaWeights(np.ones(shape), mode)
        tune = self._dataset(scenario, Split.TUNE, int(predictor.get("tune_size", 500)), agents)
        if kind == "optimized":
            return optimize_alpha(tune, model, self.delta, mode, base_time, seed=self.seed)
        return normalization_closed_form(tune, model, mode, base_time)

    def abstract(self) -> int:
        """统计抽象: 并集界或单一分数构造"""
        scenario = self._scenario("pedestrian-walkers")
        section = self._section("abstraction")
        agents = bool(section.get("agents", True))
        mode = AbstractionMode(section.get("mode", AbstractionMode.OPEN_LOOP.value))
        base_time = section.get("base_time")
        model, _ = self._predictor(scenario, agents)
        calib = self._dataset(scenario, Split.CALIBRATE, self._k(), agents)

        if section.get("method", "single_score") == "naive":
            abstraction = abstraction_naive(calib, model, self.delta, mode, base_time)
        else:
            alpha = self._alpha(scenario, model, mode, base_time, agents)
            abstraction = abstraction_single_score(calib, model, self.delta, alpha, mode, base_time)
        if abstraction.is_infinite:
            self.logger.warning(f"校准集过小, 抽象半径为无穷: K={calib.K}")
        self._write({"abstraction": abstraction.to_dict(), "scenario": scenario.name, "seed": self.seed})
        return 0

    def monitor(self) -> int:
        """预测式监控: 校准后对测试轨迹前缀计算 ρ*"""
        scenario = self._scenario("aircraft-surrogate")
        spec = self._spec(scenario)
        section = self._section("monitor")
        t = int(section.get("t", scenario.T // 2))
        method = MonitorMethod(section.get("method", MonitorMethod.ACCURATE.value))
        shift = None
        if "epsilon" in section:
            shift = ShiftSpec(section.get("divergence", "tv"), float(section["epsilon"]))

        model, _ = self._predictor(scenario)
        calib = self._dataset(scenario, Split.CALIBRATE, self._k())
        calibration = calibrate_monitor(calib, model, spec, t, self.delta, method, shift=shift)
        test = self._dataset(scenario, Split.TEST, int(section.get("test_size", 200)))
        rho_star = monitor_batch(calibration, test.trajectories[:, : t + 1], model)
        actual = batch_robustness(spec, test.trajectories)
        covered = actual >= rho_star

        write_table(
            {"traj_id": np.arange(test.K), "rho_star": rho_star, "rho": actual, "covered": covered},
            self.out_dir / "monitor.csv",
        )
        self._write(
            {
                "method": method.value,
                "t": t,
                "delta": self.delta,
                "margin": calibration.margin,
                "shift": None if shift is None else {"divergence": shift.divergence.value, "epsilon": shift.epsilon},
                "coverage": float(covered.mean()),
                "seed": self.seed,
            }
        )
        self.logger.info(f"监控完成 ({method.value}, t={t}): 覆盖率 {covered.mean():.4f}")
        return 0

    def control(self) -> int:
        """避让行人场景上的单个控制过程 (闭环滚动时域或开环)"""
        section = self._section("control")
        experiment = NavigationControlExperiment(params=section.get("params"), seed=self.seed, delta=self.delta)
        setup = experiment.obstacle_setup()
        episode = int(section.get("episode", 0))
        if section.get("loop", "closed") == "open":
            report = experiment.open_loop_episode(setup, episode)
            if report is None:
                self._write({"loop": "open", "episode": episode, "feasible": False, "seed": self.seed})
                return 0
        else:
            report = experiment.closed_loop_episode(setup, episode)

        write_table(
            {
                "t": np.arange(report.states.shape[0]),
                **{f"x{i}": report.states[:, i] for i in range(report.states.shape[1])},
                **{f"e{i}": report.environment[:, i] for i in range(report.environment.shape[1])},
            },
            self.out_dir / "episode.csv",
        )
        self._write({"loop": section.get("loop", "closed"), "episode": episode, **report.to_dict(), "seed": self.seed})
        self.logger.info(f"控制过程完成: 满足约束={report.satisfied}, 代价 {report.cost:.4f}")
        return 0

    def experiment(self, name: str) -> int:
        """运行注册的实验"""
        section = self._section("experiment")
        section["name"] = name
        params = dict(section.get("params") or {})
        defaults = registry.get(name).defaults
        if "k" in self.config and "k" in defaults:
            params["k"] = int(self.config["k"])
        section["params"] = params
        config = {**self.config, "experiment": section}
        report = run_experiment(config, self.out_dir)
        self.logger.info(f"实验 {name} 覆盖率: {report.coverage}")
        return 0

    def smc(self) -> int:
        """统计模型检验: 规约满足概率的下界"""
        scenario = self._scenario("cartpole")
        spec = self._spec(scenario)
        dataset = self._dataset(scenario, Split.CALIBRATE, self._k())
        bound = smc_satisfaction_bound(dataset, spec)
        self._write({"bound": bound, "K": dataset.K, "seed": self.seed})
        self.logger.info(f"统计模型检验完成: K={dataset.K}, 满足概率下界 {bound:.6f}")
        return 0
