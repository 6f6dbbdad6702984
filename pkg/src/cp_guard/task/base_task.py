"""
基础实验类和实验注册表
"""

import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, ClassVar, Dict, List, Optional, Type, TypeVar

import pandas as pd

from cp_guard.scenarios.io import write_artifacts
from cp_guard.scenarios.statistics import Histogram
from cp_guard.utils.config import Config
from cp_guard.utils.errors import ConfigError, CPGuardError, UnknownExperimentError
from cp_guard.utils.logger import get_logger
from cp_guard.utils.rng import RandomStreams

R = TypeVar("R")


@dataclass
class ExperimentReport:
    """
    一次实验的汇总

    c_values / cec 为长表, coverage 为各变体的 EC, summary 放实验特有的统计量
    """

    name: str
    seed: int
    delta: float
    params: Dict[str, Any]
    coverage_target: float
    coverage: Dict[str, float] = field(default_factory=dict)
    c_values: Optional[pd.DataFrame] = None
    cec: Optional[pd.DataFrame] = None
    histograms: Dict[str, Histogram] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    runtime: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "delta": self.delta,
            "params": self.params,
            "coverage_target": self.coverage_target,
            "coverage": self.coverage,
            "summary": self.summary,
            "histograms": {
                name: {"edges": h.edges.tolist(), "counts": h.counts.tolist()} for name, h in self.histograms.items()
            },
            "runtime": self.runtime,
        }

    def write(self, out_dir) -> Dict[str, Path]:
        return write_artifacts(out_dir, self.to_dict(), self.c_values, self.cec, self.histograms)


class BaseExperiment(ABC):
    """基础实验类"""

    name: ClassVar[str] = "experiment"
    description: ClassVar[str] = ""
    defaults: ClassVar[Dict[str, Any]] = {}

    def __init__(
        self,
        params: Optional[Dict[str, Any]] = None,
        seed: Optional[int] = None,
        delta: Optional[float] = None,
        repetitions: Optional[int] = None,
        workers: int = 1,
    ):
        """
        初始化实验

        Args:
            params: 实验参数, 覆盖 defaults
            seed: 随机种子, 默认 Config.DEFAULT_SEED
            delta: 失效概率, 默认取实验自身的默认值或 Config.DEFAULT_DELTA
            repetitions: 重复次数 N, 覆盖参数中的 repetitions
            workers: 并行执行重复实验的线程数

        Raises:
            ConfigError: 出现未知参数
        """
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise ConfigError(f"实验 {self.name} 不支持参数 {unknown[0]}", f"experiment.params.{unknown[0]}")
        self.params: Dict[str, Any] = {**self.defaults, **params}
        if repetitions is not None:
            self.params["repetitions"] = int(repetitions)
        self.seed = Config.DEFAULT_SEED if seed is None else int(seed)
        self.delta = float(self.params.get("delta", Config.DEFAULT_DELTA) if delta is None else delta)
        self.workers = max(1, int(workers))
        self.streams = RandomStreams(self.seed).child(self.name)
        self.logger = get_logger(f"task.{self.name}")
        self.is_running = False
        self.last_run_time: Optional[datetime] = None
        self.run_count = 0
        self.error_count = 0
        self.last_error: Optional[str] = None
        self.last_report: Optional[ExperimentReport] = None

    def repetition_streams(self, n: int) -> RandomStreams:
        """第 n 次重复实验的随机数子流"""
        return self.streams.child(f"rep{n}")

    def map_repetitions(self, fn: Callable[[int], R], count: Optional[int] = None) -> List[R]:
        """
        执行 fn(0..N-1), 结果按重复序号排列

        每次重复只依赖自己的子流, 多线程执行时结果与串行一致
        """
        count = int(self.params.get("repetitions", 1)) if count is None else count
        if self.workers == 1:
            return [fn(n) for n in range(count)]
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(fn, range(count)))

    def new_report(self, coverage_target: Optional[float] = None) -> ExperimentReport:
        target = 1.0 - self.delta if coverage_target is None else coverage_target
        return ExperimentReport(self.name, self.seed, self.delta, dict(self.params), target)

    @abstractmethod
    def execute(self) -> ExperimentReport:
        """
        执行实验逻辑

        Returns:
            ExperimentReport: 实验报告
        """
        pass

    def run(self, out_dir=None) -> bool:
        """
        运行实验（包含错误处理和统计）

        Args:
            out_dir: 产物目录, 为空时不写文件

        Returns:
            bool: 实验是否执行成功
        """
        self.is_running = True
        start_time = time.perf_counter()

        try:
            self.logger.info(f"开始执行实验: {self.name}, 种子 {self.seed}, δ={self.delta}")
            report = self.execute()
            report.runtime = time.perf_counter() - start_time
            if out_dir is not None:
                report.write(out_dir)

            self.run_count += 1
            self.last_run_time = datetime.now()
            self.last_error = None
            self.last_report = report
            self.logger.info(f"实验执行成功: {self.name}, 耗时: {report.runtime:.2f}秒")
            return True

        except CPGuardError as e:
            self.error_count += 1
            self.last_error = str(e)
            self.logger.error(f"实验执行失败: {self.name}, 错误: {e}")
            return False
        except Exception as e:
            self.error_count += 1
            self.last_error = str(e)
            self.logger.exception(f"实验执行异常: {self.name}, 错误: {e}")
            return False
        finally:
            self.is_running = False

    def get_status(self) -> Dict[str, Any]:
        """
        获取实验状态

        Returns:
            Dict: 实验状态信息
        """
        return {
            "name": self.name,
            "description": self.description,
            "is_running": self.is_running,
            "last_run_time": self.last_run_time.isoformat() if self.last_run_time else None,
            "run_count": self.run_count,
            "error_count": self.error_count,
            "last_error": self.last_error,
        }


class ExperimentRegistry:
    """实验注册表"""

    def __init__(self):
        self.experiments: Dict[str, Type[BaseExperiment]] = {}
        self.logger = get_logger("task.registry")

    def register(self, experiment: Type[BaseExperiment]) -> Type[BaseExperiment]:
        """
        注册实验类, 也可作为类装饰器使用

        Args:
            experiment: 要注册的实验类
        """
        self.experiments[experiment.name] = experiment
        self.logger.debug(f"注册实验: {experiment.name}")
        return experiment

    def get(self, name: str) -> Type[BaseExperiment]:
        """
        获取实验类

        Raises:
            UnknownExperimentError: 名称未注册
        """
        if name not in self.experiments:
            raise UnknownExperimentError(f"未知实验: {name}, 可选 {', '.join(self.names())}")
        return self.experiments[name]

    def names(self) -> List[str]:
        return sorted(self.experiments)

    def create(self, name: str, **kwargs) -> BaseExperiment:
        return self.get(name)(**kwargs)

    def describe(self) -> List[Dict[str, str]]:
        """
        获取所有实验说明

        Returns:
            List[Dict]: 名称与说明
        """
        return [{"name": name, "description": self.experiments[name].description} for name in self.names()]


registry = ExperimentRegistry()
