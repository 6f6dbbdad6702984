"""
案例场景模块

带种子的仿真器、数据集采样、统计验证工具与产物读写
"""

from .io import dataset_frame, read_dataset, write_artifacts, write_dataset, write_report, write_table
from .simulators import (
    AIRCRAFT_SPEC,
    CARTPOLE_SPEC,
    DESTABILIZED_GAINS,
    SCENARIOS,
    STABILIZING_GAINS,
    AircraftSurrogate,
    CartPole,
    DoubleIntegrator,
    NoisyUnicycle,
    PedestrianWalkers,
    Scenario,
    SensorNavigation,
    build_scenario,
    cartpole_step,
    sample_dataset,
    sample_splits,
    simulate,
    unicycle_features,
    unicycle_safe_set,
)
from .statistics import (
    Histogram,
    beta_ks_distance,
    binomial_band,
    conditional_empirical_coverage,
    empirical_coverage,
    expected_coverage,
    histogram,
)

__all__ = [
    "AIRCRAFT_SPEC",
    "CARTPOLE_SPEC",
    "DESTABILIZED_GAINS",
    "SCENARIOS",
    "STABILIZING_GAINS",
    "AircraftSurrogate",
    "CartPole",
    "DoubleIntegrator",
    "Histogram",
    "NoisyUnicycle",
    "PedestrianWalkers",
    "Scenario",
    "SensorNavigation",
    "beta_ks_distance",
    "binomial_band",
    "build_scenario",
    "cartpole_step",
    "conditional_empirical_coverage",
    "dataset_frame",
    "empirical_coverage",
    "expected_coverage",
    "histogram",
    "read_dataset",
    "sample_dataset",
    "sample_splits",
    "simulate",
    "unicycle_features",
    "unicycle_safe_set",
    "write_artifacts",
    "write_dataset",
    "write_report",
    "write_table",
]
