"""
离线验证模块

学习组件与闭环系统的概率验证、极值估计、估计器保形化与感知抽象
"""

from .offline import (
    Verdict,
    VerdictStatus,
    conformalize_estimator,
    decide,
    estimate_extremum,
    extremum_from_scores,
    smc_satisfaction_bound,
    verify_leas_reachability,
    verify_leas_stl,
    verify_lec_logic,
    verify_lec_reachability,
)
from .perception import PerceptionBound, epsilon_net, perceptual_abstraction
from .sets import BallSet, BoxSet, OutputSet, SublevelSet, tube_distances, whole_space

__all__ = [
    "BallSet",
    "BoxSet",
    "OutputSet",
    "PerceptionBound",
    "SublevelSet",
    "Verdict",
    "VerdictStatus",
    "conformalize_estimator",
    "decide",
    "epsilon_net",
    "estimate_extremum",
    "extremum_from_scores",
    "perceptual_abstraction",
    "smc_satisfaction_bound",
    "tube_distances",
    "verify_leas_reachability",
    "verify_leas_stl",
    "verify_lec_logic",
    "verify_lec_reachability",
    "whole_space",
]
