"""
STL 模块

公式语法树、解析器以及布尔/定量语义
"""

from .formula import (
    AffineForm,
    Always,
    And,
    Atom,
    BallForm,
    Eventually,
    Formula,
    FunctionForm,
    Implies,
    Interval,
    Not,
    Or,
    Predicate,
    Release,
    TrueFormula,
    Until,
    atoms,
    is_temporal_free,
    to_text,
)
from .parser import PredicateTable, parse_formula, signal_table
from .semantics import (
    FALSE_ROBUSTNESS,
    TRUE_ROBUSTNESS,
    as_trace,
    batch_robustness,
    boolean_sat,
    horizon,
    is_negation_normal_form,
    is_robustness_marker,
    robustness,
    robustness_signal,
    to_negation_normal_form,
    worst_case_robustness,
    worst_case_robustness_batch,
)

__all__ = [
    "FALSE_ROBUSTNESS",
    "TRUE_ROBUSTNESS",
    "AffineForm",
    "Always",
    "And",
    "Atom",
    "BallForm",
    "Eventually",
    "Formula",
    "FunctionForm",
    "Implies",
    "Interval",
    "Not",
    "Or",
    "Predicate",
    "PredicateTable",
    "Release",
    "TrueFormula",
    "Until",
    "as_trace",
    "atoms",
    "batch_robustness",
    "boolean_sat",
    "horizon",
    "is_negation_normal_form",
    "is_robustness_marker",
    "is_temporal_free",
    "parse_formula",
    "robustness",
    "robustness_signal",
    "signal_table",
    "to_negation_normal_form",
    "to_text",
    "worst_case_robustness",
    "worst_case_robustness_batch",
]
