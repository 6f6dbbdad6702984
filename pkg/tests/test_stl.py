"""STL 解析、布尔/定量语义与否定范式的测试"""

import math

import numpy as np
import pytest

from cp_guard.stl.formula import (
    Always,
    And,
    Atom,
    Eventually,
    Interval,
    Not,
    Or,
    Predicate,
    Release,
    TrueFormula,
    Until,
    atoms,
    to_text,
)
from cp_guard.stl.parser import PredicateTable, parse_formula, signal_table
from cp_guard.stl.semantics import (
    FALSE_ROBUSTNESS,
    TRUE_ROBUSTNESS,
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
from cp_guard.utils.errors import ArgumentError, STLSyntaxError, TraceTooShortError, UnknownPredicateError

TABLE = signal_table(["x", "y"])


def parse(text: str):
    return parse_formula(text, TABLE)


def random_formula(rng: np.random.Generator, depth: int):
    """随机公式, 区间上界不超过 3"""
    if depth == 0 or rng.uniform() < 0.25:
        kind = rng.integers(3)
        c = round(float(rng.normal()), 3)
        if kind == 0:
            return Atom(Predicate.affine(f"x >= {c}", [1.0, 0.0], -c))
        if kind == 1:
            return Atom(Predicate.affine(f"y <= {c}", [0.0, -1.0], c))
        return Atom(Predicate.ball("b", [0, 1], [c, -c], 1.0))
    a = int(rng.integers(0, 3))
    interval = Interval(a, a + int(rng.integers(0, 2)))
    op = rng.integers(8)
    if op == 0:
        return Not(random_formula(rng, depth - 1))
    if op == 1:
        return And(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if op == 2:
        return Or(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if op == 3:
        return Always(interval, random_formula(rng, depth - 1))
    if op == 4:
        return Eventually(interval, random_formula(rng, depth - 1))
    if op == 5:
        return Until(interval, random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if op == 6:
        return Release(interval, random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    return Not(And(random_formula(rng, depth - 1), random_formula(rng, depth - 1)))


class TestParser:
    """公式解析"""

    def test_always_with_comparison(self):
        formula = parse("G[0,5] (x >= 1.5)")
        assert isinstance(formula, Always)
        assert formula.interval == Interval(0, 5)
        assert isinstance(formula.child, Atom)
        assert formula.child.predicate.evaluate(np.array([2.0, 0.0])) == pytest.approx(0.5)

    def test_precedence(self):
        """and 的优先级高于 or, 蕴含最低"""
        formula = parse("x >= 0 and y >= 0 or x <= -1 => y <= 3")
        assert formula.__class__.__name__ == "Implies"
        assert isinstance(formula.left, Or)
        assert isinstance(formula.left.left, And)

    def test_strict_comparison_is_non_strict(self):
        strict = parse("x > 2").predicate
        loose = parse("x >= 2").predicate
        assert strict.form == loose.form

    def test_ball_atom(self):
        formula = parse("ball(x, y; 1, 2; 0.5)")
        value = formula.predicate.evaluate(np.array([1.0, 2.0]))
        assert value == pytest.approx(0.5)

    def test_ball_dimension_mismatch(self):
        with pytest.raises(STLSyntaxError):
            parse("ball(x, y; 1; 0.5)")

    def test_until_and_release(self):
        assert isinstance(parse("x >= 0 U[1,3] y >= 1"), Until)
        assert isinstance(parse("x >= 0 R[0,2] y >= 1"), Release)

    def test_true_literal(self):
        assert isinstance(parse("true"), TrueFormula)

    def test_unknown_signal(self):
        with pytest.raises(UnknownPredicateError):
            parse("z >= 1")

    def test_syntax_error_has_position(self):
        with pytest.raises(STLSyntaxError) as info:
            parse("G[0,5] (x >=")
        assert info.value.line is not None

    def test_reversed_interval(self):
        with pytest.raises(STLSyntaxError):
            parse("F[3,1] x >= 0")

    def test_named_predicate(self):
        near = Predicate.function("near", lambda z: 1.0 - np.abs(z[..., 0]), 1.0)
        table = PredicateTable.from_names(["x", "y"], {"near": near})
        formula = parse_formula("G[0,1] near", table)
        assert robustness(formula, [[0.5, 0.0], [0.25, 0.0]]) == pytest.approx(0.5)

    def test_printed_formula_parses_back(self):
        text = "G[0,4] ((x >= 1 and not (y <= 2)) => F[1,2] ball(x, y; 0, 0; 1))"
        formula = parse(text)
        assert parse(to_text(formula)) == formula
        assert len(atoms(formula)) == 3


class TestSemantics:
    """布尔与定量语义"""

    def test_atom(self):
        assert robustness(parse("x >= 1"), [[3.0, 0.0]]) == 2.0

    def test_always_and_eventually(self):
        trace = np.array([[1.0, 0.0], [3.0, 0.0], [0.5, 0.0]])
        assert robustness(parse("G[0,2] x >= 0"), trace) == 0.5
        assert robustness(parse("F[0,2] x >= 0"), trace) == 3.0

    def test_until(self):
        """x ≥ 0 一直成立, y ≥ 1 在时刻 2 首次成立"""
        trace = np.array([[2.0, 0.0], [1.0, 0.0], [3.0, 4.0]])
        assert boolean_sat(parse("x >= 0 U[0,2] y >= 1"), trace)
        assert robustness(parse("x >= 0 U[0,2] y >= 1"), trace) == 1.0

    def test_true_is_infinite(self):
        assert robustness(TrueFormula(), [[0.0, 0.0]]) == math.inf
        assert robustness(Not(TrueFormula()), [[0.0, 0.0]]) == -math.inf

    def test_true_markers_propagate(self):
        """标记只经 min/max 传播: 与有限鲁棒度合取时取有限值"""
        trace = [[2.5, 0.0]]
        assert robustness(parse("true"), trace) == TRUE_ROBUSTNESS
        assert robustness(parse("not true"), trace) == FALSE_ROBUSTNESS
        assert robustness(parse("true and x >= 1"), trace) == 1.5
        assert robustness(parse("not true or x >= 1"), trace) == 1.5
        assert is_robustness_marker([TRUE_ROBUSTNESS, FALSE_ROBUSTNESS, 1.5]).tolist() == [True, True, False]

    def test_horizon(self):
        assert horizon(parse("G[0,5] F[1,3] x >= 0")) == 8
        assert horizon(parse("x >= 0 U[2,4] G[0,1] y >= 0")) == 5

    def test_trace_too_short(self):
        with pytest.raises(TraceTooShortError) as info:
            robustness(parse("G[0,5] x >= 0"), np.zeros((3, 2)))
        assert info.value.required_length == 6

    def test_non_finite_trace(self):
        with pytest.raises(ArgumentError):
            robustness(parse("x >= 0"), [[math.nan, 0.0]])

    def test_sign_matches_boolean(self, rng):
        """ρ ≠ 0 时鲁棒度符号与布尔语义一致"""
        for _ in range(1000):
            formula = random_formula(rng, 3)
            trace = rng.normal(size=(horizon(formula) + 3, 2))
            rho = robustness(formula, trace)
            if rho > 0:
                assert boolean_sat(formula, trace)
            elif rho < 0:
                assert not boolean_sat(formula, trace)

    def test_suffix_beyond_horizon_is_irrelevant(self, rng):
        for _ in range(200):
            formula = random_formula(rng, 3)
            trace = rng.normal(size=(horizon(formula) + 5, 2))
            assert robustness(formula, trace) == robustness(formula, trace[: horizon(formula) + 1])

    def test_release_is_dual_of_until(self, rng):
        a, b = parse("x >= 0"), parse("y >= 0")
        release = Release(Interval(1, 3), a, b)
        dual = Not(Until(Interval(1, 3), Not(a), Not(b)))
        for _ in range(50):
            trace = rng.normal(size=(6, 2))
            assert robustness(release, trace) == robustness(dual, trace)

    def test_batch_matches_single(self, rng):
        formula = parse("G[0,3] (x >= -1 or F[0,2] y <= 0.5)")
        trajectories = rng.normal(size=(20, 8, 2))
        expected = [robustness(formula, trace) for trace in trajectories]
        np.testing.assert_array_equal(batch_robustness(formula, trajectories), expected)

    def test_signal_length(self):
        formula = parse("G[0,2] x >= 0")
        assert robustness_signal(formula, np.zeros((4, 10, 2))).shape == (4, 8)


class TestNegationNormalForm:
    """否定范式"""

    def test_nnf_preserves_robustness(self, rng):
        for _ in range(1000):
            formula = random_formula(rng, 3)
            nnf = to_negation_normal_form(formula)
            assert is_negation_normal_form(nnf)
            trace = rng.normal(size=(horizon(formula) + 1, 2))
            assert robustness(nnf, trace) == robustness(formula, trace)

    def test_implication_is_removed(self):
        nnf = to_negation_normal_form(parse("x >= 0 => y >= 0"))
        assert isinstance(nnf, Or)
        assert not is_negation_normal_form(parse("x >= 0 => y >= 0"))

    def test_negated_ball_becomes_exterior(self):
        nnf = to_negation_normal_form(parse("not ball(x, y; 0, 0; 1)"))
        assert isinstance(nnf, Atom)
        assert nnf.predicate.evaluate(np.array([3.0, 0.0])) == pytest.approx(2.0)


class TestWorstCase:
    """预测球上的最坏鲁棒度"""

    def test_zero_radius_is_exact(self, rng):
        formula = to_negation_normal_form(parse("G[0,4] (x >= -2 and not ball(x, y; 1, 1; 0.5))"))
        trace = rng.normal(size=(5, 2))
        value = worst_case_robustness(formula, trace[:2], trace[2:], np.zeros(3))
        assert value == pytest.approx(robustness(formula, trace))

    def test_lower_bounds_any_future_in_balls(self, rng):
        formula = to_negation_normal_form(parse("G[0,5] (x <= 2 and not ball(x, y; 0, 0; 0.3)) or F[1,3] y >= 1"))
        prefix = rng.normal(size=(2, 2))
        predictions = rng.normal(size=(4, 2))
        radii = rng.uniform(0.0, 0.5, size=4)
        bound = worst_case_robustness(formula, prefix, predictions, radii)
        for _ in range(200):
            direction = rng.normal(size=(4, 2))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            future = predictions + direction * (radii * rng.uniform(size=4))[:, None]
            assert bound <= robustness(formula, np.vstack([prefix, future])) + 1e-12

    def test_requires_nnf(self):
        with pytest.raises(ArgumentError):
            worst_case_robustness_batch(parse("x >= 0 => y >= 0"), np.zeros((1, 1, 2)), np.zeros((1, 0, 2)), [])

    def test_radius_count_must_match(self):
        formula = parse("G[0,2] x >= 0")
        with pytest.raises(ArgumentError):
            worst_case_robustness_batch(formula, np.zeros((1, 1, 2)), np.zeros((1, 2, 2)), [0.1])
