"""
STL 公式与谓词

公式是不可变的抽象语法树, 谓词 h(z) ≥ 0 的形式有仿射、球、自定义三种,
每种谓词都带有对状态的 Lipschitz 常数
"""

from dataclasses import dataclass, field
from typing import Callable, Iterator, Tuple, Union

import numpy as np

from cp_guard.utils.errors import ArgumentError


@dataclass(frozen=True)
class AffineForm:
    """h(z) = aᵀz + b"""

    a: Tuple[float, ...]
    b: float

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.a))

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        return states @ np.asarray(self.a) + self.b

    def worst_case(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        # 球 ‖z - ẑ‖ ≤ C 上的最小值
        return self.evaluate(centers) - self.lipschitz * radii

    def negate(self) -> "AffineForm":
        return AffineForm(tuple(-x for x in self.a), -self.b)


@dataclass(frozen=True)
class BallForm:
    """h(z) = r - ‖z[sel] - c‖ (inside) 或 ‖z[sel] - c‖ - r (outside)"""

    selector: Tuple[int, ...]
    center: Tuple[float, ...]
    radius: float
    inside: bool = True

    def __post_init__(self):
        if len(self.selector) != len(self.center):
            raise ArgumentError(f"球谓词的分量数 {len(self.selector)} 与中心维数 {len(self.center)} 不一致")
        if self.radius < 0:
            raise ArgumentError(f"球谓词半径不能为负: {self.radius}")

    @property
    def lipschitz(self) -> float:
        return 1.0

    def _distance(self, states: np.ndarray) -> np.ndarray:
        return np.linalg.norm(states[..., list(self.selector)] - np.asarray(self.center), axis=-1)

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        distance = self._distance(states)
        return self.radius - distance if self.inside else distance - self.radius

    def worst_case(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        distance = self._distance(centers)
        if self.inside:
            return self.radius - distance - radii
        return np.maximum(distance - radii, 0.0) - self.radius

    def negate(self) -> "BallForm":
        return BallForm(self.selector, self.center, self.radius, not self.inside)


@dataclass(frozen=True)
class FunctionForm:
    """用户提供的 h 及其 Lipschitz 常数, 未来时刻用 h(ẑ) - L·C 下界"""

    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    lipschitz_constant: float
    sign: float = 1.0

    def __post_init__(self):
        if not self.lipschitz_constant > 0:
            raise ArgumentError(f"Lipschitz 常数必须为正: {self.lipschitz_constant}")

    @property
    def lipschitz(self) -> float:
        return self.lipschitz_constant

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        return self.sign * np.asarray(self.fn(states), dtype=float)

    def worst_case(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        return self.evaluate(centers) - self.lipschitz * radii

    def negate(self) -> "FunctionForm":
        return FunctionForm(self.fn, self.lipschitz_constant, -self.sign)


PredicateForm = Union[AffineForm, BallForm, FunctionForm]


def _negated_name(name: str) -> str:
    if name.startswith("not (") and name.endswith(")"):
        return name[5:-1]
    return f"not ({name})"


@dataclass(frozen=True)
class Predicate:
    """带名称的谓词 h(z) ≥ 0"""

    name: str
    form: PredicateForm

    @property
    def lipschitz(self) -> float:
        return self.form.lipschitz

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        """对形如 (..., n) 的状态数组逐点求 h"""
        return self.form.evaluate(np.asarray(states, dtype=float))

    def worst_case(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """以 centers 为中心、radii 为半径的球上 h 的 (下界) 最小值"""
        return self.form.worst_case(np.asarray(centers, dtype=float), np.asarray(radii, dtype=float))

    def negate(self) -> "Predicate":
        """h ↦ -h"""
        return Predicate(_negated_name(self.name), self.form.negate())

    @classmethod
    def affine(cls, name: str, a, b: float) -> "Predicate":
        return cls(name, AffineForm(tuple(float(x) for x in a), float(b)))

    @classmethod
    def ball(cls, name: str, selector, center, radius: float) -> "Predicate":
        return cls(name, BallForm(tuple(int(i) for i in selector), tuple(float(x) for x in center), float(radius)))

    @classmethod
    def function(cls, name: str, fn: Callable[[np.ndarray], np.ndarray], lipschitz: float) -> "Predicate":
        return cls(name, FunctionForm(fn, float(lipschitz)))


# ---------------------------------------------------------------------------
# 公式节点


@dataclass(frozen=True)
class Interval:
    """离散时间区间 [a, b], 0 ≤ a ≤ b"""

    a: int
    b: int

    def __post_init__(self):
        if self.a < 0 or self.b < self.a:
            raise ArgumentError(f"时间区间无效: [{self.a}, {self.b}]")

    def __str__(self) -> str:
        return f"[{self.a},{self.b}]"


@dataclass(frozen=True)
class TrueFormula:
    pass


@dataclass(frozen=True)
class Atom:
    predicate: Predicate


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Always:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Release:
    """φ R[a,b] ψ := not ((not φ) U[a,b] (not ψ))"""

    interval: Interval
    left: "Formula"
    right: "Formula"


Formula = Union[TrueFormula, Atom, Not, And, Or, Implies, Always, Eventually, Until, Release]

TEMPORAL_NODES = (Always, Eventually, Until, Release)


def children(formula: Formula) -> Tuple[Formula, ...]:
    """直接子公式"""
    if isinstance(formula, (TrueFormula, Atom)):
        return ()
    if isinstance(formula, (Not, Always, Eventually)):
        return (formula.child,)
    return (formula.left, formula.right)


def walk(formula: Formula) -> Iterator[Formula]:
    """先序遍历所有子公式"""
    yield formula
    for child in children(formula):
        yield from walk(child)


def atoms(formula: Formula) -> Tuple[Predicate, ...]:
    """公式中出现的全部谓词 (按出现顺序)"""
    return tuple(node.predicate for node in walk(formula) if isinstance(node, Atom))


def is_temporal_free(formula: Formula) -> bool:
    return not any(isinstance(node, TEMPORAL_NODES) for node in walk(formula))


def _wrap(text: str, formula: Formula) -> str:
    if isinstance(formula, (TrueFormula, Atom)):
        return text
    return f"({text})"


def to_text(formula: Formula) -> str:
    """
    把公式打印为可再次解析的文本

    二元子公式一律加括号, 因此打印结果不依赖优先级
    """
    if isinstance(formula, TrueFormula):
        return "true"
    if isinstance(formula, Atom):
        return formula.predicate.name
    if isinstance(formula, Not):
        return f"not {_wrap(to_text(formula.child), formula.child)}"
    if isinstance(formula, (And, Or, Implies)):
        op = {And: "and", Or: "or", Implies: "=>"}[type(formula)]
        left = _wrap(to_text(formula.left), formula.left)
        right = _wrap(to_text(formula.right), formula.right)
        return f"{left} {op} {right}"
    if isinstance(formula, Always):
        return f"G{formula.interval} {_wrap(to_text(formula.child), formula.child)}"
    if isinstance(formula, Eventually):
        return f"F{formula.interval} {_wrap(to_text(formula.child), formula.child)}"
    op = "U" if isinstance(formula, Until) else "R"
    left = _wrap(to_text(formula.left), formula.left)
    right = _wrap(to_text(formula.right), formula.right)
    return f"{left} {op}{formula.interval} {right}"
