"""
STL 公式解析器

文法 (优先级由高到低): not / G / F > U / R (右结合) > and > or > => (右结合)

原子:
- x >= 1.5, x <= 2, x > 0, x < 3 (严格比较按非严格处理)
- ball(px, py; 13.5, 0.5; 3) 球内谓词
- 裸标识符引用谓词表中预先注册的命名谓词
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Optional, Sequence

from lark import Lark, Token, Tree
from lark.exceptions import UnexpectedInput

from cp_guard.stl.formula import (
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Implies,
    Interval,
    Not,
    Or,
    Predicate,
    Release,
    TrueFormula,
    Until,
)
from cp_guard.utils.errors import ArgumentError, STLSyntaxError, UnknownPredicateError

logger = logging.getLogger("cp_guard.stl.parser")

GRAMMAR = r"""
?start: implication

?implication: disjunction
    | disjunction "=>" implication -> implies

?disjunction: conjunction
    | disjunction "or" conjunction -> or_

?conjunction: binary
    | conjunction "and" binary -> and_

?binary: unary
    | unary "U" interval binary -> until
    | unary "R" interval binary -> release

?unary: primary
    | "not" unary -> not_
    | "G" interval unary -> always
    | "F" interval unary -> eventually

?primary: "true" -> true
    | NAME CMP SIGNED_NUMBER -> comparison
    | "ball" "(" name_list ";" number_list ";" SIGNED_NUMBER ")" -> ball
    | NAME -> named
    | "(" implication ")"

name_list: NAME ("," NAME)*
number_list: SIGNED_NUMBER ("," SIGNED_NUMBER)*
interval: "[" INT "," INT "]"

CMP: ">=" | "<=" | ">" | "<"

%import common.CNAME -> NAME
%import common.INT
%import common.SIGNED_NUMBER
%import common.WS
%ignore WS
"""


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(GRAMMAR, parser="lalr", propagate_positions=True)


@dataclass
class PredicateTable:
    """
    解析时使用的符号表

    signals 把信号名映射到状态向量下标, predicates 保存命名谓词
    """

    signals: Dict[str, int]
    dimension: Optional[int] = None
    predicates: Dict[str, Predicate] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension is None:
            self.dimension = max(self.signals.values(), default=-1) + 1
        for name, index in self.signals.items():
            if not 0 <= index < self.dimension:
                raise ArgumentError(f"信号 {name} 的下标 {index} 超出状态维数 {self.dimension}")

    @classmethod
    def from_names(cls, names: Sequence[str], predicates: Optional[Dict[str, Predicate]] = None) -> "PredicateTable":
        """按顺序为信号名分配下标"""
        return cls({name: i for i, name in enumerate(names)}, len(names), dict(predicates or {}))

    def signal_index(self, name: str, column: Optional[int] = None) -> int:
        if name not in self.signals:
            where = f" (第 {column} 列)" if column is not None else ""
            raise UnknownPredicateError(f"未知信号: {name}{where}")
        return self.signals[name]

    def named(self, name: str, column: Optional[int] = None) -> Predicate:
        if name not in self.predicates:
            where = f" (第 {column} 列)" if column is not None else ""
            raise UnknownPredicateError(f"未知谓词: {name}{where}")
        return Predicate(name, self.predicates[name].form)


def _number(token: Token) -> float:
    return float(token.value)


class _Translator:
    """把 lark 语法树翻译为公式节点"""

    def __init__(self, table: PredicateTable):
        self.table = table

    def _interval(self, tree: Tree) -> Interval:
        lo, hi = (int(token.value) for token in tree.children)
        if lo > hi:
            token = tree.children[0]
            raise STLSyntaxError(f"时间区间下界大于上界: [{lo},{hi}]", token.line, token.column)
        return Interval(lo, hi)

    def _comparison(self, name: Token, cmp: Token, number: Token) -> Atom:
        index = self.table.signal_index(name.value, name.column)
        a = [0.0] * self.table.dimension
        c = _number(number)
        # x >= c → x - c ≥ 0; x <= c → c - x ≥ 0
        if cmp.value in (">=", ">"):
            a[index] = 1.0
            b = -c
        else:
            a[index] = -1.0
            b = c
        return Atom(Predicate.affine(f"{name.value} {cmp.value} {number.value}", a, b))

    def _ball(self, names: Tree, numbers: Tree, radius: Token) -> Atom:
        selector = [self.table.signal_index(token.value, token.column) for token in names.children]
        center = [_number(token) for token in numbers.children]
        if len(selector) != len(center):
            raise STLSyntaxError(
                f"ball 的信号数 {len(selector)} 与中心坐标数 {len(center)} 不一致",
                radius.line,
                radius.column,
            )
        text = "ball({}; {}; {})".format(
            ", ".join(token.value for token in names.children),
            ", ".join(token.value for token in numbers.children),
            radius.value,
        )
        return Atom(Predicate.ball(text, selector, center, _number(radius)))

    def translate(self, ast) -> Formula:
        if isinstance(ast, Token):
            raise STLSyntaxError(f"意外的记号: {ast.value}", ast.line, ast.column)

        rule = ast.data
        args = ast.children
        if rule == "true":
            return TrueFormula()
        if rule == "comparison":
            return self._comparison(*args)
        if rule == "ball":
            return self._ball(*args)
        if rule == "named":
            return Atom(self.table.named(args[0].value, args[0].column))
        if rule == "not_":
            return Not(self.translate(args[0]))
        if rule == "and_":
            return And(self.translate(args[0]), self.translate(args[1]))
        if rule == "or_":
            return Or(self.translate(args[0]), self.translate(args[1]))
        if rule == "implies":
            return Implies(self.translate(args[0]), self.translate(args[1]))
        if rule == "always":
            return Always(self._interval(args[0]), self.translate(args[1]))
        if rule == "eventually":
            return Eventually(self._interval(args[0]), self.translate(args[1]))
        if rule == "until":
            return Until(self._interval(args[1]), self.translate(args[0]), self.translate(args[2]))
        if rule == "release":
            return Release(self._interval(args[1]), self.translate(args[0]), self.translate(args[2]))
        raise STLSyntaxError(f"无法识别的语法节点: {rule}")


def parse_formula(text: str, table: PredicateTable) -> Formula:
    """
    解析 STL 公式

    Args:
        text: 公式文本
        table: 信号与命名谓词表

    Returns:
        Formula: 公式语法树

    Raises:
        STLSyntaxError: 语法错误或区间无效, 带行列位置
        UnknownPredicateError: 引用了未声明的信号或谓词
    """
    try:
        ast = _parser().parse(text)
    except UnexpectedInput as e:
        raise STLSyntaxError(f"STL 语法错误: {text!r}", e.line, e.column) from e

    formula = _Translator(table).translate(ast)
    logger.debug(f"公式解析完成: {text}")
    return formula


def signal_table(names: Iterable[str]) -> PredicateTable:
    """只含信号名的符号表"""
    return PredicateTable.from_names(list(names))
