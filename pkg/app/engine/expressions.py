"""
app/engine/expressions.py - Expression AST used by structural equations.

Integers double as booleans (0 is false, anything else true); comparisons and
connectives always return 0 or 1. Symbolic range values are plain strings and
only support == and !=.
"""
from dataclasses import dataclass
from typing import Any, Callable, Dict, FrozenSet, Mapping, Tuple, Union

Value = Union[int, str]


class ExpressionTypeError(Exception):
    """Raised when an operator meets a value of the wrong kind."""


def _int(value: Value, op: str) -> int:
    if isinstance(value, bool):
        return int(value)
    if not isinstance(value, int):
        raise ExpressionTypeError(f"operator {op!r} needs an integer, got {value!r}")
    return value


def _truth(value: Value, op: str) -> bool:
    return _int(value, op) != 0


@dataclass(frozen=True)
class Const:
    value: Value

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        return self.value

    def references(self) -> FrozenSet[str]:
        return frozenset()


@dataclass(frozen=True)
class Ref:
    name: str

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        return env[self.name]

    def references(self) -> FrozenSet[str]:
        return frozenset({self.name})


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: "Expr"

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        value = self.operand.evaluate(env)
        if self.op == "!":
            return 0 if _truth(value, "!") else 1
        return -_int(value, "-")

    def references(self) -> FrozenSet[str]:
        return self.operand.references()


_ARITH: Dict[str, Callable[[int, int], int]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
}

_ORDER: Dict[str, Callable[[int, int], bool]] = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}

BINARY_OPERATORS = ("||", "&&", "==", "!=", "<", "<=", ">", ">=", "+", "-")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        op = self.op
        if op == "&&":
            return 1 if _truth(self.left.evaluate(env), op) and _truth(self.right.evaluate(env), op) else 0
        if op == "||":
            return 1 if _truth(self.left.evaluate(env), op) or _truth(self.right.evaluate(env), op) else 0
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if op == "==":
            return 1 if a == b else 0
        if op == "!=":
            return 0 if a == b else 1
        if op in _ORDER:
            return 1 if _ORDER[op](_int(a, op), _int(b, op)) else 0
        if op in _ARITH:
            return _ARITH[op](_int(a, op), _int(b, op))
        raise ExpressionTypeError(f"unknown operator {op!r}")

    def references(self) -> FrozenSet[str]:
        return self.left.references() | self.right.references()


@dataclass(frozen=True)
class Ite:
    condition: "Expr"
    then: "Expr"
    otherwise: "Expr"

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        if _truth(self.condition.evaluate(env), "ite"):
            return self.then.evaluate(env)
        return self.otherwise.evaluate(env)

    def references(self) -> FrozenSet[str]:
        return self.condition.references() | self.then.references() | self.otherwise.references()


@dataclass(frozen=True)
class Call:
    function: str  # "min" or "max"
    args: Tuple["Expr", ...]

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        values = [_int(arg.evaluate(env), self.function) for arg in self.args]
        return min(values) if self.function == "min" else max(values)

    def references(self) -> FrozenSet[str]:
        refs: FrozenSet[str] = frozenset()
        for arg in self.args:
            refs |= arg.references()
        return refs


Expr = Union[Const, Ref, Unary, Binary, Ite, Call]


def any_of(names) -> Any:
    """A || B || ... over variable names (1 if any is non-zero)."""
    names = list(names)
    expr: Expr = Ref(names[0])
    for name in names[1:]:
        expr = Binary("||", expr, Ref(name))
    return expr
