"""
app/engine/formula.py - Boolean combinations of primitive events, causal formulas and conjunctions.
"""
import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, Mapping, Tuple, Union

from app.engine.errors import (
    EmptyCandidate,
    FormulaContainsIntervention,
    InvalidContext,
    NestedIntervention,
    UnknownVariable,
    ValueOutOfRange,
)
from app.engine.expressions import Value
from app.engine.model import CausalModel, Context, Intervention


def _value_text(value: Value) -> str:
    return str(value)


@dataclass(frozen=True)
class PrimitiveEvent:
    variable: str
    value: Value

    def holds(self, values: Mapping[str, Value]) -> bool:
        return values[self.variable] == self.value

    def variables(self) -> FrozenSet[str]:
        return frozenset({self.variable})

    def is_causal(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"{self.variable}={_value_text(self.value)}"


@dataclass(frozen=True)
class Not:
    operand: "Formula"

    def holds(self, values: Mapping[str, Value]) -> bool:
        return not self.operand.holds(values)

    def variables(self) -> FrozenSet[str]:
        return self.operand.variables()

    def is_causal(self) -> bool:
        return self.operand.is_causal()

    def __str__(self) -> str:
        return f"~{_wrap(self.operand)}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def holds(self, values: Mapping[str, Value]) -> bool:
        return self.left.holds(values) and self.right.holds(values)

    def variables(self) -> FrozenSet[str]:
        return self.left.variables() | self.right.variables()

    def is_causal(self) -> bool:
        return self.left.is_causal() or self.right.is_causal()

    def __str__(self) -> str:
        return f"{_wrap(self.left)} & {_wrap(self.right)}"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def holds(self, values: Mapping[str, Value]) -> bool:
        return self.left.holds(values) or self.right.holds(values)

    def variables(self) -> FrozenSet[str]:
        return self.left.variables() | self.right.variables()

    def is_causal(self) -> bool:
        return self.left.is_causal() or self.right.is_causal()

    def __str__(self) -> str:
        return f"{_wrap(self.left)} | {_wrap(self.right)}"


@dataclass(frozen=True)
class Causal:
    """[X <- x] body; the body never contains another intervention."""
    intervention: Intervention
    body: "Formula"

    def holds(self, values: Mapping[str, Value]) -> bool:
        raise FormulaContainsIntervention("a causal formula needs a model and a context to be evaluated")

    def variables(self) -> FrozenSet[str]:
        return frozenset(self.intervention.variables) | self.body.variables()

    def is_causal(self) -> bool:
        return True

    def __str__(self) -> str:
        settings = ", ".join(f"{k}<-{_value_text(v)}" for k, v in self.intervention.settings)
        return f"[{settings}]({self.body})"


Formula = Union[PrimitiveEvent, Not, And, Or, Causal]


def _wrap(f: "Formula") -> str:
    return f"({f})" if isinstance(f, (And, Or)) else str(f)


def conjoin(*formulas: Formula) -> Formula:
    result = formulas[0]
    for f in formulas[1:]:
        result = And(result, f)
    return result


# ---------------------------------------------------------------------------
# Validation and satisfaction
# ---------------------------------------------------------------------------

def _check_event(model: CausalModel, name: str, value: Value, endogenous_only: bool = True) -> None:
    sig = model.signature
    if endogenous_only and not sig.is_endogenous(name):
        if name in sig.exogenous_names:
            raise UnknownVariable(f"{name} is exogenous; formulas only mention endogenous variables",
                                  {"variable": name})
        raise UnknownVariable(f"unknown variable {name!r}", {"variable": name})
    if value not in sig.range_of(name):
        raise ValueOutOfRange(f"{name}={value} is outside the range of {name}", {"variable": name, "value": value})


def check_formula(model: CausalModel, f: Formula, allow_causal: bool = True, _inside: bool = False) -> Formula:
    """Validate variables and values; raise on interventions where they are not allowed."""
    if isinstance(f, PrimitiveEvent):
        _check_event(model, f.variable, f.value)
    elif isinstance(f, Not):
        check_formula(model, f.operand, allow_causal, _inside)
    elif isinstance(f, (And, Or)):
        check_formula(model, f.left, allow_causal, _inside)
        check_formula(model, f.right, allow_causal, _inside)
    elif isinstance(f, Causal):
        if _inside:
            raise NestedIntervention(f"nested intervention in {f}")
        if not allow_causal:
            raise FormulaContainsIntervention(f"expected a formula without interventions, got {f}")
        for name, value in f.intervention.settings:
            _check_event(model, name, value)
        check_formula(model, f.body, allow_causal, True)
    else:
        raise TypeError(f"not a formula: {f!r}")
    return f


def holds_in(model: CausalModel, u: Context, f: Formula, actual: Mapping[str, Value] = None) -> bool:
    """Truth of an already validated formula; ``actual`` is the cached solution in ``u``."""
    if isinstance(f, Causal):
        return f.body.holds(model.solve(u, f.intervention.as_dict()))
    if isinstance(f, Not):
        return not holds_in(model, u, f.operand, actual)
    if isinstance(f, And):
        return holds_in(model, u, f.left, actual) and holds_in(model, u, f.right, actual)
    if isinstance(f, Or):
        return holds_in(model, u, f.left, actual) or holds_in(model, u, f.right, actual)
    if actual is None:
        actual = model.solve(u)
    return f.holds(actual)


def satisfies(model: CausalModel, u: Context, f: Formula) -> bool:
    """(M, u) |= f."""
    u = model.context(u)
    check_formula(model, f)
    return holds_in(model, u, f, model.solve(u))


# ---------------------------------------------------------------------------
# Conjunctions of primitive events (candidate causes and explanations)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Conjunction:
    """X1=x1 & ... & Xk=xk with distinct variables, kept in canonical (name) order."""
    events: Tuple[Tuple[str, Value], ...]

    def __post_init__(self):
        events = tuple(sorted((tuple(e) for e in self.events), key=lambda e: e[0]))
        object.__setattr__(self, "events", events)
        names = [k for k, _ in events]
        if not events:
            raise EmptyCandidate("a conjunction needs at least one primitive event")
        if len(set(names)) != len(names):
            raise InvalidContext("a conjunction mentions each variable at most once", {"variables": names})

    @classmethod
    def of(cls, mapping) -> "Conjunction":
        items = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(tuple(items))

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self.events)

    def as_dict(self) -> Dict[str, Value]:
        return dict(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def holds(self, values: Mapping[str, Value]) -> bool:
        return all(values[k] == v for k, v in self.events)

    def as_formula(self) -> Formula:
        return conjoin(*(PrimitiveEvent(k, v) for k, v in self.events))

    def intervention(self) -> Intervention:
        return Intervention(self.events)

    def restrict(self, names) -> "Conjunction":
        names = set(names)
        return Conjunction(tuple((k, v) for k, v in self.events if k in names))

    def strict_subsets(self) -> Iterator["Conjunction"]:
        """Non-empty strict sub-conjunctions, smallest first then lexicographic."""
        for size in range(1, len(self.events)):
            for combo in itertools.combinations(self.events, size):
                yield Conjunction(combo)

    def check(self, model: CausalModel) -> "Conjunction":
        for name, value in self.events:
            _check_event(model, name, value)
        return self

    def __str__(self) -> str:
        return " & ".join(f"{k}={_value_text(v)}" for k, v in self.events)
