import pytest

from app.dsl.parser import parse_formula
from app.engine.errors import (
    EmptyCandidate,
    FormulaContainsIntervention,
    InvalidContext,
    NestedIntervention,
    UnknownVariable,
    ValueOutOfRange,
)
from app.engine.formula import And, Causal, Conjunction, Not, Or, PrimitiveEvent, check_formula, satisfies
from app.engine.model import Intervention


def test_primitive_events_and_connectives(arsonists):
    model = arsonists.model
    u1 = arsonists.context("u1")
    assert satisfies(model, u1, PrimitiveEvent("FB", 1))
    assert satisfies(model, u1, And(PrimitiveEvent("ML1", 1), Not(PrimitiveEvent("ML3", 1))))
    assert satisfies(model, u1, Or(PrimitiveEvent("ML3", 1), PrimitiveEvent("ML2", 1)))
    assert not satisfies(model, u1, PrimitiveEvent("ML3", 1))


def test_causal_formula_uses_the_intervened_model(arsonists):
    model = arsonists.model
    u3 = arsonists.context("u3")
    # two matches are needed in u3; taking arsonist 3's away puts the fire out
    assert satisfies(model, u3, Causal(Intervention.of({"ML3": 0}), PrimitiveEvent("FB", 0)))
    assert satisfies(model, u3, Causal(Intervention.of({"ML2": 1}), PrimitiveEvent("FB", 1)))


def test_unknown_variables_and_values_are_rejected(arsonists):
    model = arsonists.model
    with pytest.raises(UnknownVariable):
        check_formula(model, PrimitiveEvent("NOPE", 1))
    with pytest.raises(UnknownVariable):
        check_formula(model, PrimitiveEvent("R", 1))
    with pytest.raises(ValueOutOfRange):
        check_formula(model, PrimitiveEvent("FB", 2))


def test_interventions_where_a_plain_formula_is_expected(arsonists):
    model = arsonists.model
    with pytest.raises(FormulaContainsIntervention):
        check_formula(model, parse_formula("[ML1<-0](FB=1)", model), allow_causal=False)
    with pytest.raises(NestedIntervention):
        parse_formula("[ML1<-0]([ML2<-1](FB=1))", model)


def test_conjunctions_are_canonical():
    a = Conjunction((("ML2", 1), ("ML1", 1)))
    b = Conjunction.of({"ML1": 1, "ML2": 1})
    assert a == b
    assert str(a) == "ML1=1 & ML2=1"
    assert [str(s) for s in a.strict_subsets()] == ["ML1=1", "ML2=1"]


def test_bad_conjunctions():
    with pytest.raises(EmptyCandidate):
        Conjunction(())
    with pytest.raises(InvalidContext):
        Conjunction((("A", 1), ("A", 0)))
