from fractions import Fraction

import pytest

from app.dsl.parser import (
    ModelBundle,
    parse_context,
    parse_context_set,
    parse_formula,
    parse_model,
    parse_value,
)
from app.dsl.serializer import serialize_model
from app.engine.errors import (
    DslSyntaxError,
    MissingDistribution,
    ModelSemanticError,
    NestedIntervention,
    ProbSumError,
    RangeViolation,
    UnknownIdentifier,
)
from app.services import corpus_loader

SHIPPED = ["arsonists", "arsonists_scenarios", "example1", "voting", "suzy", "parity5", "tumor9"]


def _model(*body: str) -> str:
    lines = ["model m {", "  exo U : {0, 1};", "  endo A : {0, 1};", *body, "}"]
    return "\n".join(lines) + "\n"


def _same_behaviour(a: ModelBundle, b: ModelBundle) -> None:
    assert a.model.signature == b.model.signature
    for u in a.model.contexts():
        assert a.model.solve(u) == b.model.solve(u)
    assert a.contexts == b.contexts
    assert a.k_set().members(a.model) == b.k_set().members(b.model)
    if a.distribution is None:
        assert b.distribution is None
    else:
        assert a.distribution.as_dict() == b.distribution.as_dict()


# ---------------------------------------------------------------------------
# Errors carry a location
# ---------------------------------------------------------------------------

def test_unknown_identifier_points_at_the_token():
    text = _model("  eq A := Q;")
    with pytest.raises(UnknownIdentifier) as info:
        parse_model(text)
    assert info.value.location() == "4:11"
    assert info.value.span.excerpt(text).endswith("\n          ^")


def test_missing_semicolon():
    text = "model m {\n  exo U : {0, 1}\n  endo A : {0, 1};\n  eq A := U;\n}\n"
    with pytest.raises(DslSyntaxError) as info:
        parse_model(text)
    assert info.value.location() == "3:3"
    assert info.value.details["line"] == 3


def test_self_loop_is_a_located_cycle():
    with pytest.raises(ModelSemanticError) as info:
        parse_model(_model("  eq A := A || U;"))
    assert info.value.details["cause"] == "cyclic_model"
    assert info.value.location() == "4:6"


def test_probabilities_must_sum_to_one():
    text = _model("  eq A := U;", "  context c0 { U=0 }", "  context c1 { U=1 }", "  prob { c0: 1/3, c1: 7/12 }")
    with pytest.raises(ProbSumError) as info:
        parse_model(text)
    assert info.value.details["sum"] == "11/12"
    assert info.value.location() == "7:3"


def test_table_row_outside_the_parent_range():
    with pytest.raises(RangeViolation) as info:
        parse_model(_model("  table A (U) { 2 -> 0; default -> 1; }"))
    assert info.value.details["variable"] == "U"
    assert info.value.location() == "4:17"


def test_k_filter_may_only_mention_exogenous_variables():
    with pytest.raises(UnknownIdentifier):
        parse_model(_model("  eq A := U;", "  K = where A == 1;"))


def test_duplicate_context_name():
    with pytest.raises(DslSyntaxError):
        parse_model(_model("  eq A := U;", "  context c { U=0 }", "  context c { U=1 }"))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def test_decimal_probabilities_become_exact_fractions():
    bundle = parse_model(_model("  eq A := U;", "  context c0 { U=0 }", "  context c1 { U=1 }",
                                "  prob { c0: 0.9, c1: 0.1 }"))
    assert bundle.distribution.weight(bundle.context("c0")) == Fraction(9, 10)
    text = serialize_model(bundle)
    assert "    c0: 9/10," in text
    assert "    c1: 1/10" in text


def test_less_than_a_negative_number_inside_equations():
    bundle = parse_model(_model("  eq A := ite(U<-1, 1, 0);"))
    assert all(values["A"] == 0 for _, values in bundle.model.evaluate_all())


def test_crlf_and_lf_sources_agree():
    _, text = corpus_loader.read_model("voting")
    lf = parse_model(text)
    crlf = parse_model(text.replace("\n", "\r\n"))
    _same_behaviour(lf, crlf)
    assert serialize_model(crlf) == serialize_model(lf)
    assert "\r" not in serialize_model(crlf)


def test_hyphenated_context_names(suzy):
    assert suzy.context("both-throw") == suzy.context("both_throw")
    with pytest.raises(UnknownIdentifier):
        suzy.context("nobody-at-all")


def test_nested_interventions_are_rejected(example1):
    with pytest.raises(NestedIntervention):
        parse_formula("[A<-0]([B<-1](C=1))", example1.model)


def test_inline_contexts_and_context_sets(voting):
    u = parse_context("UA=1, UB=0, UC=0", voting)
    assert u == voting.context("only_a")
    assert parse_context("all_yes", voting) == voting.context("all_yes")
    assert parse_context_set("all", voting).is_all
    assert len(parse_context_set("{all_yes, only_a}", voting)) == 2
    assert parse_context_set(None, voting).is_all


def test_named_k_with_a_filter(tumor9):
    assert tumor9.k_name == "suspicious"
    members = tumor9.k_set().members(tumor9.model)
    assert len(members) == 2 ** 7
    assert all(u["U3"] == 0 and u["U7"] == 0 for u in members)
    assert parse_context_set("suspicious", tumor9) == tumor9.k_set()


def test_values_from_the_command_line():
    assert parse_value("-1") == -1
    assert parse_value("3") == 3
    assert parse_value("low") == "low"


def test_missing_prob_block(example1):
    with pytest.raises(MissingDistribution):
        example1.probabilistic()


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_table_survives_a_round_trip():
    bundle = parse_model(_model("  endo B : {0, 1};", "  eq A := U;", "  table B (A, U) { 1, 1 -> 1; default -> 0; }"))
    text = serialize_model(bundle)
    assert "  table B (A, U) {" in text
    assert "    default -> 0;" in text
    again = parse_model(text)
    _same_behaviour(bundle, again)
    assert serialize_model(again) == text


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_models_round_trip(name):
    bundle = corpus_loader.load_model(name)
    text = serialize_model(bundle)
    again = parse_model(text)
    _same_behaviour(bundle, again)
    assert serialize_model(again) == text
