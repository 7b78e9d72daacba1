from fractions import Fraction

import pytest

from app.engine.errors import (
    InvalidCandidate,
    InvalidRational,
    NotDepthTwoModel,
    WeightSumNotOne,
    ZeroProbabilityCondition,
)
from app.engine.explanation import (
    ALL,
    HALPERN,
    MMTS,
    ContextDistribution,
    ContextSet,
    GoodnessPair,
    conditional_goodness,
    find_explanations,
    find_partial_explanations,
    is_explanation,
    is_partial_explanation,
    k_sat,
    k_sc2,
    lift_bounds,
    restrict_distribution,
    search_partial_explanations,
    verify_theorem2,
)
from app.dsl.parser import parse_model
from app.engine.formula import Conjunction, PrimitiveEvent

WIN = PrimitiveEvent("WIN", 1)
NO_LABEL = PrimitiveEvent("O", 0)


def _names(found):
    return [str(cand) for cand, _ in found]


# ---------------------------------------------------------------------------
# Voting: the two definitions disagree
# ---------------------------------------------------------------------------

def test_halpern_explanations_of_a_win(voting):
    assert _names(find_explanations(voting.model, ALL, WIN, HALPERN)) == ["A=1", "B=1", "C=1"]


def test_mmts_explanations_of_a_win(voting):
    assert _names(find_explanations(voting.model, ALL, WIN, MMTS)) == ["A=1 & B=1 & C=1"]


def test_single_vote_fails_mmts_necessity(voting):
    verdict = is_explanation(voting.model, ALL, Conjunction.of({"A": 1}), WIN, MMTS)
    assert not verdict.holds
    assert not verdict.ex1_necessity
    assert verdict.necessity_failure is not None
    assert verdict.necessity_failure.as_dict() == {"UA": 1, "UB": 0, "UC": 1}


def test_explanation_needs_a_context_where_it_happens(voting):
    only_a = ContextSet((voting.context("only_a"),))
    verdict = is_explanation(voting.model, only_a, Conjunction.of({"B": 1}), WIN)
    assert verdict.ex1_sufficiency
    assert verdict.ex3_witness is None
    assert not verdict.holds


def test_larger_candidates_are_blocked_by_their_subsets(voting):
    verdict = is_explanation(voting.model, ALL, Conjunction.of({"A": 1, "B": 1}), WIN)
    assert not verdict.ex2_minimal
    assert str(verdict.blocking_subset) == "A=1"


TERNARY = """
model ternary {
  exo U : {0, 1, 2};
  endo A : {0, 1, 2};
  endo O : {0, 1};
  eq A := U;
  eq O := ite(A == 0, 0, 1);
}
"""


def test_mmts_necessity_only_looks_where_the_candidate_holds():
    model = parse_model(TERNARY).model
    on = PrimitiveEvent("O", 1)
    verdict = is_explanation(model, ALL, Conjunction.of({"A": 2}), on, MMTS)
    assert verdict.holds
    assert verdict.necessity_failure is None
    assert [w.context.as_dict() for w in verdict.ex1_necessity_contexts] == [{"U": 2}]
    assert [u.as_dict() for u in k_sc2(model, ALL, Conjunction.of({"A": 2}), on, MMTS).contexts] == [{"U": 2}]
    assert _names(find_explanations(model, ALL, on, MMTS)) == ["A=1", "A=2"]
    assert _names(find_explanations(model, ALL, on, HALPERN)) == ["A=1", "A=2"]


# ---------------------------------------------------------------------------
# Suzy and Billy
# ---------------------------------------------------------------------------

def test_suzy_throwing_explains_the_broken_bottle(suzy):
    phi = PrimitiveEvent("BS", 1)
    cand = Conjunction.of({"ST": 1})
    assert is_explanation(suzy.model, suzy.k_set(), cand, phi).holds
    pm = suzy.probabilistic()
    verdict = is_partial_explanation(suzy.model, pm.distribution, pm.k, cand, phi, GoodnessPair(1, 1))
    assert verdict.holds
    assert verdict.achieved == GoodnessPair(Fraction(1), Fraction(1))
    assert verdict.clauses == {"EX1'": True, "EX2'": True, "EX3'": True}


def test_k_sat_with_a_causal_formula(suzy):
    from app.engine.formula import Causal
    from app.engine.model import Intervention

    forced = k_sat(suzy.model, ALL, Causal(Intervention.of({"ST": 0}), PrimitiveEvent("BS", 1)))
    assert sorted(u["UBT"] for u in forced.contexts) == [1, 1]


# ---------------------------------------------------------------------------
# Parity
# ---------------------------------------------------------------------------

def test_parity_goodness_is_exact(parity5):
    pm = parity5.probabilistic()
    cand = Conjunction.of({"X1": 0})
    verdict = is_partial_explanation(parity5.model, pm.distribution, ALL, cand, NO_LABEL,
                                     GoodnessPair(Fraction(1, 8), Fraction(9, 10)))
    assert verdict.holds
    assert verdict.achieved == GoodnessPair(Fraction(1, 8), Fraction(9, 10))

    stricter = is_partial_explanation(parity5.model, pm.distribution, ALL, cand, NO_LABEL,
                                      GoodnessPair(Fraction(1, 4), Fraction(9, 10)))
    assert not stricter.holds
    assert stricter.ex1_sufficiency and not stricter.ex1_necessity
    assert stricter.achieved.alpha == Fraction(1, 8)


def test_parity_necessity_holds_in_the_all_ones_tail_only(parity5):
    selected = k_sc2(parity5.model, ALL, Conjunction.of({"X1": 0}), NO_LABEL)
    assert [u.as_dict() for u in selected.contexts] == [{"U1": 0, "U2": 1, "U3": 1, "U4": 1, "U5": 1}]


def test_conditional_goodness_counts_the_witness_contexts(parity5):
    pm = parity5.probabilistic()
    contexts = list(parity5.model.contexts())
    achieved, witnesses, ex3 = conditional_goodness(parity5.model, pm.distribution, contexts,
                                                    Conjunction.of({"X1": 0}), NO_LABEL, HALPERN)
    assert achieved == GoodnessPair(Fraction(1, 8), Fraction(9, 10))
    assert [w.context.as_dict() for w in witnesses] == [{"U1": 0, "U2": 1, "U3": 1, "U4": 1, "U5": 1}]
    assert ex3 is not None and ex3.as_dict()["U1"] == 0


def test_parity_other_first_pixel_is_weaker(parity5):
    pm = parity5.probabilistic()
    verdict = is_partial_explanation(parity5.model, pm.distribution, ALL, Conjunction.of({"X1": 1}), NO_LABEL,
                                     GoodnessPair(0, 0))
    assert verdict.achieved.beta == Fraction(63, 80)
    assert verdict.achieved.beta < Fraction(9, 10)


def test_partial_search_reports_zero_probability_candidates(suzy):
    nobody = suzy.context("nobody")
    distribution = ContextDistribution.of({nobody: Fraction(1)})
    found, skipped = find_partial_explanations(suzy.model, distribution, ALL, PrimitiveEvent("BS", 0),
                                               GoodnessPair(1, 1), max_size=1)
    assert "ST=0" in _names(found)
    assert skipped > 0
    with pytest.raises(ZeroProbabilityCondition):
        is_partial_explanation(suzy.model, distribution, ALL, Conjunction.of({"ST": 1}),
                               PrimitiveEvent("BS", 1), GoodnessPair(1, 1))


def test_threshold_search_keeps_near_misses(parity5):
    pm = parity5.probabilistic()
    search = search_partial_explanations(parity5.model, pm.distribution, ALL, NO_LABEL,
                                         GoodnessPair(Fraction(1, 4), 0))
    assert _names(search.found) == ["X2=0", "X2=1", "X3=0", "X3=1", "X4=0", "X4=1", "X5=0", "X5=1"]
    assert _names(search.rejected) == ["X1=0", "X1=1"]
    achieved = {str(cand): verdict.achieved for cand, verdict in search.rejected}
    assert achieved["X1=0"] == GoodnessPair(Fraction(1, 8), Fraction(9, 10))
    assert achieved["X1=1"] == GoodnessPair(0, Fraction(63, 80))
    assert not any(verdict.holds or verdict.ex1_necessity for _, verdict in search.rejected)


@pytest.mark.parametrize("fixture, phi", [("voting", WIN), ("suzy", PrimitiveEvent("BS", 1))])
def test_explanations_under_full_support_are_perfect_partial_ones(request, fixture, phi):
    model = request.getfixturevalue(fixture).model
    uniform = ContextDistribution.uniform(model.contexts())
    found = find_explanations(model, ALL, phi, HALPERN)
    assert found
    for cand, _ in found:
        verdict = is_partial_explanation(model, uniform, ALL, cand, phi, GoodnessPair(1, 1), HALPERN)
        assert verdict.holds, str(cand)
        assert verdict.achieved == GoodnessPair(1, 1)


THRESHOLDS = [GoodnessPair(Fraction(a), Fraction(b)) for a, b in
              [("1", "1/2"), ("1/4", "0"), ("1/8", "9/10"), ("1/2", "1/2"), ("0", "0")]]


@pytest.mark.parametrize("strict", THRESHOLDS)
@pytest.mark.parametrize("loose", THRESHOLDS)
def test_lowering_thresholds_keeps_or_shrinks_explanations(parity5, strict, loose):
    if not (loose.alpha <= strict.alpha and loose.beta <= strict.beta):
        pytest.skip("not a weaker pair of thresholds")
    model, distribution = parity5.model, parity5.probabilistic().distribution
    strict_found, _ = find_partial_explanations(model, distribution, ALL, NO_LABEL, strict, max_size=2)
    loose_found = {cand for cand, _ in find_partial_explanations(model, distribution, ALL, NO_LABEL, loose,
                                                                 max_size=2)[0]}
    for cand, _ in strict_found:
        assert cand in loose_found or any(s in loose_found for s in cand.strict_subsets()), str(cand)
        verdict = is_partial_explanation(model, distribution, ALL, cand, NO_LABEL, loose)
        assert verdict.ex1_necessity and verdict.ex1_sufficiency
        assert verdict.ex3_witness is not None


# ---------------------------------------------------------------------------
# Distributions and goodness
# ---------------------------------------------------------------------------

def test_distribution_must_sum_to_one(voting):
    with pytest.raises(WeightSumNotOne):
        ContextDistribution.of({voting.context("only_a"): Fraction(1, 2)})


def test_restricting_renormalises(voting):
    pm = voting.probabilistic()
    k = ContextSet((voting.context("all_yes"), voting.context("only_a")))
    restricted = restrict_distribution(pm.distribution, k)
    assert restricted.weight(voting.context("only_a")) == Fraction(1, 2)
    assert restricted.probability(k.contexts) == 1


def test_goodness_bounds():
    with pytest.raises(InvalidRational):
        GoodnessPair(Fraction(11, 10), 1)
    assert GoodnessPair("9/10", "0.9") == GoodnessPair(Fraction(9, 10), Fraction(9, 10))
    assert GoodnessPair(1, 1).meets(GoodnessPair(Fraction(9, 10), Fraction(1, 2)))


# ---------------------------------------------------------------------------
# Depth-two lifts
# ---------------------------------------------------------------------------

def test_lift_bounds_for_parity(parity5):
    pm = parity5.probabilistic()
    bounds = lift_bounds(parity5.model, pm.distribution, Conjunction.of({"X1": 0}), 0)
    assert bounds.beta == Fraction(9, 10)
    assert bounds.alpha == Fraction(1, 8)
    report = verify_theorem2(parity5.model, pm.distribution, Conjunction.of({"X1": 0}), 0, bounds.tight())
    assert report.cond1 and report.cond2 and report.cond3
    assert report.direct_verdict


def test_lift_bounds_need_a_depth_two_model(suzy):
    with pytest.raises(NotDepthTwoModel):
        lift_bounds(suzy.model, suzy.probabilistic().distribution, Conjunction.of({"ST": 1}), 1)


def test_lift_conditions_reject_candidates_on_the_output(parity5):
    pm = parity5.probabilistic()
    half = GoodnessPair(Fraction(1, 2), Fraction(1, 2))
    with pytest.raises(InvalidCandidate) as e:
        verify_theorem2(parity5.model, pm.distribution, Conjunction.of({"O": 0, "X1": 0}), 0, half)
    assert e.value.code == "invalid_candidate"
