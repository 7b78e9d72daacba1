from fractions import Fraction

import pytest

from app.engine.causation import is_causally_independent, is_determined_by_context
from app.engine.errors import EmptyRestriction, InvalidContext, ValueOutOfRange, ZeroProbabilityCondition
from app.engine.explanation import (
    ALL,
    HALPERN,
    MMTS,
    ContextDistribution,
    ContextSet,
    GoodnessPair,
    ProbabilisticModel,
    find_explanations,
    is_explanation,
    is_partial_explanation,
    restrict_distribution,
)
from app.engine.formula import Conjunction, Or, PrimitiveEvent, And
from app.engine.model import depth_two_output
from app.services import corpus_loader
from app.services.classifier_bridge import (
    GridSpec,
    Labeler,
    RegionMask,
    explain_absence,
    format_image_corpus,
    independent_pixel_distribution,
    is_depth_two,
    lift_classifier,
    parity_distribution,
    parse_image_corpus,
    pixel_net,
    rare_event_reweight,
    restrict_contexts,
)
from app.services.verification import conjunctions

ON = PrimitiveEvent("O", 1)
OFF = PrimitiveEvent("O", 0)


@pytest.fixture(scope="module")
def any_on():
    return lift_classifier(GridSpec(3, 1), Labeler.parse("any-on"))


@pytest.fixture(scope="module")
def parity_lift():
    return lift_classifier(GridSpec(5, 1), Labeler.parse("parity-first-pixel"), parity_distribution(2))


def _names(found):
    return [str(cand) for cand, _ in found]


def test_lift_is_well_formed(any_on):
    model = any_on.model
    pixels = list(any_on.grid.pixel_names)
    assert depth_two_output(model) == "O"
    assert is_depth_two(model)
    assert is_causally_independent(model, pixels).holds
    assert is_determined_by_context(model, pixels).holds
    assert set(model.parents("O")) <= set(pixels)


def test_structured_models_are_not_lifts(suzy):
    assert not is_depth_two(suzy.model)


def _verdicts(model, cand, phi):
    plain = is_explanation(model, ALL, cand, phi, HALPERN)
    fields = (plain.holds, plain.ex1_necessity, plain.ex1_sufficiency, plain.ex2_minimal,
              plain.ex3_witness is not None)
    try:
        partial = is_partial_explanation(model, ContextDistribution.uniform(model.contexts()), ALL, cand, phi,
                                         GoodnessPair(Fraction(1, 2), Fraction(1, 2)), HALPERN)
    except ZeroProbabilityCondition:
        return fields, None
    return fields, (partial.holds, partial.achieved)


def test_any_on_lift_explains_like_the_voting_model(any_on, voting):
    lifted = find_explanations(any_on.model, ALL, ON, HALPERN)
    hand_built = find_explanations(voting.model, ALL, PrimitiveEvent("WIN", 1), HALPERN)
    assert _names(lifted) == ["X1=1", "X2=1", "X3=1"]
    assert len(lifted) == len(hand_built)
    assert _names(find_explanations(any_on.model, ALL, ON, MMTS)) == ["X1=1 & X2=1 & X3=1"]

    rename = {"X1": "A", "X2": "B", "X3": "C"}
    for o in (0, 1):
        for cand in conjunctions(any_on.model, list(rename)):
            twin = Conjunction(tuple((rename[n], v) for n, v in cand.events))
            assert _verdicts(any_on.model, cand, PrimitiveEvent("O", o)) == \
                _verdicts(voting.model, twin, PrimitiveEvent("WIN", o)), str(cand)


def test_identity_labeler_on_one_pixel():
    lifted = lift_classifier(GridSpec(1, 1), Labeler.parse("any-on"))
    for u, values in lifted.model.evaluate_all():
        assert values["O"] == values["X1"]


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

def test_parity_distribution_weights():
    dist = parity_distribution(2)
    assert dist.weight((0, 0, 0, 0, 0)) == Fraction(9, 160)
    assert dist.weight((0, 0, 0, 0, 1)) == Fraction(1, 160)
    first_clear = [(img, w) for img, w in dist.entries if img[0] == 0]
    assert sum(w for _, w in first_clear) == Fraction(1, 2)


def test_parity_label_given_a_clear_first_pixel(parity_lift):
    model = parity_lift.model
    dist = parity_lift.distribution
    clear = [u for u in model.contexts() if model.solve(u)["X1"] == 0]
    negative = [u for u in clear if model.solve(u)["O"] == 0]
    assert dist.probability(negative) / dist.probability(clear) == Fraction(9, 10)


def test_parity_goodness_with_seven_pixels():
    lifted = lift_classifier(GridSpec(7, 1), Labeler.parse("parity-first-pixel"), parity_distribution(3))
    verdict = is_partial_explanation(lifted.model, lifted.distribution, ALL, Conjunction.of({"X1": 0}), OFF,
                                     GoodnessPair(Fraction(1, 32), Fraction(9, 10)))
    assert verdict.holds
    assert verdict.achieved == GoodnessPair(Fraction(1, 32), Fraction(9, 10))


def test_shipped_parity_corpus_matches_the_construction():
    grid = GridSpec(5, 1)
    loaded = corpus_loader.load_image_corpus("parity5", grid)
    assert dict(loaded.entries) == dict(parity_distribution(2).entries)
    assert parse_image_corpus(format_image_corpus(loaded), grid) == loaded


def test_corpus_lines_are_pixels_then_weight():
    grid = GridSpec(2, 1)
    plain = parse_image_corpus("0 1 1/4\n1 1 0.75\n", grid)
    assert dict(plain.entries) == {(0, 1): Fraction(1, 4), (1, 1): Fraction(3, 4)}
    assert parse_image_corpus("# two pixels\n0, 1 : 1/4\n1, 1 : 3/4\n", grid) == plain
    with pytest.raises(InvalidContext):
        parse_image_corpus("1/2\n", grid)


def test_independent_pixels():
    dist = independent_pixel_distribution(GridSpec(2, 1), {0: Fraction(1, 4), 1: Fraction(3, 4)})
    assert dist.weight((1, 1)) == Fraction(9, 16)
    assert dist.weight((0, 1)) == Fraction(3, 16)


# ---------------------------------------------------------------------------
# Restriction and reweighting
# ---------------------------------------------------------------------------

def test_mask_restricts_the_contexts(any_on):
    kept = restrict_contexts(any_on, RegionMask({"X3"}, 0))
    assert len(kept.contexts) == 4
    assert all(any_on.image_of(u)[2] == 0 for u in kept.contexts)
    assert len(restrict_contexts(any_on, RegionMask(set(), 0)).contexts) == 8


def test_mask_errors(any_on):
    with pytest.raises(ValueOutOfRange):
        restrict_contexts(any_on, RegionMask({"X1"}, 2))
    lit = any_on.grid.context((1, 1, 1))
    narrowed = ProbabilisticModel(any_on.model, any_on.distribution, ContextSet((lit,)))
    with pytest.raises(EmptyRestriction):
        restrict_contexts(narrowed, RegionMask({"X1"}, 0))


def test_rare_event_reweighting(parity_lift):
    reweighted = rare_event_reweight(parity_lift, ON)
    assert sum(w for _, w in reweighted.entries) == 1
    assert reweighted.weight((1, 1, 1, 1, 1)) == Fraction(9, 25)
    assert all(parity_lift.model.solve(parity_lift.grid.context(img))["O"] == 1 for img, _ in reweighted.entries)

    unchanged = rare_event_reweight(parity_lift, Or(ON, OFF))
    assert unchanged.entries == parity_lift.images.entries
    with pytest.raises(ZeroProbabilityCondition):
        rare_event_reweight(parity_lift, And(ON, OFF))


# ---------------------------------------------------------------------------
# Explaining a negative label
# ---------------------------------------------------------------------------

def test_nobody_voting_explains_a_loss(any_on):
    found = explain_absence(any_on, ALL, 0, GoodnessPair(1, 1))
    assert [(str(c), g.as_dict()) for c, g in found] == [
        ("X1=0 & X2=0 & X3=0", {"alpha": "1/1", "beta": "1/1"})
    ]


def test_absence_of_a_tumour(tumor9):
    pm = tumor9.probabilistic()
    k = tumor9.k_set()
    goodness = GoodnessPair(Fraction(9, 10), Fraction(9, 10))
    found = explain_absence(pm, k, 0, goodness, max_size=2)
    names = {str(c) for c, _ in found}
    expected = {"X5=0"} | {f"{a}=0 & {b}=0" for a in ("X1", "X2", "X4") for b in ("X6", "X8", "X9")}
    assert names == expected
    restricted = restrict_distribution(pm.distribution, k)
    for cand, achieved in found:
        assert achieved.meets(goodness)
        assert is_partial_explanation(tumor9.model, restricted, k, cand, OFF, goodness).holds


def test_absence_rejects_a_label_outside_the_range(any_on):
    with pytest.raises(ValueOutOfRange):
        explain_absence(any_on, ALL, 5, GoodnessPair(1, 1))


def test_absence_with_a_mask_skips_masked_pixels(any_on):
    found = explain_absence(any_on, ALL, 0, GoodnessPair(Fraction(1, 2), Fraction(1, 4)),
                            mask=RegionMask({"X1"}, 0))
    assert all("X1" not in cand.variables for cand, _ in found)


# ---------------------------------------------------------------------------
# Pixel nets
# ---------------------------------------------------------------------------

def _covers_every_square(grid: GridSpec, net, size: int) -> bool:
    for top in range(grid.height - size + 1):
        for left in range(grid.width - size + 1):
            square = {grid.pixel(r, c) for r in range(top, top + size) for c in range(left, left + size)}
            if not square & net:
                return False
    return True


def test_net_on_a_four_by_four_grid():
    grid = GridSpec(4, 4)
    net = pixel_net(grid, 2)
    assert net == {grid.pixel(0, 0), grid.pixel(0, 2), grid.pixel(2, 0), grid.pixel(2, 2)}
    assert _covers_every_square(grid, net, 2)


def test_small_grids():
    assert pixel_net(GridSpec(1, 1), 2) == {"X1"}
    assert pixel_net(GridSpec(2, 2), 3) == {"X1"}
    with pytest.raises(ValueOutOfRange):
        pixel_net(GridSpec(2, 2), 1)
