"""
app/engine/explanation.py - Explanations relative to a set of contexts K, partial explanations with
goodness (alpha, beta), the MMTS definition and the depth-two lift check.

Probabilities are exact ``Fraction`` values throughout.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from app.engine.causation import (
    WitnessConstraint,
    WitnessScope,
    minimal_cause_sets,
)
from app.engine.errors import (
    EmptyCandidate,
    EmptyRestriction,
    InvalidCandidate,
    InvalidContext,
    InvalidRational,
    NotDepthTwoModel,
    WeightSumNotOne,
    ZeroProbabilityCondition,
)
from app.engine.formula import Causal, Conjunction, Formula, Not, PrimitiveEvent, check_formula, holds_in
from app.engine.model import CausalModel, Context, depth_two_output, ensure_within_scale
from app.utils.rationals import format_rational, parse_probability

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Context sets, distributions, goodness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContextSet:
    """Either an explicit ordered set of contexts or ALL (every context of the model)."""
    contexts: Optional[Tuple[Context, ...]] = None

    def __post_init__(self):
        if self.contexts is not None:
            contexts = tuple(self.contexts)
            if len(set(contexts)) != len(contexts):
                raise InvalidContext("a context set lists the same context twice")
            object.__setattr__(self, "contexts", contexts)

    @property
    def is_all(self) -> bool:
        return self.contexts is None

    def members(self, model: CausalModel) -> List[Context]:
        if self.contexts is None:
            ensure_within_scale(model.signature.context_count(), "the context space")
            return list(model.contexts())
        return [model.context(u) for u in self.contexts]

    def __len__(self) -> int:
        if self.contexts is None:
            raise TypeError("the size of ALL depends on the model")
        return len(self.contexts)


ALL = ContextSet()


@dataclass(frozen=True)
class ContextDistribution:
    """Exact probability on contexts; contexts missing from ``weights`` have probability 0."""
    weights: Tuple[Tuple[Context, Fraction], ...]

    def __post_init__(self):
        merged: Dict[Context, Fraction] = {}
        for u, w in self.weights:
            w = Fraction(w)
            if w < 0:
                raise InvalidRational(f"negative weight {format_rational(w)} for {u.label()}")
            if u in merged:
                raise InvalidContext(f"context {u.label()} has two weights")
            merged[u] = w
        total = sum(merged.values(), Fraction(0))
        if total != 1:
            raise WeightSumNotOne(f"weights sum to {format_rational(total)}, not 1",
                                  {"sum": format_rational(total)})
        object.__setattr__(self, "weights", tuple(merged.items()))
        object.__setattr__(self, "_index", merged)

    @classmethod
    def of(cls, mapping: Mapping[Context, Fraction]) -> "ContextDistribution":
        return cls(tuple(mapping.items()))

    @classmethod
    def uniform(cls, contexts: Iterable[Context]) -> "ContextDistribution":
        contexts = list(contexts)
        if not contexts:
            raise EmptyRestriction("cannot spread probability over no contexts")
        share = Fraction(1, len(contexts))
        return cls(tuple((u, share) for u in contexts))

    def as_dict(self) -> Dict[Context, Fraction]:
        return dict(self._index)

    def weight(self, u: Context) -> Fraction:
        return self._index.get(u, Fraction(0))

    def probability(self, contexts: Iterable[Context]) -> Fraction:
        weights = self._index
        return sum((weights.get(u, Fraction(0)) for u in contexts), Fraction(0))

    def support(self) -> List[Context]:
        return [u for u, w in self.weights if w > 0]


def restrict_distribution(distribution: ContextDistribution, k: ContextSet) -> ContextDistribution:
    """Pr conditioned on K."""
    if k.is_all:
        return distribution
    weights = distribution.as_dict()
    mass = distribution.probability(k.contexts)
    if mass == 0:
        raise ZeroProbabilityCondition("the restricted set of contexts has probability 0")
    return ContextDistribution(tuple((u, weights.get(u, Fraction(0)) / mass) for u in k.contexts))


@dataclass(frozen=True)
class GoodnessPair:
    alpha: Fraction
    beta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", parse_probability(self.alpha))
        object.__setattr__(self, "beta", parse_probability(self.beta))

    def meets(self, threshold: "GoodnessPair") -> bool:
        return threshold.alpha <= self.alpha and threshold.beta <= self.beta

    def as_dict(self) -> Dict[str, str]:
        return {"alpha": format_rational(self.alpha), "beta": format_rational(self.beta)}


@dataclass(frozen=True)
class ProbabilisticModel:
    """A causal model with a probability on contexts and the set K of contexts considered possible."""
    model: CausalModel
    distribution: ContextDistribution
    k: ContextSet = ALL


# ---------------------------------------------------------------------------
# Definition variants
# ---------------------------------------------------------------------------

class NecessityMode(str, Enum):
    CONJUNCT_EXTENDABLE = "conjunct-extendable"
    SUBSET_IS_CAUSE = "subset-is-cause"


class ContextScope(str, Enum):
    GIVEN_K = "given-K"
    ALL_CONTEXTS = "all-contexts"


@dataclass(frozen=True)
class DefinitionVariant:
    necessity_mode: NecessityMode = NecessityMode.CONJUNCT_EXTENDABLE
    witness_w_constraint: WitnessConstraint = WitnessConstraint.ACTUAL_VALUES
    context_scope: ContextScope = ContextScope.GIVEN_K
    witness_scope: WitnessScope = WitnessScope.ANY_SET

    def effective_k(self, k: ContextSet) -> ContextSet:
        return ALL if self.context_scope is ContextScope.ALL_CONTEXTS else k


HALPERN = DefinitionVariant()
MMTS = DefinitionVariant(NecessityMode.SUBSET_IS_CAUSE, WitnessConstraint.UNCONSTRAINED,
                         ContextScope.ALL_CONTEXTS, WitnessScope.EMPTY_SET)
PRESETS = {"halpern": HALPERN, "mmts": MMTS}


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NecessityWitness:
    """The actual cause that makes ``context`` pass the necessity clause."""
    context: Context
    conjunct: Tuple
    cause: Conjunction


@dataclass
class ExplanationVerdict:
    holds: bool
    ex1_necessity: bool
    ex1_necessity_contexts: List[NecessityWitness]
    ex1_sufficiency: bool
    ex2_minimal: bool
    ex3_witness: Optional[Context]
    necessity_failure: Optional[Context] = None
    sufficiency_failure: Optional[Context] = None
    blocking_subset: Optional[Conjunction] = None
    achieved: Optional[GoodnessPair] = None

    @property
    def clauses(self) -> Dict[str, bool]:
        if self.achieved is not None:
            return {"EX1'": self.ex1_necessity and self.ex1_sufficiency, "EX2'": self.ex2_minimal,
                    "EX3'": self.ex3_witness is not None}
        return {"EX1-necessity": self.ex1_necessity, "EX1-sufficiency": self.ex1_sufficiency,
                "EX2": self.ex2_minimal, "EX3": self.ex3_witness is not None}


# ---------------------------------------------------------------------------
# Context filters
# ---------------------------------------------------------------------------

def _check_candidate(model: CausalModel, cand) -> Conjunction:
    if cand is None or (not isinstance(cand, Conjunction) and not cand):
        raise EmptyCandidate("an explanation needs at least one conjunct")
    if not isinstance(cand, Conjunction):
        cand = Conjunction.of(cand)
    return cand.check(model)


def k_sat(model: CausalModel, k: ContextSet, psi: Formula) -> ContextSet:
    """The contexts of K satisfying psi (causal formulas allowed)."""
    check_formula(model, psi)
    return ContextSet(tuple(u for u in k.members(model) if holds_in(model, u, psi)))


def necessity_witness(model: CausalModel, u: Context, cand: Conjunction, phi: Formula,
                      variant: DefinitionVariant = HALPERN) -> Optional[NecessityWitness]:
    """The first part of EX1 in context u, per the variant; None when it fails."""
    sets = minimal_cause_sets(model, u, phi, variant.witness_w_constraint, variant.witness_scope)
    actual = None
    if variant.necessity_mode is NecessityMode.CONJUNCT_EXTENDABLE:
        for name, value in cand.events:
            for names in sets:
                if name in names:
                    actual = actual or model.solve(u)
                    return NecessityWitness(u, (name, value), Conjunction(tuple((n, actual[n]) for n in sorted(names))))
        return None
    values = cand.as_dict()
    for names in sets:
        if names <= set(values):
            actual = model.solve(u)
            # AC1 of the subset: it must agree with the candidate in u
            if all(actual[n] == values[n] for n in names):
                first = sorted(names)[0]
                return NecessityWitness(u, (first, values[first]), Conjunction(tuple((n, values[n]) for n in sorted(names))))
    return None


def k_sc2(model: CausalModel, k: ContextSet, cand: Conjunction, phi: Formula,
          variant: DefinitionVariant = HALPERN) -> ContextSet:
    """Contexts of K where X=x and phi hold and the necessity clause is met."""
    check_formula(model, phi, allow_causal=False)
    cand = _check_candidate(model, cand)
    selected = []
    for u in k.members(model):
        actual = model.solve(u)
        if cand.holds(actual) and phi.holds(actual) and necessity_witness(model, u, cand, phi, variant):
            selected.append(u)
    return ContextSet(tuple(selected))


# ---------------------------------------------------------------------------
# Explanations
# ---------------------------------------------------------------------------

@dataclass
class _Ex1:
    necessity: bool
    witnesses: List[NecessityWitness]
    necessity_failure: Optional[Context]
    sufficiency: bool
    sufficiency_failure: Optional[Context]
    ex3_witness: Optional[Context]

    @property
    def holds(self) -> bool:
        return self.necessity and self.sufficiency


def _ex1(model: CausalModel, contexts: List[Context], cand: Conjunction, phi: Formula,
         variant: DefinitionVariant) -> _Ex1:
    settings = cand.as_dict()
    sufficiency_failure = next((u for u in contexts if not phi.holds(model.solve(u, settings))), None)

    # In every context of K where X=x and phi hold: a conjunct extends to a cause (Halpern),
    # or some subset of the candidate is itself a cause (MMTS).
    witnesses: List[NecessityWitness] = []
    necessity_failure = None
    ex3 = None
    for u in contexts:
        actual = model.solve(u)
        if not (cand.holds(actual) and phi.holds(actual)):
            continue
        if ex3 is None:
            ex3 = u
        witness = necessity_witness(model, u, cand, phi, variant)
        if witness is None:
            necessity_failure = u
            break
        witnesses.append(witness)
    return _Ex1(necessity_failure is None, witnesses, necessity_failure,
                sufficiency_failure is None, sufficiency_failure, ex3)


def _ex3(model: CausalModel, contexts: List[Context], cand: Conjunction, phi: Formula) -> Optional[Context]:
    for u in contexts:
        actual = model.solve(u)
        if cand.holds(actual) and phi.holds(actual):
            return u
    return None


def is_explanation(model: CausalModel, k: ContextSet, cand, phi: Formula,
                   variant: DefinitionVariant = HALPERN) -> ExplanationVerdict:
    """Is X=x an explanation of phi relative to K?

    EX1 (necessity) a conjunct extends to an actual cause in every context of K
    where X=x and phi hold; EX1 (sufficiency) [X <- x]phi in every context of K;
    EX2 no strict subset satisfies EX1; EX3 X=x and phi hold in some context of K.
    """
    check_formula(model, phi, allow_causal=False)
    cand = _check_candidate(model, cand)
    contexts = variant.effective_k(k).members(model)

    first = _ex1(model, contexts, cand, phi, variant)
    blocking = None
    for subset in cand.strict_subsets():
        if _ex1(model, contexts, subset, phi, variant).holds:
            blocking = subset
            break
    ex3 = first.ex3_witness or _ex3(model, contexts, cand, phi)
    holds = first.holds and blocking is None and ex3 is not None
    return ExplanationVerdict(holds, first.necessity, first.witnesses, first.sufficiency, blocking is None, ex3,
                              first.necessity_failure, first.sufficiency_failure, blocking)


def _candidates(model: CausalModel, pool: List[str], max_size: int) -> Iterator[Conjunction]:
    sig = model.signature
    for size in range(1, max_size + 1):
        for names in itertools.combinations(pool, size):
            for values in itertools.product(*(sig.range_of(n) for n in names)):
                yield Conjunction(tuple(zip(names, values)))


def _candidate_pool(model: CausalModel, phi: Formula, include_outcome: bool, candidate_vars) -> List[str]:
    if candidate_vars is not None:
        pool = sorted(set(candidate_vars))
        for name in pool:
            check_formula(model, PrimitiveEvent(name, model.signature.range_of(name)[0]))
        return pool
    outcome = set() if include_outcome else set(phi.variables())
    return [n for n in model.signature.endogenous_names if n not in outcome]


def find_explanations(model: CausalModel, k: ContextSet, phi: Formula,
                      variant: DefinitionVariant = HALPERN, max_size: Optional[int] = None,
                      include_outcome: bool = False, candidate_vars=None) -> List[Tuple[Conjunction, ExplanationVerdict]]:
    """Every explanation of phi with at most ``max_size`` conjuncts (default |V| - 1), canonical order."""
    check_formula(model, phi, allow_causal=False)
    contexts = variant.effective_k(k).members(model)
    pool = _candidate_pool(model, phi, include_outcome, candidate_vars)
    limit = len(model.signature.endogenous_names) - 1 if max_size is None else max_size
    limit = min(limit, len(pool))

    ex1_cache: Dict[Conjunction, _Ex1] = {}
    found: List[Tuple[Conjunction, ExplanationVerdict]] = []
    examined = 0
    for cand in _candidates(model, pool, limit):
        examined += 1
        result = _ex1(model, contexts, cand, phi, variant)
        ex1_cache[cand] = result
        if not result.holds or result.ex3_witness is None:
            continue
        blocking = next((s for s in cand.strict_subsets() if ex1_cache[s].holds), None)
        if blocking is not None:
            continue
        found.append((cand, ExplanationVerdict(True, True, result.witnesses, True, True, result.ex3_witness)))
    logger.debug(f"Examined {examined} candidates, {len(found)} explanations of {phi}")
    return found


# ---------------------------------------------------------------------------
# Partial explanations
# ---------------------------------------------------------------------------

def conditional_goodness(model: CausalModel, distribution: ContextDistribution, contexts: List[Context],
              cand: Conjunction, phi: Formula, variant: DefinitionVariant
              ) -> Tuple[Optional[GoodnessPair], List[NecessityWitness], Optional[Context]]:
    """(alpha, beta) reached by X=x, or None when Pr(K_{X=x & phi}) is 0 (also when no such context exists)."""
    settings = cand.as_dict()
    sufficient = [u for u in contexts if phi.holds(model.solve(u, settings))]
    matching, witnesses, ex3 = [], [], None
    for u in contexts:
        actual = model.solve(u)
        if cand.holds(actual) and phi.holds(actual):
            matching.append(u)
            ex3 = ex3 or u
            witness = necessity_witness(model, u, cand, phi, variant)
            if witness is not None:
                witnesses.append(witness)
    condition = distribution.probability(matching)
    if condition == 0:
        return None, witnesses, ex3
    alpha = distribution.probability(w.context for w in witnesses) / condition
    beta = distribution.probability(sufficient)
    return GoodnessPair(alpha, beta), witnesses, ex3


def is_partial_explanation(model: CausalModel, distribution: ContextDistribution, k: ContextSet, cand,
                           phi: Formula, goodness: GoodnessPair,
                           variant: DefinitionVariant = HALPERN) -> ExplanationVerdict:
    """Is X=x a partial explanation of phi with goodness (alpha, beta) relative to K?

    alpha bounds Pr(necessity contexts | K_{X=x & phi}), beta bounds Pr(K_{[X <- x]phi}).
    """
    check_formula(model, phi, allow_causal=False)
    cand = _check_candidate(model, cand)
    contexts = variant.effective_k(k).members(model)

    achieved, witnesses, ex3 = conditional_goodness(model, distribution, contexts, cand, phi, variant)
    if achieved is None:
        raise ZeroProbabilityCondition(f"Pr(X=x & phi) is 0 for candidate {cand}",
                                       {"candidate": str(cand), "phi": str(phi)})
    blocking = None
    for subset in cand.strict_subsets():
        sub, _, _ = conditional_goodness(model, distribution, contexts, subset, phi, variant)
        if sub is not None and sub.meets(goodness):
            blocking = subset
            break
    ex1_alpha = goodness.alpha <= achieved.alpha
    ex1_beta = goodness.beta <= achieved.beta
    holds = ex1_alpha and ex1_beta and blocking is None and ex3 is not None
    return ExplanationVerdict(holds, ex1_alpha, witnesses, ex1_beta, blocking is None, ex3,
                              blocking_subset=blocking, achieved=achieved)


@dataclass
class PartialSearch:
    """Outcome of a threshold search: the partial explanations, the near misses and the zero-probability count.

    A near miss fails (alpha, beta) but no strict subset reaches the thresholds lowered to what the
    near miss itself achieves.
    """
    found: List[Tuple[Conjunction, ExplanationVerdict]]
    rejected: List[Tuple[Conjunction, ExplanationVerdict]]
    skipped: int


def search_partial_explanations(model: CausalModel, distribution: ContextDistribution, k: ContextSet,
                                phi: Formula, goodness: GoodnessPair, variant: DefinitionVariant = HALPERN,
                                max_size: Optional[int] = None, include_outcome: bool = False,
                                candidate_vars=None) -> PartialSearch:
    check_formula(model, phi, allow_causal=False)
    contexts = variant.effective_k(k).members(model)
    pool = _candidate_pool(model, phi, include_outcome, candidate_vars)
    limit = len(model.signature.endogenous_names) - 1 if max_size is None else max_size
    limit = min(limit, len(pool))

    reached: Dict[Conjunction, Optional[GoodnessPair]] = {}
    search = PartialSearch([], [], 0)
    for cand in _candidates(model, pool, limit):
        achieved, witnesses, ex3 = conditional_goodness(model, distribution, contexts, cand, phi, variant)
        reached[cand] = achieved
        if achieved is None:
            search.skipped += 1
            continue
        meets = achieved.meets(goodness)
        bar = goodness if meets else GoodnessPair(min(goodness.alpha, achieved.alpha),
                                                  min(goodness.beta, achieved.beta))
        blocking = next((s for s in cand.strict_subsets()
                         if reached[s] is not None and reached[s].meets(bar)), None)
        if blocking is not None:
            continue
        verdict = ExplanationVerdict(meets, goodness.alpha <= achieved.alpha, witnesses,
                                     goodness.beta <= achieved.beta, True, ex3, achieved=achieved)
        (search.found if meets else search.rejected).append((cand, verdict))
    if search.skipped:
        logger.debug(f"Skipped {search.skipped} candidates with Pr(X=x & {phi}) = 0")
    return search


def find_partial_explanations(model: CausalModel, distribution: ContextDistribution, k: ContextSet,
                              phi: Formula, goodness: GoodnessPair, variant: DefinitionVariant = HALPERN,
                              max_size: Optional[int] = None, include_outcome: bool = False,
                              candidate_vars=None) -> Tuple[List[Tuple[Conjunction, ExplanationVerdict]], int]:
    """Partial explanations meeting ``goodness``; also returns how many candidates had Pr(X=x & phi) = 0."""
    search = search_partial_explanations(model, distribution, k, phi, goodness, variant, max_size,
                                         include_outcome, candidate_vars)
    return search.found, search.skipped


# ---------------------------------------------------------------------------
# Depth-two lifts
# ---------------------------------------------------------------------------

@dataclass
class Theorem2Report:
    cond1: bool
    cond2: bool
    cond3: bool
    direct_verdict: bool
    details: Dict[str, str] = field(default_factory=dict)

    @property
    def implication_holds(self) -> bool:
        return not (self.cond1 and self.cond2 and self.cond3) or self.direct_verdict

    def as_dict(self) -> Dict[str, object]:
        return {"cond1": self.cond1, "cond2": self.cond2, "cond3": self.cond3,
                "direct_verdict": self.direct_verdict, "implication_holds": self.implication_holds,
                **self.details}


@dataclass(frozen=True)
class LiftBounds:
    """The quantities the depth-two sufficient conditions compare against (alpha, beta)."""
    beta: Fraction  # Pr([X <- x] O=o)
    alpha: Fraction  # Pr(some setting of X flips O | X=x & O=o)
    subset_betas: Tuple[Tuple[Conjunction, Fraction], ...]

    def tight(self) -> GoodnessPair:
        return GoodnessPair(self.alpha, self.beta)


def lift_bounds(model: CausalModel, distribution: ContextDistribution, cand, o) -> LiftBounds:
    output = depth_two_output(model)
    if output is None:
        raise NotDepthTwoModel("the model is not a depth-two classifier lift")
    cand = _check_candidate(model, cand)
    if output in cand.variables:
        raise InvalidCandidate(f"{cand} mentions the classifier output {output}", {"candidate": str(cand)})
    phi = PrimitiveEvent(output, o)
    check_formula(model, phi)
    contexts = list(model.contexts())

    def forced(c: Conjunction) -> Fraction:
        return distribution.probability(k_sat(model, ALL, Causal(c.intervention(), phi)).contexts)

    matching = [u for u in contexts if cand.holds(model.solve(u)) and phi.holds(model.solve(u))]
    condition = distribution.probability(matching)
    if condition == 0:
        raise ZeroProbabilityCondition(f"Pr(X=x & {phi}) is 0 for candidate {cand}", {"candidate": str(cand)})
    names = cand.variables
    flip = Not(phi)
    flippable = [
        u for u in matching
        if any(flip.holds(model.solve(u, dict(zip(names, x))))
               for x in itertools.product(*(model.signature.range_of(n) for n in names)))
    ]
    return LiftBounds(forced(cand), distribution.probability(flippable) / condition,
                      tuple((s, forced(s)) for s in cand.strict_subsets()))


def verify_theorem2(model: CausalModel, distribution: ContextDistribution, cand, o,
                    goodness: GoodnessPair) -> Theorem2Report:
    """Compare the three sufficient conditions for a partial explanation of O=o in a depth-two lift
    with the direct verdict (Halpern definition, K = all contexts)."""
    if goodness.alpha <= 0 or goodness.beta <= 0:
        raise InvalidRational("alpha and beta must both be positive", goodness.as_dict())
    bounds = lift_bounds(model, distribution, cand, o)
    cand = _check_candidate(model, cand)
    phi = PrimitiveEvent(depth_two_output(model), o)

    cond1 = goodness.beta <= bounds.beta
    cond2 = not any(goodness.beta <= beta for _, beta in bounds.subset_betas)
    cond3 = goodness.alpha <= bounds.alpha

    direct = is_partial_explanation(model, distribution, ALL, cand, phi, goodness).holds
    report = Theorem2Report(cond1, cond2, cond3, direct,
                            {"beta_bound": format_rational(bounds.beta), "alpha_bound": format_rational(bounds.alpha)})
    if not report.implication_holds:
        logger.warning(f"⚠️ Conditions hold but {cand} is not a partial explanation of {phi}")
    return report
