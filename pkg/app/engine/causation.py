"""
app/engine/causation.py - Actual causes (modified HP definition), but-for causes and sufficient causes.

All searches are exhaustive. Witnesses are reported in canonical order: the
smallest witness set W first (then lexicographic by variable name), and for each
W the alternative settings x' in lexicographic order of the declared ranges.

Per-context cause sets are computed once and memoised: AC2 is upward closed
(a set containing an AC2 set also satisfies AC2 by freezing the extra
variables), so the actual causes in a context are exactly the minimal AC2 sets,
and they can be enumerated by size while skipping supersets of sets already
found.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from app.engine.errors import UnknownVariable
from app.engine.expressions import Value
from app.engine.formula import Conjunction, Formula, check_formula
from app.engine.model import CausalModel, Context, ensure_within_scale

logger = logging.getLogger(__name__)


class WitnessConstraint(str, Enum):
    ACTUAL_VALUES = "actual-values"
    UNCONSTRAINED = "unconstrained"


class WitnessScope(str, Enum):
    ANY_SET = "any-set"
    EMPTY_SET = "empty-set"


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActualCauseWitness:
    """AC2 witness: [X <- alt_setting, W <- fixed_set] makes phi false."""
    alt_setting: Tuple[Tuple[str, Value], ...]
    fixed_set: Tuple[Tuple[str, Value], ...] = ()

    def as_dict(self) -> Dict[str, object]:
        return {"alt_setting": dict(self.alt_setting), "fixed_set": dict(self.fixed_set)}


@dataclass(frozen=True)
class MinimalityCheck:
    subset: Conjunction
    satisfied: bool


@dataclass
class ActualCauseVerdict:
    holds: bool
    clauses: Dict[str, bool]
    witness: Optional[ActualCauseWitness] = None
    failed_clause: Optional[str] = None
    minimality_trace: List[MinimalityCheck] = field(default_factory=list)


@dataclass(frozen=True)
class SufficientCauseWitness:
    chosen_conjunct: Tuple[str, Value]
    extension: Tuple[Tuple[str, Value], ...]
    inner: ActualCauseWitness

    @property
    def cause(self) -> Conjunction:
        return Conjunction((self.chosen_conjunct,) + self.extension)


@dataclass
class SufficientCauseVerdict:
    holds: bool
    clauses: Dict[str, bool]
    witness: Optional[SufficientCauseWitness] = None
    failed_clause: Optional[str] = None
    failing_context: Optional[Context] = None
    minimality_trace: List[MinimalityCheck] = field(default_factory=list)


@dataclass(frozen=True)
class IndependenceCounterexample:
    context: Context
    intervened: Tuple[Tuple[str, Value], ...]
    variable: str


@dataclass
class IndependenceVerdict:
    holds: bool
    counterexample: Optional[IndependenceCounterexample] = None


@dataclass
class DeterminationVerdict:
    holds: bool
    missing_setting: Optional[Tuple[Tuple[str, Value], ...]] = None


@dataclass
class Theorem1Report:
    cond_a: bool
    cond_b: bool
    cond_c: bool
    cond_d: bool
    cond_e: bool
    sc1: bool
    sc2: bool
    sc3: bool
    sc4: bool

    @property
    def applicable(self) -> bool:
        return self.cond_a and self.cond_b and self.cond_c and self.cond_d and self.cond_e

    @property
    def sc134(self) -> bool:
        return self.sc1 and self.sc3 and self.sc4

    @property
    def sufficient(self) -> bool:
        return self.sc134 and self.sc2

    @property
    def implication_holds(self) -> bool:
        return not self.applicable or (self.sc134 == self.sufficient)

    def as_dict(self) -> Dict[str, bool]:
        return {
            "cond_a": self.cond_a, "cond_b": self.cond_b, "cond_c": self.cond_c,
            "cond_d": self.cond_d, "cond_e": self.cond_e,
            "sc134": self.sc134, "sc2": self.sc2, "sufficient": self.sufficient,
            "implication_holds": self.implication_holds,
        }


# ---------------------------------------------------------------------------
# Search helpers
# ---------------------------------------------------------------------------

def _subsets(pool: Sequence[str], max_size: Optional[int] = None) -> Iterator[Tuple[str, ...]]:
    """All subsets of ``pool`` (empty set first), by size then lexicographic."""
    pool = sorted(pool)
    top = len(pool) if max_size is None else min(max_size, len(pool))
    for size in range(top + 1):
        yield from itertools.combinations(pool, size)


def _relevant(model: CausalModel, phi: Formula) -> FrozenSet[str]:
    """Variables whose values can influence phi: its variables and their endogenous ancestors."""
    names = phi.variables()
    return frozenset(names) | model.ancestors(names)


def _prepare(model: CausalModel, u: Context, phi: Formula) -> Context:
    u = model.context(u)
    check_formula(model, phi, allow_causal=False)
    return u


def _witness_pool(model: CausalModel, names: Sequence[str], phi: Formula,
                  constraint: WitnessConstraint) -> List[str]:
    relevant = _relevant(model, phi)
    if constraint is WitnessConstraint.ACTUAL_VALUES:
        # only descendants of X can move away from their actual values
        pool = model.descendants(names) & relevant
    else:
        pool = relevant - set(names)
    return sorted(pool)


def _ac2_witness(model: CausalModel, u: Context, actual: Dict[str, Value], phi: Formula,
                 names: Sequence[str], constraint: WitnessConstraint,
                 scope: WitnessScope) -> Optional[ActualCauseWitness]:
    """First AC2 witness for the variables ``names`` in canonical order, or None."""
    names = sorted(names)
    ranges = [model.signature.range_of(n) for n in names]
    if scope is WitnessScope.EMPTY_SET:
        w_sets: Iterator[Tuple[str, ...]] = iter([()])
    else:
        w_sets = _subsets(_witness_pool(model, names, phi, constraint))
    for w_vars in w_sets:
        if constraint is WitnessConstraint.ACTUAL_VALUES or not w_vars:
            w_choices = [tuple(actual[w] for w in w_vars)]
        else:
            w_choices = list(itertools.product(*(model.signature.range_of(w) for w in w_vars)))
        for x_alt in itertools.product(*ranges):
            for w_vals in w_choices:
                settings = dict(zip(names, x_alt))
                settings.update(zip(w_vars, w_vals))
                if not phi.holds(model.solve(u, settings)):
                    return ActualCauseWitness(tuple(zip(names, x_alt)), tuple(zip(w_vars, w_vals)))
    return None


def _ac2_exists_minimal(model: CausalModel, u: Context, actual: Dict[str, Value], phi: Formula,
                        names: Tuple[str, ...], constraint: WitnessConstraint, scope: WitnessScope) -> bool:
    """AC2 test for a set none of whose strict subsets satisfies AC2.

    For such a set every alternative value differs from the actual one (otherwise
    the agreeing variable could move into W), which prunes x' to non-actual values.
    Under an empty witness set that argument does not apply and every x' is tried.
    """
    sig = model.signature
    if scope is WitnessScope.EMPTY_SET:
        alternatives = [
            x for x in itertools.product(*(sig.range_of(n) for n in names))
            if any(v != actual[n] for n, v in zip(names, x))
        ]
        return any(not phi.holds(model.solve(u, dict(zip(names, x)))) for x in alternatives)

    non_actual = [[v for v in sig.range_of(n) if v != actual[n]] for n in names]
    if not all(non_actual):
        return False
    pool = _witness_pool(model, names, phi, constraint)
    for w_vars in _subsets(pool):
        if constraint is WitnessConstraint.ACTUAL_VALUES or not w_vars:
            w_choices = [tuple(actual[w] for w in w_vars)]
        else:
            w_choices = list(itertools.product(*(sig.range_of(w) for w in w_vars)))
        for x_alt in itertools.product(*non_actual):
            for w_vals in w_choices:
                settings = dict(zip(names, x_alt))
                settings.update(zip(w_vars, w_vals))
                if not phi.holds(model.solve(u, settings)):
                    return True
    return False


def minimal_cause_sets(model: CausalModel, u: Context, phi: Formula,
                       constraint: WitnessConstraint = WitnessConstraint.ACTUAL_VALUES,
                       scope: WitnessScope = WitnessScope.ANY_SET) -> Tuple[FrozenSet[str], ...]:
    """Variable sets of all actual causes of phi in (model, u), canonical order.

    Inputs must already be validated. Empty when phi is false in u (AC1).
    Results are memoized on the model itself.
    """
    key = (u, phi, constraint, scope)
    if key not in model.cause_sets:
        model.cause_sets[key] = _search_cause_sets(model, u, phi, constraint, scope)
    return model.cause_sets[key]


def _search_cause_sets(model: CausalModel, u: Context, phi: Formula, constraint: WitnessConstraint,
                       scope: WitnessScope) -> Tuple[FrozenSet[str], ...]:
    actual = model.solve(u)
    if not phi.holds(actual):
        return ()
    pool = sorted(_relevant(model, phi))
    found: List[FrozenSet[str]] = []
    checked = 0
    for size in range(1, len(pool) + 1):
        for names in itertools.combinations(pool, size):
            candidate = frozenset(names)
            if any(m <= candidate for m in found):
                continue
            checked += 1
            if _ac2_exists_minimal(model, u, actual, phi, names, constraint, scope):
                found.append(candidate)
    logger.debug(f"Context {u.label()}: {len(found)} minimal cause sets of {phi} ({checked} sets checked)")
    return tuple(found)


def actual_causes_in(model: CausalModel, u: Context, phi: Formula,
                     constraint: WitnessConstraint = WitnessConstraint.ACTUAL_VALUES,
                     scope: WitnessScope = WitnessScope.ANY_SET) -> List[Conjunction]:
    """Every actual cause of phi in (model, u), including those mentioning phi's own variables."""
    u = _prepare(model, u, phi)
    actual = model.solve(u)
    return [Conjunction(tuple((n, actual[n]) for n in sorted(names)))
            for names in minimal_cause_sets(model, u, phi, constraint, scope)]


# ---------------------------------------------------------------------------
# Actual and but-for causes
# ---------------------------------------------------------------------------

def _minimality(model: CausalModel, u: Context, actual: Dict[str, Value], phi: Formula, cand: Conjunction,
                constraint: WitnessConstraint, scope: WitnessScope) -> Tuple[bool, List[MinimalityCheck]]:
    trace: List[MinimalityCheck] = []
    for subset in cand.strict_subsets():
        satisfied = _ac2_witness(model, u, actual, phi, subset.variables, constraint, scope) is not None
        trace.append(MinimalityCheck(subset, satisfied))
        if satisfied:
            return False, trace
    return True, trace


def _cause_verdict(model: CausalModel, u: Context, cand: Conjunction, phi: Formula,
                   ac2_scope: WitnessScope, constraint: WitnessConstraint,
                   ac3_scope: WitnessScope) -> ActualCauseVerdict:
    u = _prepare(model, u, phi)
    cand.check(model)
    actual = model.solve(u)
    ac1 = cand.holds(actual) and phi.holds(actual)
    witness = _ac2_witness(model, u, actual, phi, cand.variables, constraint, ac2_scope)
    ac3, trace = _minimality(model, u, actual, phi, cand, constraint, ac3_scope)
    clauses = {"AC1": ac1, "AC2": witness is not None, "AC3": ac3}
    failed = next((name for name, ok in clauses.items() if not ok), None)
    return ActualCauseVerdict(failed is None, clauses, witness, failed, trace)


def is_actual_cause(model: CausalModel, u: Context, cand: Conjunction, phi: Formula,
                    constraint: WitnessConstraint = WitnessConstraint.ACTUAL_VALUES,
                    scope: WitnessScope = WitnessScope.ANY_SET) -> ActualCauseVerdict:
    """Is ``cand`` an actual cause of ``phi`` in (model, u)?

    With the defaults this is the modified HP definition: the witness set W is
    frozen at its actual values. The other settings give the variants used by
    the MMTS definition of explanation.
    """
    return _cause_verdict(model, u, cand, phi, scope, constraint, scope)


def is_but_for_cause(model: CausalModel, u: Context, cand: Conjunction, phi: Formula) -> ActualCauseVerdict:
    """Actual cause whose AC2 witness has an empty W: changing X alone falsifies phi."""
    return _cause_verdict(model, u, cand, phi, WitnessScope.EMPTY_SET,
                          WitnessConstraint.ACTUAL_VALUES, WitnessScope.ANY_SET)


def find_actual_causes(model: CausalModel, u: Context, phi: Formula, include_outcome: bool = False,
                       constraint: WitnessConstraint = WitnessConstraint.ACTUAL_VALUES,
                       scope: WitnessScope = WitnessScope.ANY_SET
                       ) -> List[Tuple[Conjunction, ActualCauseWitness]]:
    """All actual causes of phi in (model, u) with their canonical witnesses.

    Causes mentioning phi's own variables are left out unless ``include_outcome``.
    """
    ensure_within_scale(model.signature.context_count(), "the context space")
    u = _prepare(model, u, phi)
    actual = model.solve(u)
    outcome = phi.variables()
    results = []
    for names in minimal_cause_sets(model, u, phi, constraint, scope):
        if not include_outcome and names & outcome:
            continue
        ordered = sorted(names)
        witness = _ac2_witness(model, u, actual, phi, ordered, constraint, scope)
        results.append((Conjunction(tuple((n, actual[n]) for n in ordered)), witness))
    logger.debug(f"Found {len(results)} actual causes of {phi} in {u.label()}")
    return results


# ---------------------------------------------------------------------------
# Sufficient causes
# ---------------------------------------------------------------------------

def sufficiency_failure(model: CausalModel, cand: Conjunction, phi: Formula,
                        contexts=None) -> Optional[Context]:
    """First context (of ``contexts``, default all) where [X <- x]phi fails, or None."""
    settings = cand.as_dict()
    for u in (contexts if contexts is not None else model.contexts()):
        if not phi.holds(model.solve(u, settings)):
            return u
    return None


def extension_witness(model: CausalModel, u: Context, cand: Conjunction, phi: Formula,
                      constraint: WitnessConstraint = WitnessConstraint.ACTUAL_VALUES,
                      scope: WitnessScope = WitnessScope.ANY_SET) -> Optional[SufficientCauseWitness]:
    """SC2: first conjunct of ``cand`` that extends to an actual cause of phi in u.

    An extension Y=y must hold in u (AC1 of the extended cause), so only actual
    values are searched.
    """
    actual = model.solve(u)
    if not cand.holds(actual):
        return None
    sets = minimal_cause_sets(model, u, phi, constraint, scope)
    for name, value in cand.events:
        for names in sets:
            if name in names:
                ordered = sorted(names)
                inner = _ac2_witness(model, u, actual, phi, ordered, constraint, scope)
                extension = tuple((n, actual[n]) for n in ordered if n != name)
                return SufficientCauseWitness((name, value), extension, inner)
    return None


def _sc_checks(model: CausalModel, u: Context, actual: Dict[str, Value], cand: Conjunction,
               phi: Formula) -> Tuple[bool, Optional[SufficientCauseWitness], Optional[Context]]:
    sc1 = cand.holds(actual) and phi.holds(actual)
    witness = extension_witness(model, u, cand, phi) if sc1 else None
    failing = sufficiency_failure(model, cand, phi)
    return sc1, witness, failing


def is_sufficient_cause(model: CausalModel, u: Context, cand: Conjunction, phi: Formula) -> SufficientCauseVerdict:
    """SC1 actuality, SC2 a conjunct extends to an actual cause, SC3 [X <- x]phi in every context, SC4 minimality."""
    ensure_within_scale(model.signature.context_count(), "the context space")
    u = _prepare(model, u, phi)
    cand.check(model)
    actual = model.solve(u)
    sc1, witness, failing = _sc_checks(model, u, actual, cand, phi)

    sc4 = True
    trace: List[MinimalityCheck] = []
    for subset in cand.strict_subsets():
        sub1, sub_witness, sub_failing = _sc_checks(model, u, actual, subset, phi)
        satisfied = sub1 and sub_witness is not None and sub_failing is None
        trace.append(MinimalityCheck(subset, satisfied))
        if satisfied:
            sc4 = False
            break

    clauses = {"SC1": sc1, "SC2": witness is not None, "SC3": failing is None, "SC4": sc4}
    failed = next((name for name, ok in clauses.items() if not ok), None)
    return SufficientCauseVerdict(failed is None, clauses, witness, failed, failing, trace)


# ---------------------------------------------------------------------------
# Structural side conditions
# ---------------------------------------------------------------------------

def _check_endogenous(model: CausalModel, names) -> List[str]:
    names = sorted(set(names))
    if not names:
        raise UnknownVariable("expected a non-empty set of endogenous variables")
    for name in names:
        if not model.signature.is_endogenous(name):
            raise UnknownVariable(f"{name!r} is not an endogenous variable", {"variable": name})
    return names


def is_causally_independent(model: CausalModel, names) -> IndependenceVerdict:
    """No intervention on a strict subset of ``names`` changes another variable of the set, in any context."""
    names = _check_endogenous(model, names)
    ensure_within_scale(model.signature.context_count(), "the context space")
    # Z can only react to an intervention that touches one of its ancestors.
    influencers = {z: model.ancestors([z]) & set(names) for z in names}
    if not any(influencers.values()):
        return IndependenceVerdict(True)

    sig = model.signature
    for u in model.contexts():
        actual = model.solve(u)
        for z in names:
            if not influencers[z]:
                continue
            others = [n for n in names if n != z]
            for ys in _subsets(others):
                if not set(ys) & influencers[z]:
                    continue
                for y in itertools.product(*(sig.range_of(n) for n in ys)):
                    if model.solve(u, dict(zip(ys, y)))[z] != actual[z]:
                        return IndependenceVerdict(False, IndependenceCounterexample(u, tuple(zip(ys, y)), z))
    return IndependenceVerdict(True)


def is_determined_by_context(model: CausalModel, names, contexts=None) -> DeterminationVerdict:
    """Every joint setting of ``names`` is the actual one in some context."""
    names = _check_endogenous(model, names)
    ensure_within_scale(model.signature.context_count(), "the context space")
    reached = set()
    for u in (contexts if contexts is not None else model.contexts()):
        solution = model.solve(u)
        reached.add(tuple(solution[n] for n in names))
    for setting in itertools.product(*(model.signature.range_of(n) for n in names)):
        if setting not in reached:
            return DeterminationVerdict(False, tuple(zip(names, setting)))
    return DeterminationVerdict(True)


def verify_theorem1(model: CausalModel, superset, cand: Conjunction, phi: Formula, u: Context) -> Theorem1Report:
    """Check the side conditions under which SC1, SC3 and SC4 already imply SC2.

    (a) the superset is causally independent, (b) it is determined by the context,
    (c) it contains every parent of phi's variables, (d) some setting of it
    falsifies phi in u, (e) it contains the candidate's variables.
    """
    superset = _check_endogenous(model, superset)
    u = _prepare(model, u, phi)
    cand.check(model)

    cond_a = is_causally_independent(model, superset).holds
    cond_b = is_determined_by_context(model, superset).holds
    parents = set()
    for name in phi.variables():
        parents |= set(model.parents(name))
    cond_c = parents <= set(superset)
    cond_d = any(
        not phi.holds(model.solve(u, dict(zip(superset, x))))
        for x in itertools.product(*(model.signature.range_of(n) for n in superset))
    )
    cond_e = set(cand.variables) <= set(superset)

    verdict = is_sufficient_cause(model, u, cand, phi)
    report = Theorem1Report(cond_a, cond_b, cond_c, cond_d, cond_e,
                            verdict.clauses["SC1"], verdict.clauses["SC2"],
                            verdict.clauses["SC3"], verdict.clauses["SC4"])
    if not report.implication_holds:
        logger.warning(f"⚠️ SC1/SC3/SC4 without SC2 although all side conditions hold: {cand} for {phi}")
    return report
