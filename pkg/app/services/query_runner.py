# app/services/query_runner.py
"""
Shared query orchestration for the CLI and the HTTP API.

Each runner resolves names against a ModelBundle, runs one engine operation,
times it and returns QueryResult objects whose JSON form is validated against
QUERY_RESULT_SCHEMA before it leaves the process.
"""
import dataclasses
import logging
import time
from typing import Any, Dict, Iterable, List, Optional

from jsonschema import validate
from pydantic import BaseModel

from app.dsl.parser import (
    ModelBundle,
    parse_conjunction,
    parse_context,
    parse_context_set,
    parse_formula,
    parse_value,
)
from app.engine.causation import (
    ActualCauseWitness,
    MinimalityCheck,
    WitnessConstraint,
    WitnessScope,
    find_actual_causes,
    is_actual_cause,
    is_but_for_cause,
    is_sufficient_cause,
)
from app.engine.errors import CausalEngineError, InvalidContext
from app.engine.explanation import (
    PRESETS,
    ContextScope,
    DefinitionVariant,
    ExplanationVerdict,
    GoodnessPair,
    NecessityMode,
    find_explanations,
    is_explanation,
    is_partial_explanation,
    search_partial_explanations,
)
from app.engine.formula import check_formula
from app.engine.model import Context
from app.services import verification
from app.services.classifier_bridge import RegionMask, explain_absence
from app.utils.rationals import format_rational, parse_probability

logger = logging.getLogger(__name__)

CHECK_MODES = ("actual", "butfor", "sufficient")

# ---------------------------------------------------------------------
# JSON Schema for every query result
# ---------------------------------------------------------------------
RATIONAL_PATTERN = r"^-?\d+/\d+$"

QUERY_RESULT_SCHEMA = {
    "type": "object",
    "required": ["query", "verdict", "clauses", "witnesses", "achieved_goodness", "timing_ms"],
    "additionalProperties": False,
    "properties": {
        "query": {"type": "string"},
        "verdict": {"type": "boolean"},
        "clauses": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "witnesses": {"type": ["object", "array", "null"]},
        "achieved_goodness": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["alpha", "beta"],
                    "additionalProperties": False,
                    "properties": {
                        "alpha": {"type": "string", "pattern": RATIONAL_PATTERN},
                        "beta": {"type": "string", "pattern": RATIONAL_PATTERN},
                    },
                },
            ]
        },
        "timing_ms": {"type": "number", "minimum": 0},
    },
}


class QueryResult(BaseModel):
    query: str
    verdict: bool
    clauses: Dict[str, bool]
    witnesses: Any = None
    achieved_goodness: Optional[Dict[str, str]] = None
    timing_ms: float

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump()


def _result(query: str, verdict: bool, clauses: Dict[str, bool], witnesses: Any,
            achieved: Optional[GoodnessPair], started: float) -> QueryResult:
    payload = {
        "query": query,
        "verdict": bool(verdict),
        "clauses": {k: bool(v) for k, v in clauses.items()},
        "witnesses": witnesses,
        "achieved_goodness": achieved.as_dict() if achieved is not None else None,
        "timing_ms": round((time.perf_counter() - started) * 1000, 3),
    }
    validate(instance=payload, schema=QUERY_RESULT_SCHEMA)
    return QueryResult(**payload)


# ---------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------

def context_json(bundle: ModelBundle, u: Optional[Context]) -> Optional[Dict[str, Any]]:
    if u is None:
        return None
    return {"name": bundle.context_name(u), "values": u.as_dict()}


def _ac2_json(witness: Optional[ActualCauseWitness]) -> Optional[Dict[str, Any]]:
    return witness.as_dict() if witness is not None else None


def _trace_json(trace: Iterable[MinimalityCheck]) -> List[Dict[str, Any]]:
    return [{"subset": str(check.subset), "satisfied": check.satisfied} for check in trace]


def _rejection(verdict: ExplanationVerdict, goodness: Optional[GoodnessPair] = None) -> Optional[str]:
    if verdict.holds:
        return None
    reasons = []
    if goodness is not None and verdict.achieved is not None:
        achieved = verdict.achieved.as_dict()
        if not verdict.ex1_necessity:
            reasons.append(f"alpha {achieved['alpha']} < {format_rational(goodness.alpha)}")
        if not verdict.ex1_sufficiency:
            reasons.append(f"beta {achieved['beta']} < {format_rational(goodness.beta)}")
    else:
        if not verdict.ex1_necessity:
            reasons.append("necessity fails")
        if not verdict.ex1_sufficiency:
            reasons.append("not sufficient")
    if not verdict.ex2_minimal:
        reasons.append(f"{verdict.blocking_subset} already qualifies")
    if verdict.ex3_witness is None:
        reasons.append("never happens in K")
    return "; ".join(reasons)


def _explanation_json(bundle: ModelBundle, verdict: ExplanationVerdict,
                      goodness: Optional[GoodnessPair] = None) -> Dict[str, Any]:
    return {
        "rejection": _rejection(verdict, goodness),
        "necessity": [
            {"context": context_json(bundle, w.context), "conjunct": f"{w.conjunct[0]}={w.conjunct[1]}",
             "cause": str(w.cause)}
            for w in verdict.ex1_necessity_contexts
        ],
        "ex3_context": context_json(bundle, verdict.ex3_witness),
        "necessity_failure": context_json(bundle, verdict.necessity_failure),
        "sufficiency_failure": context_json(bundle, verdict.sufficiency_failure),
        "blocking_subset": str(verdict.blocking_subset) if verdict.blocking_subset is not None else None,
    }


# ---------------------------------------------------------------------
# Definition variants
# ---------------------------------------------------------------------

def resolve_variant(definition: str = "halpern", necessity: Optional[str] = None,
                    witness_values: Optional[str] = None, context_scope: Optional[str] = None,
                    witness_scope: Optional[str] = None) -> DefinitionVariant:
    """A preset, optionally with individual axes overridden."""
    if definition not in PRESETS:
        raise InvalidContext(f"unknown definition {definition!r}", {"choices": sorted(PRESETS)})
    variant = PRESETS[definition]
    overrides = {}
    try:
        if necessity:
            overrides["necessity_mode"] = NecessityMode(necessity)
        if witness_values:
            overrides["witness_w_constraint"] = WitnessConstraint(witness_values)
        if context_scope:
            overrides["context_scope"] = ContextScope(context_scope)
        if witness_scope:
            overrides["witness_scope"] = WitnessScope(witness_scope)
    except ValueError as e:
        raise InvalidContext(str(e))
    return dataclasses.replace(variant, **overrides) if overrides else variant


def goodness_from(alpha: Optional[str], beta: Optional[str]) -> GoodnessPair:
    return GoodnessPair(parse_probability(alpha if alpha is not None else "0"),
                        parse_probability(beta if beta is not None else "0"))


# ---------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------

def run_check_cause(bundle: ModelBundle, context: str, cause: str, phi: str, mode: str = "actual",
                    witness_values: Optional[str] = None, witness_scope: Optional[str] = None) -> QueryResult:
    """Actual, but-for or sufficient cause check for one candidate in one context."""
    if mode not in CHECK_MODES:
        raise InvalidContext(f"unknown mode {mode!r}", {"choices": list(CHECK_MODES)})
    started = time.perf_counter()
    model = bundle.model
    u = parse_context(context, bundle)
    cand = parse_conjunction(cause, model)
    formula = check_formula(model, parse_formula(phi, model), allow_causal=False)
    query = f"{mode} cause: {cand} for {formula} in {bundle.context_name(u) or u.label()}"
    logger.info(f"Running {query}")

    if mode == "sufficient":
        verdict = is_sufficient_cause(model, u, cand, formula)
        witness = verdict.witness
        witnesses = {
            "sc2": None if witness is None else {
                "conjunct": f"{witness.chosen_conjunct[0]}={witness.chosen_conjunct[1]}",
                "cause": str(witness.cause),
                "ac2": _ac2_json(witness.inner),
            },
            "sc3_counterexample": context_json(bundle, verdict.failing_context),
            "minimality": _trace_json(verdict.minimality_trace),
            "failed_clause": verdict.failed_clause,
        }
    else:
        if mode == "butfor":
            verdict = is_but_for_cause(model, u, cand, formula)
        else:
            constraint = WitnessConstraint(witness_values) if witness_values else WitnessConstraint.ACTUAL_VALUES
            scope = WitnessScope(witness_scope) if witness_scope else WitnessScope.ANY_SET
            verdict = is_actual_cause(model, u, cand, formula, constraint, scope)
        witnesses = {
            "ac2": _ac2_json(verdict.witness),
            "minimality": _trace_json(verdict.minimality_trace),
            "failed_clause": verdict.failed_clause,
        }
    result = _result(query, verdict.holds, verdict.clauses, witnesses, None, started)
    logger.info(f"{'✅' if result.verdict else '❌'} {query}: {result.verdict}")
    return result


def run_find_causes(bundle: ModelBundle, context: str, phi: str, include_outcome: bool = False) -> QueryResult:
    """All actual causes of phi in one context."""
    started = time.perf_counter()
    model = bundle.model
    u = parse_context(context, bundle)
    formula = check_formula(model, parse_formula(phi, model), allow_causal=False)
    causes = find_actual_causes(model, u, formula, include_outcome=include_outcome)
    witnesses = [{"cause": str(c), "ac2": _ac2_json(w)} for c, w in causes]
    query = f"actual causes of {formula} in {bundle.context_name(u) or u.label()}"
    return _result(query, bool(causes), {"found": bool(causes)}, witnesses, None, started)


def run_explain(bundle: ModelBundle, phi: str, k: Optional[str] = None, variant: Optional[DefinitionVariant] = None,
                alpha: Optional[str] = None, beta: Optional[str] = None, max_size: Optional[int] = None,
                candidate: Optional[str] = None, include_outcome: bool = False) -> List[QueryResult]:
    """Explanations of phi relative to K (partial ones when alpha or beta is given).

    With ``candidate`` a single verdict is returned, otherwise one result per explanation found.
    """
    started = time.perf_counter()
    model = bundle.model
    variant = variant or PRESETS["halpern"]
    formula = check_formula(model, parse_formula(phi, model), allow_causal=False)
    k_set = parse_context_set(k, bundle)
    partial = alpha is not None or beta is not None

    if partial:
        pm = bundle.probabilistic()
        goodness = goodness_from(alpha, beta)
        label = f"({goodness.as_dict()['alpha']}, {goodness.as_dict()['beta']})"
        if candidate is not None:
            cand = parse_conjunction(candidate, model)
            verdict = is_partial_explanation(model, pm.distribution, k_set, cand, formula, goodness, variant)
            return [_result(f"partial explanation {label}: {cand} for {formula}", verdict.holds, verdict.clauses,
                            _explanation_json(bundle, verdict, goodness), verdict.achieved, started)]
        search = search_partial_explanations(model, pm.distribution, k_set, formula, goodness, variant,
                                             max_size=max_size, include_outcome=include_outcome)
        if search.skipped:
            logger.warning(f"⚠️ {search.skipped} candidates skipped: Pr(X=x & {formula}) = 0")
        results = [_result(f"partial explanation {label}: {cand} for {formula}", verdict.holds, verdict.clauses,
                           _explanation_json(bundle, verdict, goodness), verdict.achieved, started)
                   for cand, verdict in search.found + search.rejected]
        logger.info(f"✅ {len(search.found)} partial explanations of {formula}, {len(search.rejected)} near misses")
        return results
    else:
        if candidate is not None:
            cand = parse_conjunction(candidate, model)
            verdict = is_explanation(model, k_set, cand, formula, variant)
            return [_result(f"explanation: {cand} for {formula}", verdict.holds, verdict.clauses,
                            _explanation_json(bundle, verdict), None, started)]
        found = find_explanations(model, k_set, formula, variant, max_size=max_size,
                                  include_outcome=include_outcome)
        results = [_result(f"explanation: {cand} for {formula}", True, verdict.clauses,
                           _explanation_json(bundle, verdict), None, started)
                   for cand, verdict in found]
    logger.info(f"✅ {len(results)} explanations of {formula}")
    return results


def run_absence(bundle: ModelBundle, label: str, alpha: str, beta: str, k: Optional[str] = None,
                max_size: Optional[int] = None, pixels: Optional[List[str]] = None,
                mask: Optional[List[str]] = None, fill_value: str = "0") -> List[QueryResult]:
    """Partial explanations of a negative label of a lifted classifier, Pr conditioned on K."""
    started = time.perf_counter()
    pm = bundle.probabilistic()
    k_set = parse_context_set(k, bundle)
    goodness = goodness_from(alpha, beta)
    negative = parse_value(label)
    region = RegionMask(frozenset(mask), parse_value(fill_value)) if mask else None
    found = explain_absence(pm, k_set, negative, goodness, max_size=max_size,
                            candidate_pixels=pixels, mask=region)
    return [
        _result(f"absence explanation: {cand} for label {negative}", True, {"EX1'": True, "EX2'": True, "EX3'": True},
                {"explanation": str(cand)}, achieved, started)
        for cand, achieved in found
    ]


def results_json(results: Iterable[QueryResult]) -> List[Dict[str, Any]]:
    return [r.to_json_dict() for r in results]


def error_json(error: CausalEngineError) -> Dict[str, Any]:
    payload = error.to_dict()
    payload["details"] = {k: (v if isinstance(v, (str, int, float, bool, list, dict, type(None))) else str(v))
                          for k, v in payload["details"].items()}
    return payload


def run_verify(theorem: int, bundle: Optional[ModelBundle] = None, trials: int = 1000, seed: int = 0,
               max_size: Optional[int] = None) -> QueryResult:
    """Check one of the sufficient-condition results on a model, or on ``trials`` seeded random models."""
    if theorem not in (1, 2):
        raise InvalidContext(f"unknown theorem {theorem!r}", {"choices": [1, 2]})
    started = time.perf_counter()
    if bundle is not None:
        subject = f"model {bundle.name}"
        if theorem == 1:
            summary = verification.theorem1_on_model(bundle.model, list(bundle.contexts.values()) or None)
        else:
            summary = verification.theorem2_on_model(bundle.model, bundle.probabilistic().distribution, max_size)
    else:
        subject = f"{trials} random models (seed {seed})"
        if theorem == 1:
            summary = verification.theorem1_random(trials, seed)
        else:
            summary = verification.theorem2_random(trials, seed)
    if not summary.passed:
        logger.error(f"❌ {len(summary.counterexamples)} counterexamples to theorem {theorem} on {subject}")
    return _result(f"verify theorem {theorem} on {subject}", summary.passed,
                   {"implication_holds": summary.passed}, summary.as_dict(), None, started)
