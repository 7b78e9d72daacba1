"""
app/engine/errors.py - Exception hierarchy shared by the engine, the DSL, the CLI and the API.

Every error carries a stable ``code`` (used in JSON error payloads) and an optional
``details`` dict with structured data (offending assignment, cycle, candidate, ...).
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional


class CausalEngineError(Exception):
    code = "engine_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


# --- model construction ---

class InvalidSignature(CausalEngineError):
    code = "invalid_signature"


class MissingEquation(CausalEngineError):
    code = "missing_equation"


class DuplicateEquation(CausalEngineError):
    code = "duplicate_equation"


class CyclicModel(CausalEngineError):
    code = "cyclic_model"

    def __init__(self, cycle, message: Optional[str] = None):
        cycle = list(cycle)
        super().__init__(message or f"causal graph has a cycle: {' -> '.join(cycle)}", {"cycle": cycle})
        self.cycle = cycle


class OutOfRangeEquationOutput(CausalEngineError):
    code = "out_of_range_equation_output"


class EquationEvaluationError(CausalEngineError):
    code = "equation_evaluation_error"


# --- queries ---

class UnknownVariable(CausalEngineError):
    code = "unknown_variable"


class ValueOutOfRange(CausalEngineError):
    code = "value_out_of_range"


class FormulaContainsIntervention(CausalEngineError):
    code = "formula_contains_intervention"


class NestedIntervention(CausalEngineError):
    code = "nested_intervention"


class EmptyCandidate(CausalEngineError):
    code = "empty_candidate"


class InvalidCandidate(CausalEngineError):
    code = "invalid_candidate"


class ScaleExceeded(CausalEngineError):
    code = "scale_exceeded"


class ZeroProbabilityCondition(CausalEngineError):
    code = "zero_probability_condition"


class NotDepthTwoModel(CausalEngineError):
    code = "not_depth_two_model"


class WeightSumNotOne(CausalEngineError):
    code = "weight_sum_not_one"


class EmptyRestriction(CausalEngineError):
    code = "empty_restriction"


class InvalidRational(CausalEngineError):
    code = "invalid_rational"


class InvalidContext(CausalEngineError):
    code = "invalid_context"


class MissingDistribution(CausalEngineError):
    code = "missing_distribution"


class ModelNotFound(CausalEngineError):
    code = "model_not_found"


# --- DSL ---

@dataclass(frozen=True)
class SourceSpan:
    """1-based line/column of a token plus its [start, end) character offsets."""
    line: int
    column: int
    start: int
    end: int

    def excerpt(self, text: str) -> str:
        lines = text.splitlines() or [""]
        source_line = lines[min(self.line, len(lines)) - 1]
        width = max(1, min(self.end - self.start, len(source_line) - self.column + 1))
        return f"{source_line}\n{' ' * (self.column - 1)}{'^' * width}"


class DslError(CausalEngineError):
    code = "dsl_error"

    def __init__(self, message: str, span: Optional[SourceSpan] = None, details: Optional[Dict[str, Any]] = None):
        details = dict(details or {})
        if span is not None:
            details.update({"line": span.line, "column": span.column})
        super().__init__(message, details)
        self.span = span

    def location(self) -> str:
        return f"{self.span.line}:{self.span.column}" if self.span else "?:?"


class DslSyntaxError(DslError):
    code = "dsl_syntax_error"


class UnknownIdentifier(DslError):
    code = "unknown_identifier"


class RangeViolation(DslError):
    code = "range_violation"


class ProbSumError(DslError):
    code = "prob_sum_error"


class ModelSemanticError(DslError):
    """A model-construction error (cycle, missing equation, ...) located in the source."""
    code = "model_semantic_error"

    def __init__(self, cause: CausalEngineError, span: Optional[SourceSpan] = None):
        super().__init__(cause.message, span, {"cause": cause.code, **cause.details})
        self.cause = cause
