"""
app/dsl/serializer.py - Canonical ``.cm`` text for a ModelBundle.

Declarations are sorted (exogenous, endogenous, equations by target, contexts by
name), tables stay tables, probabilities are written as reduced ``p/q`` and the
output always uses LF line endings.
"""
import logging
from typing import Dict, List

from app.dsl.parser import ModelBundle
from app.engine.expressions import Binary, Call, Const, Expr, Ite, Ref, Unary, Value
from app.engine.model import Context, ExpressionEquation, TableEquation
from app.utils.rationals import format_rational

logger = logging.getLogger(__name__)

_PRECEDENCE = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3, "+": 4, "-": 4}
_UNARY = 5
_COMPARISON = 3


def format_value(value: Value) -> str:
    return str(value)


def format_expr(expr: Expr, context: int = 0) -> str:
    """Surface syntax with the fewest parentheses that re-parse to the same tree."""
    if isinstance(expr, Const):
        return format_value(expr.value)
    if isinstance(expr, Ref):
        return expr.name
    if isinstance(expr, Unary):
        text = f"{expr.op}{format_expr(expr.operand, _UNARY)}"
        return f"({text})" if context > _UNARY else text
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        left_prec = prec + 1 if prec == _COMPARISON else prec
        text = f"{format_expr(expr.left, left_prec)} {expr.op} {format_expr(expr.right, prec + 1)}"
        return f"({text})" if prec < context else text
    if isinstance(expr, Ite):
        return f"ite({format_expr(expr.condition)}, {format_expr(expr.then)}, {format_expr(expr.otherwise)})"
    if isinstance(expr, Call):
        return f"{expr.function}({', '.join(format_expr(a) for a in expr.args)})"
    raise TypeError(f"not an expression: {expr!r}")


def _generated_name(u: Context, taken) -> str:
    base = "c_" + "_".join(format_value(v).replace("-", "m") for _, v in u.values)
    name, n = base, 2
    while name in taken:
        name, n = f"{base}_{n}", n + 1
    return name


def _context_names(bundle: ModelBundle) -> Dict[Context, str]:
    names: Dict[Context, str] = {}
    for name, u in sorted(bundle.contexts.items()):
        names.setdefault(u, name)
    needed: List[Context] = []
    if bundle.distribution is not None and not _is_uniform(bundle):
        needed.extend(u for u, _ in bundle.distribution.weights)
    if bundle.k is not None and bundle.k_filter is None and not bundle.k.is_all:
        needed.extend(bundle.k.contexts)
    taken = set(bundle.contexts)
    for u in needed:
        if u not in names:
            names[u] = _generated_name(u, taken)
            taken.add(names[u])
    return names


def _is_uniform(bundle: ModelBundle) -> bool:
    weights = bundle.distribution.as_dict()
    if len(set(weights.values())) != 1:
        return False
    return set(weights) == set(bundle.k_set().members(bundle.model))


def serialize_model(bundle: ModelBundle) -> str:
    model = bundle.model
    sig = model.signature
    lines = [f"model {bundle.name} {{"]
    for kind, variables in (("exo", sig.exogenous), ("endo", sig.endogenous)):
        for var in variables:
            lines.append(f"  {kind} {var.name} : {{{', '.join(format_value(v) for v in var.values)}}};")

    for eq in sorted(model.equations, key=lambda e: e.target):
        if isinstance(eq, ExpressionEquation):
            lines.append(f"  eq {eq.target} := {format_expr(eq.expr)};")
            continue
        assert isinstance(eq, TableEquation)
        lines.append(f"  table {eq.target} ({', '.join(eq.parents)}) {{")
        for key, out in eq.lookup().items():
            prefix = f"{', '.join(format_value(v) for v in key)} " if key else ""
            lines.append(f"    {prefix}-> {format_value(out)};")
        if eq.default is not None:
            lines.append(f"    default -> {format_value(eq.default)};")
        lines.append("  }")

    names = _context_names(bundle)
    for u, name in sorted(names.items(), key=lambda item: item[1]):
        assignments = ", ".join(f"{k}={format_value(v)}" for k, v in u.values)
        lines.append(f"  context {name} {{ {assignments} }}")

    if bundle.k is not None:
        label = f" {bundle.k_name}" if bundle.k_name else ""
        if bundle.k_filter is not None:
            lines.append(f"  K{label} = where {format_expr(bundle.k_filter)};")
        elif bundle.k.is_all:
            lines.append(f"  K{label} = all;")
        else:
            lines.append(f"  K{label} = {{{', '.join(sorted(names[u] for u in bundle.k.contexts))}}};")

    if bundle.distribution is not None:
        if _is_uniform(bundle):
            lines.append("  prob uniform;")
        else:
            entries = sorted((names[u], w) for u, w in bundle.distribution.weights)
            lines.append("  prob {")
            lines.extend(f"    {name}: {format_rational(w)}{',' if i < len(entries) - 1 else ''}"
                         for i, (name, w) in enumerate(entries))
            lines.append("  }")
    lines.append("}")
    logger.debug(f"Serialized model {bundle.name} ({len(lines)} lines)")
    return "\n".join(lines) + "\n"
