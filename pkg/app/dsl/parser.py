"""
app/dsl/parser.py - Recursive-descent parser for ``.cm`` model files and the formula syntax.

A model file looks like::

    model arsonists {
      exo R : {1, 2};
      endo FB : {0, 1};
      eq FB := ite(R == 2, ML1 + ML2 + ML3 >= 2, ML1 + ML2 + ML3 >= 1);
      table ML1 (D1) { 0 -> 0; 1 -> 1; }
      context u1 { R=1, D1=1, D2=1, D3=0 }
      prob { u1: 1/2, u2: 0.5 }
      K = {u1, u2};
    }

``K`` may also be named and given by a filter over exogenous variables,
e.g. ``K suspicious = where U3 == 0 && U7 == 0;``.

Identifiers inside expressions resolve to variables first and to symbolic range
values second; anything else is an UnknownIdentifier with the span of the token.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple, Union

from app.dsl.lexer import Token, tokenize
from app.engine.errors import (
    CausalEngineError,
    CyclicModel,
    DslSyntaxError,
    DuplicateEquation,
    EmptyRestriction,
    InvalidRational,
    InvalidSignature,
    MissingDistribution,
    ModelSemanticError,
    ProbSumError,
    RangeViolation,
    SourceSpan,
    UnknownIdentifier,
)
from app.engine.explanation import ALL, ContextDistribution, ContextSet, ProbabilisticModel
from app.engine.expressions import Binary, Call, Const, Expr, ExpressionTypeError, Ite, Ref, Unary, Value
from app.engine.formula import And, Causal, Conjunction, Formula, Not, Or, PrimitiveEvent, check_formula
from app.engine.model import (
    CausalModel,
    Context,
    ExpressionEquation,
    Intervention,
    Signature,
    StructuralEquation,
    TableEquation,
    Variable,
    build_model,
    ensure_within_scale,
)
from app.utils.rationals import format_rational, parse_rational

logger = logging.getLogger(__name__)

_COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Everything a model file declares: the model, named contexts, Pr and K."""
    name: str
    model: CausalModel
    contexts: Dict[str, Context] = field(default_factory=dict)
    distribution: Optional[ContextDistribution] = None
    k: Optional[ContextSet] = None
    k_name: Optional[str] = None
    k_filter: Optional[Expr] = None

    def context(self, name: str) -> Context:
        """Named context; ``both-throw`` also finds ``both_throw``."""
        try:
            return self.contexts.get(name) or self.contexts[name.replace("-", "_")]
        except KeyError:
            raise UnknownIdentifier(f"unknown context {name!r}",
                                    details={"context": name, "known": sorted(self.contexts)})

    def context_name(self, u: Context) -> Optional[str]:
        for name, ctx in self.contexts.items():
            if ctx == u:
                return name
        return None

    def k_set(self) -> ContextSet:
        return self.k if self.k is not None else ALL

    def probabilistic(self) -> ProbabilisticModel:
        if self.distribution is None:
            raise MissingDistribution(f"model {self.name} declares no prob block",
                                      {"model": self.name})
        return ProbabilisticModel(self.model, self.distribution, self.k_set())


def _joined(first: SourceSpan, last: SourceSpan) -> SourceSpan:
    return SourceSpan(first.line, first.column, first.start, last.end)


def _negate(expr: Expr) -> Expr:
    if isinstance(expr, Const) and isinstance(expr.value, int):
        return Const(-expr.value)
    return Unary("-", expr)


class _Parser:
    """Token cursor with the usual peek/accept/expect helpers."""

    def __init__(self, text: str):
        self.text = text
        self.tokens: List[Token] = tokenize(text)
        self.pos = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def accept_op(self, text: str) -> Optional[Token]:
        if self.peek().is_op(text):
            return self.advance()
        return None

    def expect_op(self, text: str) -> Token:
        tok = self.peek()
        if not tok.is_op(text):
            raise DslSyntaxError(f"expected '{text}', found {tok.describe()}", tok.span)
        return self.advance()

    def expect_keyword(self, text: str) -> Token:
        tok = self.peek()
        if not tok.is_keyword(text):
            raise DslSyntaxError(f"expected '{text}', found {tok.describe()}", tok.span)
        return self.advance()

    def expect_ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise DslSyntaxError(f"expected {what}, found {tok.describe()}", tok.span)
        return self.advance()

    def expect_end(self) -> None:
        tok = self.peek()
        if tok.kind != "EOF":
            raise DslSyntaxError(f"unexpected {tok.describe()} after the end of input", tok.span)

    def value(self) -> Tuple[Value, SourceSpan]:
        """A range value: integer (optionally negative) or symbol."""
        tok = self.advance()
        if tok.kind == "INT":
            return int(tok.text), tok.span
        if tok.is_op("-") and self.peek().kind == "INT":
            num = self.advance()
            return -int(num.text), _joined(tok.span, num.span)
        if tok.kind == "IDENT":
            return tok.text, tok.span
        raise DslSyntaxError(f"expected a value, found {tok.describe()}", tok.span)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

@dataclass
class _TableRow:
    key: Tuple[Value, ...]
    output: Value
    key_spans: Tuple[SourceSpan, ...]
    output_span: SourceSpan
    is_default: bool = False


@dataclass
class _KDecl:
    span: SourceSpan
    name: Optional[str] = None
    names: Optional[List[Token]] = None
    where: Optional[Expr] = None
    where_span: Optional[SourceSpan] = None


class _ModelParser(_Parser):

    def __init__(self, text: str):
        super().__init__(text)
        self.variables: Set[str] = set()
        self.symbols: Set[str] = set()
        self._prescan()
        self.declared: List[Tuple[str, Variable]] = []
        self.decl_spans: Dict[str, SourceSpan] = {}
        self.equations: List[StructuralEquation] = []
        self.eq_spans: Dict[str, SourceSpan] = {}
        self.table_rows: Dict[str, List[_TableRow]] = {}
        self.raw_contexts: List[Tuple[Token, List[Tuple[Token, Value, SourceSpan]]]] = []
        self.prob: Optional[Tuple[SourceSpan, Optional[List[Tuple[Token, Fraction]]]]] = None
        self.k_decl: Optional[_KDecl] = None

    def _prescan(self) -> None:
        # Equations may mention variables declared further down the file.
        toks = self.tokens
        for i, tok in enumerate(toks):
            if tok.kind != "KEYWORD" or tok.text not in ("exo", "endo") or toks[i + 1].kind != "IDENT":
                continue
            self.variables.add(toks[i + 1].text)
            j = i + 2
            if toks[j].is_op(":") and toks[j + 1].is_op("{"):
                j += 2
                while not toks[j].is_op("}") and toks[j].kind != "EOF":
                    if toks[j].kind == "IDENT":
                        self.symbols.add(toks[j].text)
                    j += 1

    def parse(self) -> ModelBundle:
        self.expect_keyword("model")
        name = self.expect_ident("a model name")
        self.expect_op("{")
        while not self.peek().is_op("}"):
            tok = self.peek()
            if tok.is_keyword("exo") or tok.is_keyword("endo"):
                self._variable()
            elif tok.is_keyword("eq"):
                self._equation()
            elif tok.is_keyword("table"):
                self._table()
            elif tok.is_keyword("context"):
                self._context()
            elif tok.is_keyword("prob"):
                self._prob()
            elif tok.is_keyword("K"):
                self._k()
            else:
                raise DslSyntaxError(f"expected a declaration, found {tok.describe()}", tok.span)
        self.expect_op("}")
        self.expect_end()
        return self._build(name)

    # -- declarations -------------------------------------------------------

    def _variable(self) -> None:
        kind = self.advance()
        name = self.expect_ident("a variable name")
        self.expect_op(":")
        self.expect_op("{")
        values = [self.value()[0]]
        while self.accept_op(","):
            values.append(self.value()[0])
        self.expect_op("}")
        self.expect_op(";")
        if name.text in self.decl_spans:
            raise ModelSemanticError(InvalidSignature(f"variable {name.text} is declared twice",
                                                      {"variable": name.text}), name.span)
        try:
            variable = Variable(name.text, tuple(values))
        except CausalEngineError as e:
            raise ModelSemanticError(e, name.span)
        self.declared.append((kind.text, variable))
        self.decl_spans[name.text] = name.span

    def _add_equation(self, equation: StructuralEquation, span: SourceSpan) -> None:
        if equation.target in self.eq_spans:
            raise ModelSemanticError(DuplicateEquation(f"{equation.target} has more than one equation",
                                                       {"variable": equation.target}), span)
        self.equations.append(equation)
        self.eq_spans[equation.target] = span

    def _equation(self) -> None:
        self.advance()
        target = self.expect_ident("a variable name")
        self.expect_op(":=")
        expr = self._expr()
        self.expect_op(";")
        self._add_equation(ExpressionEquation(target.text, expr), target.span)

    def _table(self) -> None:
        self.advance()
        target = self.expect_ident("a variable name")
        self.expect_op("(")
        parents: List[str] = []
        if not self.peek().is_op(")"):
            while True:
                parent = self.expect_ident("a parent variable")
                if parent.text not in self.variables:
                    raise UnknownIdentifier(f"unknown variable {parent.text!r}", parent.span)
                parents.append(parent.text)
                if not self.accept_op(","):
                    break
        self.expect_op(")")
        self.expect_op("{")
        rows: List[_TableRow] = []
        default: Optional[Value] = None
        while not self.accept_op("}"):
            if self.peek().is_keyword("default"):
                kw = self.advance()
                if default is not None:
                    raise DslSyntaxError(f"table for {target.text} has two default rows", kw.span)
                self.expect_op("->")
                default, default_span = self.value()
                self.expect_op(";")
                rows.append(_TableRow((), default, (), default_span, is_default=True))
                continue
            start = self.peek()
            key: List[Tuple[Value, SourceSpan]] = []
            if parents:
                key.append(self.value())
                while self.accept_op(","):
                    key.append(self.value())
            self.expect_op("->")
            output, output_span = self.value()
            self.expect_op(";")
            if len(key) != len(parents):
                raise DslSyntaxError(f"row has {len(key)} values but {target.text} has {len(parents)} parents",
                                     start.span)
            rows.append(_TableRow(tuple(v for v, _ in key), output, tuple(s for _, s in key), output_span))
        self.table_rows[target.text] = rows
        entries = tuple((row.key, row.output) for row in rows if not row.is_default)
        self._add_equation(TableEquation(target.text, tuple(parents), entries, default), target.span)

    def _context(self) -> None:
        self.advance()
        name = self.expect_ident("a context name")
        if any(tok.text == name.text for tok, _ in self.raw_contexts):
            raise DslSyntaxError(f"context {name.text} is declared twice", name.span)
        self.expect_op("{")
        assignments: List[Tuple[Token, Value, SourceSpan]] = []
        if not self.peek().is_op("}"):
            while True:
                var = self.expect_ident("an exogenous variable")
                self.expect_op("=")
                value, span = self.value()
                assignments.append((var, value, span))
                if not self.accept_op(","):
                    break
        self.expect_op("}")
        self.accept_op(";")
        self.raw_contexts.append((name, assignments))

    def _rational(self) -> Tuple[Fraction, SourceSpan]:
        tok = self.advance()
        if tok.kind == "DECIMAL":
            text, span = tok.text, tok.span
        elif tok.kind == "INT":
            text, span = tok.text, tok.span
            if self.accept_op("/"):
                den = self.advance()
                if den.kind != "INT":
                    raise DslSyntaxError(f"expected a denominator, found {den.describe()}", den.span)
                text, span = f"{tok.text}/{den.text}", _joined(tok.span, den.span)
        else:
            raise DslSyntaxError(f"expected a probability such as 1/3 or 0.25, found {tok.describe()}", tok.span)
        try:
            return parse_rational(text), span
        except InvalidRational as e:
            raise DslSyntaxError(e.message, span)

    def _prob(self) -> None:
        kw = self.advance()
        if self.prob is not None:
            raise DslSyntaxError("a model has at most one prob declaration", kw.span)
        if self.peek().is_keyword("uniform"):
            self.advance()
            self.expect_op(";")
            self.prob = (kw.span, None)
            return
        self.expect_op("{")
        entries: List[Tuple[Token, Fraction]] = []
        while True:
            name = self.expect_ident("a context name")
            self.expect_op(":")
            weight, _ = self._rational()
            entries.append((name, weight))
            if not self.accept_op(","):
                break
        self.expect_op("}")
        self.accept_op(";")
        self.prob = (kw.span, entries)

    def _k(self) -> None:
        kw = self.advance()
        if self.k_decl is not None:
            raise DslSyntaxError("K is declared twice", kw.span)
        name = self.advance().text if self.peek().kind == "IDENT" else None
        self.expect_op("=")
        decl = _KDecl(kw.span, name)
        if self.peek().is_keyword("all"):
            self.advance()
        elif self.peek().is_keyword("where"):
            decl.where_span = self.advance().span
            decl.where = self._expr()
        else:
            self.expect_op("{")
            decl.names = [self.expect_ident("a context name")]
            while self.accept_op(","):
                decl.names.append(self.expect_ident("a context name"))
            self.expect_op("}")
        self.expect_op(";")
        self.k_decl = decl

    # -- expressions ----------------------------------------------------------

    def _expr(self) -> Expr:
        left = self._conjunction()
        while self.accept_op("||"):
            left = Binary("||", left, self._conjunction())
        return left

    def _conjunction(self) -> Expr:
        left = self._comparison()
        while self.accept_op("&&"):
            left = Binary("&&", left, self._comparison())
        return left

    def _comparison(self) -> Expr:
        left = self._sum()
        tok = self.peek()
        if tok.kind == "OP" and tok.text in _COMPARISONS:
            self.advance()
            left = Binary(tok.text, left, self._sum())
        elif tok.is_op("<-"):
            # "a<-1" is "a < -1" inside equations
            self.advance()
            left = Binary("<", left, self._sum(_negate(self._unary())))
        else:
            return left
        nxt = self.peek()
        if nxt.kind == "OP" and (nxt.text in _COMPARISONS or nxt.text == "<-"):
            raise DslSyntaxError("comparisons do not chain, add parentheses", nxt.span)
        return left

    def _sum(self, first: Optional[Expr] = None) -> Expr:
        left = first if first is not None else self._unary()
        while self.peek().is_op("+") or self.peek().is_op("-"):
            op = self.advance().text
            left = Binary(op, left, self._unary())
        return left

    def _unary(self) -> Expr:
        if self.accept_op("!"):
            return Unary("!", self._unary())
        if self.accept_op("-"):
            return _negate(self._unary())
        return self._primary()

    def _arguments(self, name: Token, count: Optional[int]) -> List[Expr]:
        self.expect_op("(")
        args = [self._expr()]
        while self.accept_op(","):
            args.append(self._expr())
        close = self.expect_op(")")
        if count is not None and len(args) != count:
            raise DslSyntaxError(f"{name.text} takes {count} arguments, got {len(args)}", _joined(name.span, close.span))
        return args

    def _primary(self) -> Expr:
        tok = self.advance()
        if tok.kind == "INT":
            return Const(int(tok.text))
        if tok.is_op("("):
            expr = self._expr()
            self.expect_op(")")
            return expr
        if tok.is_keyword("ite"):
            condition, then, otherwise = self._arguments(tok, 3)
            return Ite(condition, then, otherwise)
        if tok.is_keyword("min") or tok.is_keyword("max"):
            return Call(tok.text, tuple(self._arguments(tok, None)))
        if tok.kind == "IDENT":
            if tok.text in self.variables:
                return Ref(tok.text)
            if tok.text in self.symbols:
                return Const(tok.text)
            raise UnknownIdentifier(f"unknown identifier {tok.text!r}", tok.span)
        if tok.kind == "DECIMAL":
            raise DslSyntaxError("equations only use integer constants", tok.span)
        raise DslSyntaxError(f"expected an expression, found {tok.describe()}", tok.span)

    # -- semantic pass --------------------------------------------------------

    def _span_for(self, error: CausalEngineError, fallback: SourceSpan) -> SourceSpan:
        names: List[str] = []
        if isinstance(error, CyclicModel):
            names.extend(error.cycle[:1])
        for key in ("equation", "variable"):
            if key in error.details:
                names.append(error.details[key])
        names.extend(error.details.get("variables", []))
        for name in names:
            if name in self.eq_spans:
                return self.eq_spans[name]
            if name in self.decl_spans:
                return self.decl_spans[name]
        return fallback

    def _check_tables(self, signature: Signature) -> None:
        for eq in self.equations:
            if not isinstance(eq, TableEquation) or eq.target not in self.decl_spans:
                continue
            for row in self.table_rows[eq.target]:
                for parent, value, span in zip(eq.parents, row.key, row.key_spans):
                    if value not in signature.range_of(parent):
                        raise RangeViolation(f"{parent}={value} is outside the range of {parent}", span,
                                             {"variable": parent, "value": value})
                if row.output not in signature.range_of(eq.target):
                    raise RangeViolation(f"{eq.target}={row.output} is outside the range of {eq.target}",
                                         row.output_span, {"variable": eq.target, "value": row.output})

    def _contexts(self, model: CausalModel) -> Dict[str, Context]:
        signature = model.signature
        contexts: Dict[str, Context] = {}
        for name, assignments in self.raw_contexts:
            values: Dict[str, Value] = {}
            for var, value, span in assignments:
                if var.text not in signature.exogenous_names:
                    raise UnknownIdentifier(f"{var.text!r} is not an exogenous variable", var.span)
                if var.text in values:
                    raise DslSyntaxError(f"context {name.text} sets {var.text} twice", var.span)
                if value not in signature.range_of(var.text):
                    raise RangeViolation(f"{var.text}={value} is outside the range of {var.text}", span,
                                         {"variable": var.text, "value": value})
                values[var.text] = value
            try:
                contexts[name.text] = model.context(values)
            except CausalEngineError as e:
                raise ModelSemanticError(e, name.span)
        return contexts

    def _k_set(self, model: CausalModel, contexts: Dict[str, Context]) -> Optional[ContextSet]:
        decl = self.k_decl
        if decl is None:
            return None
        if decl.where is not None:
            outside = sorted(decl.where.references() - set(model.signature.exogenous_names))
            if outside:
                raise UnknownIdentifier(f"K filters on {', '.join(outside)}, only exogenous variables are allowed",
                                        decl.where_span, {"variables": outside})
            try:
                ensure_within_scale(model.signature.context_count(), "the context space")
                members = tuple(u for u in model.contexts() if decl.where.evaluate(u.as_dict()))
                if not members:
                    raise EmptyRestriction("no context satisfies the K filter")
            except CausalEngineError as e:
                raise ModelSemanticError(e, decl.where_span)
            except ExpressionTypeError as e:
                raise DslSyntaxError(f"K filter: {e}", decl.where_span)
            return ContextSet(members)
        if decl.names is None:
            return ALL
        resolved = []
        for tok in decl.names:
            if tok.text not in contexts:
                raise UnknownIdentifier(f"K mentions unknown context {tok.text!r}", tok.span)
            resolved.append(contexts[tok.text])
        try:
            return ContextSet(tuple(resolved))
        except CausalEngineError as e:
            raise ModelSemanticError(e, decl.span)

    def _distribution(self, model: CausalModel, contexts: Dict[str, Context],
                      k: Optional[ContextSet]) -> Optional[ContextDistribution]:
        if self.prob is None:
            return None
        span, entries = self.prob
        if entries is None:
            try:
                return ContextDistribution.uniform((k if k is not None else ALL).members(model))
            except CausalEngineError as e:
                raise ModelSemanticError(e, span)
        weights: Dict[Context, Fraction] = {}
        for name, weight in entries:
            if name.text not in contexts:
                raise UnknownIdentifier(f"prob mentions unknown context {name.text!r}", name.span)
            u = contexts[name.text]
            if u in weights:
                raise DslSyntaxError(f"context {name.text} is given two probabilities", name.span)
            weights[u] = weight
        total = sum(weights.values(), Fraction(0))
        if total != 1:
            raise ProbSumError(f"probabilities sum to {format_rational(total)}, not 1", span,
                               {"sum": format_rational(total)})
        return ContextDistribution.of(weights)

    def _build(self, name: Token) -> ModelBundle:
        exo = tuple(v for kind, v in self.declared if kind == "exo")
        endo = tuple(v for kind, v in self.declared if kind == "endo")
        try:
            signature = Signature(exo, endo)
        except CausalEngineError as e:
            raise ModelSemanticError(e, name.span)
        self._check_tables(signature)
        try:
            model = build_model(signature, self.equations)
        except CausalEngineError as e:
            raise ModelSemanticError(e, self._span_for(e, name.span))
        contexts = self._contexts(model)
        k = self._k_set(model, contexts)
        distribution = self._distribution(model, contexts, k)
        logger.debug(f"Parsed model {name.text}: {len(contexts)} named contexts, "
                     f"prob={'yes' if distribution else 'no'}, K={'declared' if k is not None else 'absent'}")
        decl = self.k_decl
        return ModelBundle(name.text, model, contexts, distribution, k,
                           k_name=decl.name if decl else None, k_filter=decl.where if decl else None)


def parse_model(text: str) -> ModelBundle:
    """Parse the text of a ``.cm`` file into a ModelBundle.

    Raises:
        DslError: syntax, identifier, range or probability problems, with a SourceSpan.
    """
    return _ModelParser(text).parse()


# ---------------------------------------------------------------------------
# Formulas, candidates, contexts
# ---------------------------------------------------------------------------

class _FormulaParser(_Parser):

    def parse(self) -> Formula:
        formula = self._or()
        self.expect_end()
        return formula

    def _or(self) -> Formula:
        left = self._and()
        while self.accept_op("|"):
            left = Or(left, self._and())
        return left

    def _and(self) -> Formula:
        left = self._unary()
        while self.accept_op("&"):
            left = And(left, self._unary())
        return left

    def _unary(self) -> Formula:
        if self.accept_op("~"):
            return Not(self._unary())
        if self.accept_op("("):
            inner = self._or()
            self.expect_op(")")
            return inner
        if self.peek().is_op("["):
            return self._causal()
        return self._event()

    def _causal(self) -> Formula:
        open_ = self.expect_op("[")
        settings: List[Tuple[str, Value]] = []
        while True:
            var = self.expect_ident("a variable")
            self.expect_op("<-")
            settings.append((var.text, self.value()[0]))
            if not self.accept_op(","):
                break
        close = self.expect_op("]")
        try:
            intervention = Intervention.of(settings)
        except CausalEngineError as e:
            raise DslSyntaxError(e.message, _joined(open_.span, close.span))
        self.expect_op("(")
        body = self._or()
        self.expect_op(")")
        return Causal(intervention, body)

    def _event(self) -> Formula:
        var = self.expect_ident("a primitive event like X=1")
        if self.accept_op("="):
            return PrimitiveEvent(var.text, self.value()[0])
        if self.accept_op("!="):
            return Not(PrimitiveEvent(var.text, self.value()[0]))
        tok = self.peek()
        raise DslSyntaxError(f"expected '=' after {var.text}, found {tok.describe()}", tok.span)


def parse_formula(text: str, model: CausalModel) -> Formula:
    """Parse ``X=1``, ``~f``, ``f & g``, ``f | g`` and ``[X<-1, Y<-0](f)`` and check it against ``model``."""
    formula = _FormulaParser(text).parse()
    return check_formula(model, formula)


def parse_conjunction(text: str, model: CausalModel) -> Conjunction:
    """A candidate cause or explanation: ``X1=x1 & ... & Xk=xk``."""
    formula = parse_formula(text, model)
    events: List[Tuple[str, Value]] = []

    def collect(f: Formula) -> None:
        if isinstance(f, PrimitiveEvent):
            events.append((f.variable, f.value))
        elif isinstance(f, And):
            collect(f.left)
            collect(f.right)
        else:
            raise DslSyntaxError(f"expected a conjunction of primitive events such as 'X=1 & Y=0', got {text!r}")

    collect(formula)
    return Conjunction(tuple(events)).check(model)


def parse_context(text: str, bundle: ModelBundle) -> Context:
    """A context given by name (``u1``) or inline (``U1=1, U2=0``)."""
    text = text.strip()
    if text in bundle.contexts:
        return bundle.contexts[text]
    if "=" not in text:
        return bundle.context(text)
    parser = _Parser(text)
    values: Dict[str, Value] = {}
    while True:
        var = parser.expect_ident("an exogenous variable")
        parser.expect_op("=")
        values[var.text] = parser.value()[0]
        if not parser.accept_op(","):
            break
    parser.expect_end()
    return bundle.model.context(values)


def parse_context_set(text: Union[str, None], bundle: ModelBundle) -> ContextSet:
    """``all``, ``{u1, u2}`` or ``u1,u2``; an empty value falls back to the bundle's K."""
    if text is None or not text.strip():
        return bundle.k_set()
    text = text.strip()
    if text == "all":
        return ALL
    if bundle.k_name is not None and text == bundle.k_name:
        return bundle.k_set()
    if text in bundle.contexts:
        return ContextSet((bundle.contexts[text],))
    names = [n.strip() for n in text.strip("{}").split(",") if n.strip()]
    if not names:
        raise DslSyntaxError(f"empty context set {text!r}")
    return ContextSet(tuple(bundle.context(n) for n in names))


def parse_value(text: str) -> Value:
    """A single range value from the command line: ``-1`` is an int, ``low`` a symbol."""
    parser = _Parser(text.strip())
    value, _ = parser.value()
    parser.expect_end()
    return value
