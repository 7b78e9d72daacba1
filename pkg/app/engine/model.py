"""
app/engine/model.py - Causal models: signatures, structural equations, solving and interventions.

Every equation is compiled once into a dense table keyed by the values of its
*semantic* parents (the parents it actually depends on). Variables are kept in
canonical order (sorted by name); contexts are enumerated in that order with each
range walked in declaration order.
"""
import itertools
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx

from app import config
from app.engine.errors import (
    CyclicModel,
    DuplicateEquation,
    EquationEvaluationError,
    InvalidContext,
    InvalidSignature,
    MissingEquation,
    OutOfRangeEquationOutput,
    ScaleExceeded,
    UnknownVariable,
    ValueOutOfRange,
)
from app.engine.expressions import Const, Expr, ExpressionTypeError, Value

logger = logging.getLogger(__name__)

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

Pairs = Tuple[Tuple[str, Value], ...]


# ---------------------------------------------------------------------------
# Signature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    name: str
    values: Tuple[Value, ...]

    def __post_init__(self):
        if not isinstance(self.name, str) or not _NAME_RE.match(self.name):
            raise InvalidSignature(f"invalid variable name {self.name!r}")
        values = tuple(self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise InvalidSignature(f"variable {self.name} has an empty range", {"variable": self.name})
        if len(set(values)) != len(values):
            raise InvalidSignature(f"variable {self.name} has duplicate range values", {"variable": self.name})


@dataclass(frozen=True)
class Signature:
    exogenous: Tuple[Variable, ...]
    endogenous: Tuple[Variable, ...]

    def __post_init__(self):
        exo = tuple(sorted(self.exogenous, key=lambda v: v.name))
        endo = tuple(sorted(self.endogenous, key=lambda v: v.name))
        object.__setattr__(self, "exogenous", exo)
        object.__setattr__(self, "endogenous", endo)
        names = [v.name for v in exo + endo]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise InvalidSignature(f"variable names declared twice: {', '.join(duplicates)}",
                                   {"variables": duplicates})
        if not endo:
            raise InvalidSignature("a model needs at least one endogenous variable")

    @property
    def exogenous_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.exogenous)

    @property
    def endogenous_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.endogenous)

    def variable(self, name: str) -> Variable:
        for var in self.exogenous + self.endogenous:
            if var.name == name:
                return var
        raise UnknownVariable(f"unknown variable {name!r}", {"variable": name})

    def range_of(self, name: str) -> Tuple[Value, ...]:
        return self.variable(name).values

    def is_endogenous(self, name: str) -> bool:
        return name in self.endogenous_names

    def context_count(self) -> int:
        return math.prod(len(v.values) for v in self.exogenous)


# ---------------------------------------------------------------------------
# Equations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpressionEquation:
    target: str
    expr: Expr

    def syntactic_parents(self) -> Tuple[str, ...]:
        return tuple(sorted(self.expr.references()))

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        return self.expr.evaluate(env)


@dataclass(frozen=True)
class TableEquation:
    """Explicit table: rows map a tuple of parent values to an output; ``default`` covers the rest."""
    target: str
    parents: Tuple[str, ...]
    rows: Tuple[Tuple[Tuple[Value, ...], Value], ...]
    default: Optional[Value] = None

    def syntactic_parents(self) -> Tuple[str, ...]:
        return tuple(self.parents)

    def lookup(self) -> Dict[Tuple[Value, ...], Value]:
        table: Dict[Tuple[Value, ...], Value] = {}
        for key, value in self.rows:
            key = tuple(key)
            if len(key) != len(self.parents):
                raise EquationEvaluationError(
                    f"table for {self.target}: row {key} has {len(key)} entries, expected {len(self.parents)}",
                    {"variable": self.target})
            if key in table and table[key] != value:
                raise EquationEvaluationError(f"table for {self.target}: conflicting rows for {key}",
                                              {"variable": self.target})
            table[key] = value
        return table

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        key = tuple(env[p] for p in self.parents)
        table = self.lookup()
        if key in table:
            return table[key]
        if self.default is None:
            raise EquationEvaluationError(f"table for {self.target} has no row for {key} and no default",
                                          {"variable": self.target, "assignment": dict(zip(self.parents, key))})
        return self.default


StructuralEquation = Union[ExpressionEquation, TableEquation]


@dataclass(frozen=True)
class CompiledEquation:
    target: str
    parents: Tuple[str, ...]  # semantic parents, canonical order
    table: Mapping[Tuple[Value, ...], Value]

    def output(self, values: Mapping[str, Value]) -> Value:
        return self.table[tuple(values[p] for p in self.parents)]


@dataclass(frozen=True)
class EdgeWitness:
    """Values showing that ``child`` depends on ``parent``: flipping parent from x to x_alt changes child."""
    parent: str
    child: str
    others: Pairs
    x: Value
    x_alt: Value


# ---------------------------------------------------------------------------
# Contexts, assignments, interventions
# ---------------------------------------------------------------------------

def _pairs(mapping: Union[Mapping[str, Value], Sequence[Tuple[str, Value]]]) -> Pairs:
    items = mapping.items() if isinstance(mapping, Mapping) else mapping
    return tuple(sorted(((str(k), v) for k, v in items), key=lambda kv: kv[0]))


@dataclass(frozen=True)
class Context:
    """A total assignment of the exogenous variables (hashable, canonical order)."""
    values: Pairs

    @classmethod
    def of(cls, mapping) -> "Context":
        return cls(_pairs(mapping))

    def as_dict(self) -> Dict[str, Value]:
        return dict(self.values)

    def __getitem__(self, name: str) -> Value:
        return self.as_dict()[name]

    def label(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self.values)


@dataclass(frozen=True)
class Intervention:
    settings: Pairs = ()

    @classmethod
    def of(cls, mapping) -> "Intervention":
        pairs = _pairs(mapping)
        names = [k for k, _ in pairs]
        if len(set(names)) != len(names):
            raise InvalidContext("an intervention sets each variable at most once", {"settings": names})
        return cls(pairs)

    def as_dict(self) -> Dict[str, Value]:
        return dict(self.settings)

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self.settings)


class TotalAssignment(Mapping):
    """Read-only values of every variable: the context followed by the solution it induces."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, Value]):
        self._values = dict(values)

    def __getitem__(self, name: str) -> Value:
        return self._values[name]

    def __iter__(self):
        return iter(sorted(self._values))

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"TotalAssignment({dict(sorted(self._values.items()))})"


# ---------------------------------------------------------------------------
# The model
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CausalModel:
    signature: Signature
    equations: Tuple[StructuralEquation, ...]
    compiled: Mapping[str, CompiledEquation] = field(repr=False)
    graph: nx.DiGraph = field(repr=False)
    edge_witnesses: Mapping[Tuple[str, str], EdgeWitness] = field(repr=False)
    order: Tuple[str, ...] = field(repr=False)
    _descendants: Dict[FrozenSet[str], FrozenSet[str]] = field(default_factory=dict, repr=False)
    # minimal cause sets per (context, phi, witness constraint, witness scope); dropped with the model
    cause_sets: Dict[tuple, Tuple[FrozenSet[str], ...]] = field(default_factory=dict, repr=False)

    # -- structure ----------------------------------------------------------

    def equation(self, name: str) -> StructuralEquation:
        for eq in self.equations:
            if eq.target == name:
                return eq
        raise UnknownVariable(f"{name!r} is not an endogenous variable", {"variable": name})

    def parents(self, name: str) -> Tuple[str, ...]:
        self.signature.variable(name)
        return tuple(sorted(self.graph.predecessors(name)))

    def descendants(self, names) -> FrozenSet[str]:
        """Endogenous variables reachable from ``names`` (the names themselves excluded)."""
        key = frozenset(names)
        if key not in self._descendants:
            reached = set()
            for name in key:
                reached |= nx.descendants(self.graph, name)
            self._descendants[key] = frozenset(reached - key)
        return self._descendants[key]

    def ancestors(self, names) -> FrozenSet[str]:
        """Endogenous ancestors of ``names`` (the names themselves excluded)."""
        reached = set()
        for name in names:
            reached |= nx.ancestors(self.graph, name)
        endo = set(self.signature.endogenous_names)
        return frozenset((reached & endo) - set(names))

    # -- evaluation ---------------------------------------------------------

    def context(self, mapping) -> Context:
        """Validate a (possibly partial) mapping as a total context."""
        values = dict(mapping.values) if isinstance(mapping, Context) else dict(mapping)
        for name in values:
            if name not in self.signature.exogenous_names:
                raise UnknownVariable(f"{name!r} is not an exogenous variable", {"variable": name})
        missing = [n for n in self.signature.exogenous_names if n not in values]
        if missing:
            raise InvalidContext(f"context does not set {', '.join(missing)}", {"missing": missing})
        for name, value in values.items():
            if value not in self.signature.range_of(name):
                raise ValueOutOfRange(f"{name}={value} is outside the range of {name}",
                                      {"variable": name, "value": value})
        return Context.of(values)

    def contexts(self) -> Iterator[Context]:
        exo = self.signature.exogenous
        names = [v.name for v in exo]
        for combo in itertools.product(*(v.values for v in exo)):
            yield Context(tuple(zip(names, combo)))

    def solve(self, u: Context, settings: Optional[Mapping[str, Value]] = None) -> Dict[str, Value]:
        """Unique solution in context ``u`` after applying ``settings`` (a raw, already validated dict)."""
        values: Dict[str, Value] = dict(u.values)
        settings = settings or {}
        for name in self.order:
            if name in settings:
                values[name] = settings[name]
            else:
                values[name] = self.compiled[name].output(values)
        return values

    def evaluate(self, u: Context, intervention: Optional[Intervention] = None) -> TotalAssignment:
        u = self.context(u)
        settings = self.check_settings(intervention.as_dict()) if intervention else {}
        return TotalAssignment(self.solve(u, settings))

    def evaluate_all(self) -> List[Tuple[Context, TotalAssignment]]:
        return [(u, TotalAssignment(self.solve(u))) for u in self.contexts()]

    def check_settings(self, settings: Mapping[str, Value]) -> Dict[str, Value]:
        for name, value in settings.items():
            if not self.signature.is_endogenous(name):
                if name in self.signature.exogenous_names:
                    raise UnknownVariable(f"cannot intervene on exogenous variable {name}", {"variable": name})
                raise UnknownVariable(f"unknown variable {name!r}", {"variable": name})
            if value not in self.signature.range_of(name):
                raise ValueOutOfRange(f"{name}={value} is outside the range of {name}",
                                      {"variable": name, "value": value})
        return dict(settings)

    def intervene(self, intervention: Intervention) -> "CausalModel":
        """M_{X<-x}: the equations of the intervened variables become constants."""
        settings = self.check_settings(intervention.as_dict())
        equations = tuple(
            ExpressionEquation(eq.target, Const(settings[eq.target])) if eq.target in settings else eq
            for eq in self.equations
        )
        compiled = dict(self.compiled)
        graph = self.graph.copy()
        witnesses = dict(self.edge_witnesses)
        for name, value in settings.items():
            compiled[name] = CompiledEquation(name, (), {(): value})
            for parent in list(graph.predecessors(name)):
                graph.remove_edge(parent, name)
                witnesses.pop((parent, name), None)
        return CausalModel(self.signature, equations, compiled, graph, witnesses, self.order)

    def edge_witness(self, parent: str, child: str) -> Optional[EdgeWitness]:
        self.signature.variable(parent)
        self.signature.variable(child)
        return self.edge_witnesses.get((parent, child))


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def ensure_within_scale(count: int, what: str, cap: Optional[int] = None) -> None:
    cap = cap if cap is not None else config.max_contexts()
    if count > cap:
        raise ScaleExceeded(f"{what} has {count} elements, above the limit of {cap} (CEX_MAX_CONTEXTS)",
                            {"size": count, "limit": cap})


def _compile(eq: StructuralEquation, signature: Signature, cap: int
             ) -> Tuple[CompiledEquation, Dict[str, EdgeWitness]]:
    parents = eq.syntactic_parents()
    for p in parents:
        try:
            signature.variable(p)
        except UnknownVariable:
            raise UnknownVariable(f"equation for {eq.target} mentions undeclared variable {p!r}",
                                  {"variable": p, "equation": eq.target})
    if isinstance(eq, TableEquation):
        if len(set(parents)) != len(parents):
            raise InvalidSignature(f"table for {eq.target} lists a parent twice", {"equation": eq.target})
        rows = eq.lookup()
        for key, out in rows.items():
            for p, v in zip(parents, key):
                if v not in signature.range_of(p):
                    raise ValueOutOfRange(f"table for {eq.target}: {p}={v} is outside the range of {p}",
                                          {"variable": p, "value": v, "equation": eq.target})
    ranges = [signature.range_of(p) for p in parents]
    ensure_within_scale(math.prod(len(r) for r in ranges), f"domain of the equation for {eq.target}", cap)

    target_range = signature.range_of(eq.target)
    rows = eq.lookup() if isinstance(eq, TableEquation) else None
    full: Dict[Tuple[Value, ...], Value] = {}
    for combo in itertools.product(*ranges):
        env = dict(zip(parents, combo))
        try:
            if rows is None:
                out = eq.evaluate(env)
            elif combo in rows:
                out = rows[combo]
            elif eq.default is not None:
                out = eq.default
            else:
                out = eq.evaluate(env)
        except ExpressionTypeError as e:
            raise EquationEvaluationError(f"equation for {eq.target}: {e}",
                                          {"equation": eq.target, "assignment": env})
        if isinstance(out, bool):
            out = int(out)
        if out not in target_range:
            raise OutOfRangeEquationOutput(
                f"equation for {eq.target} yields {out!r} outside its range at {env}",
                {"equation": eq.target, "assignment": env, "value": out})
        full[combo] = out

    witnesses: Dict[str, EdgeWitness] = {}
    for i, p in enumerate(parents):
        seen: Dict[Tuple[Value, ...], Tuple[Value, Value]] = {}
        for combo, out in full.items():
            rest = combo[:i] + combo[i + 1:]
            if rest not in seen:
                seen[rest] = (combo[i], out)
            elif seen[rest][1] != out and p not in witnesses:
                others = tuple(sorted(zip(parents[:i] + parents[i + 1:], rest)))
                witnesses[p] = EdgeWitness(p, eq.target, others, seen[rest][0], combo[i])
    semantic = tuple(p for p in parents if p in witnesses)
    idx = [parents.index(p) for p in semantic]
    table = {tuple(combo[i] for i in idx): out for combo, out in full.items()}
    return CompiledEquation(eq.target, semantic, table), witnesses


def build_model(signature: Signature, equations: Sequence[StructuralEquation],
                max_contexts: Optional[int] = None) -> CausalModel:
    cap = max_contexts if max_contexts is not None else config.max_contexts()
    ensure_within_scale(signature.context_count(), "the context space", cap)

    by_target: Dict[str, StructuralEquation] = {}
    for eq in equations:
        if eq.target in signature.exogenous_names:
            raise InvalidSignature(f"exogenous variable {eq.target} cannot have an equation",
                                   {"variable": eq.target})
        if not signature.is_endogenous(eq.target):
            raise UnknownVariable(f"equation for undeclared variable {eq.target!r}", {"variable": eq.target})
        if eq.target in by_target:
            raise DuplicateEquation(f"{eq.target} has more than one equation", {"variable": eq.target})
        by_target[eq.target] = eq
    missing = [n for n in signature.endogenous_names if n not in by_target]
    if missing:
        raise MissingEquation(f"no equation for {', '.join(missing)}", {"variables": missing})

    graph = nx.DiGraph()
    graph.add_nodes_from(signature.exogenous_names + signature.endogenous_names)
    compiled: Dict[str, CompiledEquation] = {}
    edge_witnesses: Dict[Tuple[str, str], EdgeWitness] = {}
    for name in signature.endogenous_names:
        comp, witnesses = _compile(by_target[name], signature, cap)
        compiled[name] = comp
        for parent, witness in witnesses.items():
            graph.add_edge(parent, name)
            edge_witnesses[(parent, name)] = witness

    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        nodes = [u for u, _ in cycle] + [cycle[0][0]]
        raise CyclicModel(nodes)

    order = tuple(n for n in nx.lexicographical_topological_sort(graph) if n in compiled)
    model = CausalModel(signature, tuple(by_target[n] for n in signature.endogenous_names),
                        compiled, graph, edge_witnesses, order)
    logger.debug(f"Built model with {len(signature.exogenous)} exogenous / {len(order)} endogenous variables, "
                 f"{graph.number_of_edges()} edges")
    return model


def causal_graph(model: CausalModel) -> nx.DiGraph:
    """Copy of the dependency graph; every edge carries its witness under the ``witness`` attribute."""
    graph = model.graph.copy()
    for (parent, child), witness in model.edge_witnesses.items():
        if graph.has_edge(parent, child):
            graph.edges[parent, child]["witness"] = witness
    return graph


def depth_two_output(model: CausalModel) -> Optional[str]:
    """Name of the output variable if the model is a depth-two lift, otherwise None.

    Depth two: every endogenous variable but one copies exactly one exogenous
    variable (no two share it), and the remaining one depends only on those.
    """
    sig = model.signature
    exo = set(sig.exogenous_names)
    pixels, others = [], []
    for name in sig.endogenous_names:
        parents = model.parents(name)
        if len(parents) == 1 and parents[0] in exo:
            pixels.append(name)
        else:
            others.append(name)
    if len(others) != 1:
        return None
    output = others[0]
    if not set(model.parents(output)) <= set(pixels):
        return None
    sources = [model.parents(p)[0] for p in pixels]
    if len(set(sources)) != len(sources):
        return None
    return output
