# app/services/verification.py
"""
Exhaustive checks of the two sufficient-condition results, on a given model or on
seeded random models.

Theorem 1: when the candidate lives inside a causally independent set of
variables that is determined by the context and contains every parent of the
outcome, SC1 + SC3 + SC4 already give SC2.

Theorem 2: in a depth-two classifier lift, bounds on Pr([X <- x] O=o) (for the
candidate and its subsets) and on how often X can flip O give a partial
explanation of O=o with the corresponding goodness.

A failed implication means the engine disagrees with a proof, so every one is
kept as a counterexample.
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.engine.causation import verify_theorem1
from app.engine.errors import NotDepthTwoModel, ZeroProbabilityCondition
from app.engine.explanation import ContextDistribution, lift_bounds, verify_theorem2
from app.engine.formula import Conjunction, PrimitiveEvent
from app.engine.model import (
    CausalModel,
    Context,
    Signature,
    TableEquation,
    Variable,
    build_model,
    depth_two_output,
    ensure_within_scale,
)
from app.services.classifier_bridge import GridSpec, ImageDistribution, Labeler, lift_classifier

logger = logging.getLogger(__name__)

BINARY = (0, 1)


@dataclass
class VerificationSummary:
    theorem: int
    trials: int = 0
    applicable: int = 0
    held: int = 0
    skipped: int = 0
    counterexamples: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def record(self, applicable: bool, holds: bool, description: Dict[str, Any]) -> None:
        self.trials += 1
        self.applicable += int(applicable)
        if holds:
            self.held += 1
        else:
            self.counterexamples.append(description)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "theorem": self.theorem,
            "trials": self.trials,
            "applicable": self.applicable,
            "held": self.held,
            "skipped": self.skipped,
            "counterexamples": self.counterexamples,
        }


def conjunctions(model: CausalModel, names: Sequence[str], max_size: Optional[int] = None) -> Iterator[Conjunction]:
    names = sorted(names)
    top = len(names) if max_size is None else min(max_size, len(names))
    for size in range(1, top + 1):
        for combo in itertools.combinations(names, size):
            for values in itertools.product(*(model.signature.range_of(n) for n in combo)):
                yield Conjunction(tuple(zip(combo, values)))


def _sinks(model: CausalModel) -> List[str]:
    endo = set(model.signature.endogenous_names)
    return [n for n in model.signature.endogenous_names if not endo & set(model.graph.successors(n))]


# ---------------------------------------------------------------------------
# Theorem 1
# ---------------------------------------------------------------------------

def theorem1_on_model(model: CausalModel, contexts: Optional[Sequence[Context]] = None) -> VerificationSummary:
    """Every sink at its actual value, with the sink's endogenous parents as the superset."""
    summary = VerificationSummary(1)
    if not contexts:
        ensure_within_scale(model.signature.context_count(), "the context space")
        contexts = list(model.contexts())
    for sink in _sinks(model):
        superset = [p for p in model.parents(sink) if model.signature.is_endogenous(p)]
        if not superset:
            logger.debug(f"Sink {sink} has no endogenous parents, nothing to check")
            continue
        for u in contexts:
            phi = PrimitiveEvent(sink, model.solve(u)[sink])
            for cand in conjunctions(model, superset):
                report = verify_theorem1(model, superset, cand, phi, u)
                summary.record(report.applicable, report.implication_holds,
                               {"phi": str(phi), "candidate": str(cand), "context": u.as_dict(), **report.as_dict()})
    logger.info(f"{'✅' if summary.passed else '❌'} Theorem 1 on model: {summary.held}/{summary.trials} hold "
                f"({summary.applicable} with all side conditions)")
    return summary


def _random_table(rng: np.random.Generator, target: str, parents: Sequence[str],
                  varying: bool = False) -> TableEquation:
    keys = list(itertools.product(BINARY, repeat=len(parents)))
    outputs = [int(rng.integers(0, 2)) for _ in keys]
    if varying and len(keys) > 1 and len(set(outputs)) == 1:
        flip = int(rng.integers(0, len(keys)))
        outputs[flip] = 1 - outputs[flip]
    return TableEquation(target, tuple(parents), tuple(zip(keys, outputs)))


def _random_subset(rng: np.random.Generator, pool: Sequence[str], low: int = 1) -> List[str]:
    size = int(rng.integers(low, len(pool) + 1))
    return sorted(str(n) for n in rng.choice(list(pool), size=size, replace=False))


def random_theorem1_model(rng: np.random.Generator, max_bits: int = 10) -> Tuple[CausalModel, List[str]]:
    """Binary model meeting every side condition for any candidate over the inputs.

    Each input I<i> copies its own exogenous U<i>, so the inputs are causally independent
    and every setting of them is reached by some context. O reads only the inputs through a
    non-constant table. Extras D* sit downstream and may also read a noise variable N1.
    Returns the model and the input names (the superset for the check).
    """
    n_inputs = int(rng.integers(1, max(1, min(3, (max_bits - 1) // 2)) + 1))
    used = 2 * n_inputs + 1
    noise = ["N1"] if used < max_bits and rng.random() < 0.5 else []
    used += len(noise)
    n_extra = max(0, min(int(rng.integers(0, 3)), max_bits - used))
    inputs = [f"I{i}" for i in range(1, n_inputs + 1)]
    exo = [f"U{i}" for i in range(1, n_inputs + 1)] + noise
    extras = [f"D{i}" for i in range(1, n_extra + 1)]

    equations = [TableEquation(name, (f"U{i}",), tuple(((v,), v) for v in BINARY))
                 for i, name in enumerate(inputs, start=1)]
    equations.append(_random_table(rng, "O", inputs, varying=True))
    upstream = inputs + ["O"] + noise
    for name in extras:
        equations.append(_random_table(rng, name, _random_subset(rng, upstream)))
        upstream.append(name)

    signature = Signature(tuple(Variable(n, BINARY) for n in exo),
                          tuple(Variable(n, BINARY) for n in inputs + ["O"] + extras))
    return build_model(signature, equations), inputs


def theorem1_random(trials: int, seed: int, max_bits: int = 10) -> VerificationSummary:
    rng = np.random.default_rng(seed)
    summary = VerificationSummary(1)
    for trial in range(trials):
        model, inputs = random_theorem1_model(rng, max_bits)
        contexts = list(model.contexts())
        u = contexts[int(rng.integers(0, len(contexts)))]
        actual = model.solve(u)
        phi = PrimitiveEvent("O", actual["O"])
        names = _random_subset(rng, inputs)
        # mostly actual values, so that SC1 has a chance
        values = [actual[n] if rng.random() < 0.75 else int(rng.integers(0, 2)) for n in names]
        cand = Conjunction(tuple(zip(names, values)))
        report = verify_theorem1(model, inputs, cand, phi, u)
        summary.record(report.applicable, report.implication_holds,
                       {"trial": trial, "phi": str(phi), "candidate": str(cand), "context": u.as_dict(),
                        **report.as_dict()})
    logger.info(f"{'✅' if summary.passed else '❌'} Theorem 1, {trials} random models (seed {seed}): "
                f"{summary.held} hold, {summary.applicable} with all side conditions")
    return summary


# ---------------------------------------------------------------------------
# Theorem 2
# ---------------------------------------------------------------------------

def _check_lift(summary: VerificationSummary, model: CausalModel, distribution: ContextDistribution,
                cand: Conjunction, o, extra: Dict[str, Any]) -> None:
    """Run the check with the tightest goodness the candidate can claim."""
    try:
        bounds = lift_bounds(model, distribution, cand, o)
    except ZeroProbabilityCondition:
        summary.skipped += 1
        return
    if bounds.alpha == 0 or bounds.beta == 0:
        summary.skipped += 1
        return
    report = verify_theorem2(model, distribution, cand, o, bounds.tight())
    summary.record(report.cond1 and report.cond2 and report.cond3, report.implication_holds,
                   {"candidate": str(cand), "label": o, **extra, **report.as_dict()})


def theorem2_on_model(model: CausalModel, distribution: ContextDistribution,
                      max_size: Optional[int] = None) -> VerificationSummary:
    output = depth_two_output(model)
    if output is None:
        raise NotDepthTwoModel("the model is not a depth-two classifier lift")
    summary = VerificationSummary(2)
    pixels = [n for n in model.signature.endogenous_names if n != output]
    for o in model.signature.range_of(output):
        for cand in conjunctions(model, pixels, max_size):
            _check_lift(summary, model, distribution, cand, o, {})
    logger.info(f"{'✅' if summary.passed else '❌'} Theorem 2 on model: {summary.held}/{summary.trials} hold "
                f"({summary.skipped} candidates skipped)")
    return summary


def random_lift(rng: np.random.Generator, max_pixels: int = 8):
    """A lifted n x 1 classifier with a random label table and a random positive distribution."""
    n = int(rng.integers(1, max_pixels + 1))
    grid = GridSpec(n, 1)
    images = list(grid.images())
    labels = rng.integers(0, 2, size=len(images))
    weights = rng.integers(1, 10, size=len(images))
    total = int(weights.sum())
    labeler = Labeler("table", table=tuple((img, int(l)) for img, l in zip(images, labels)))
    distribution = ImageDistribution(grid, tuple((img, Fraction(int(w), total)) for img, w in zip(images, weights)))
    return lift_classifier(grid, labeler, distribution)


def theorem2_random(trials: int, seed: int, max_pixels: int = 8) -> VerificationSummary:
    rng = np.random.default_rng(seed)
    summary = VerificationSummary(2)
    for trial in range(trials):
        lifted = random_lift(rng, max_pixels)
        model = lifted.model
        pixels = list(lifted.grid.pixel_names)
        names = _random_subset(rng, pixels)[:3]
        cand = Conjunction(tuple((n, int(rng.integers(0, 2))) for n in names))
        o = int(rng.integers(0, 2))
        _check_lift(summary, model, lifted.distribution, cand, o, {"trial": trial, "pixels": len(pixels)})
    logger.info(f"{'✅' if summary.passed else '❌'} Theorem 2, {trials} random lifts (seed {seed}): "
                f"{summary.held}/{summary.trials} hold, {summary.skipped} skipped")
    return summary
