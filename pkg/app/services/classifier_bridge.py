# app/services/classifier_bridge.py
"""
Lifting a pixel labeler to a depth-two causal model and explaining its outputs.

Pixels are numbered row-major from 1: pixel (row, col) of a W x H grid is the
endogenous variable X{row*W + col + 1}, copied from exogenous U{...}; the label is O.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from app.engine.errors import (
    EmptyRestriction,
    InvalidContext,
    InvalidSignature,
    UnknownVariable,
    ValueOutOfRange,
    WeightSumNotOne,
    ZeroProbabilityCondition,
)
from app.engine.expressions import Ref, Value
from app.engine.explanation import (
    ALL,
    ContextDistribution,
    ContextSet,
    GoodnessPair,
    HALPERN,
    ProbabilisticModel,
    find_partial_explanations,
    restrict_distribution,
)
from app.engine.formula import Conjunction, Formula, PrimitiveEvent, check_formula, holds_in
from app.engine.model import (
    CausalModel,
    Context,
    ExpressionEquation,
    Signature,
    TableEquation,
    Variable,
    build_model,
    depth_two_output,
    ensure_within_scale,
)
from app.utils.rationals import format_rational, parse_rational

logger = logging.getLogger(__name__)

OUTPUT = "O"

Image = Tuple[Value, ...]


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    pixel_range: Tuple[Value, ...] = (0, 1)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidSignature(f"grid must be at least 1x1, got {self.width}x{self.height}")
        values = tuple(self.pixel_range)
        if len(values) < 2 or len(set(values)) != len(values):
            raise InvalidSignature("pixel range needs at least two distinct values")
        object.__setattr__(self, "pixel_range", values)

    @classmethod
    def parse(cls, text: str, pixel_range: Tuple[Value, ...] = (0, 1)) -> "GridSpec":
        """'4x4' -> GridSpec(4, 4)."""
        try:
            w, h = text.lower().split("x")
            return cls(int(w), int(h), pixel_range)
        except ValueError:
            raise InvalidSignature(f"grid must look like WxH, got {text!r}")

    @property
    def size(self) -> int:
        return self.width * self.height

    def pixel(self, row: int, col: int) -> str:
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise UnknownVariable(f"pixel ({row},{col}) is outside the {self.width}x{self.height} grid")
        return f"X{row * self.width + col + 1}"

    def coordinates(self, name: str) -> Tuple[int, int]:
        if name not in self.pixel_names:
            raise UnknownVariable(f"{name!r} is not a pixel of the grid", {"variable": name})
        return divmod(self.pixel_names.index(name), self.width)

    @property
    def pixel_names(self) -> Tuple[str, ...]:
        return tuple(f"X{i + 1}" for i in range(self.size))

    @property
    def source_names(self) -> Tuple[str, ...]:
        return tuple(f"U{i + 1}" for i in range(self.size))

    def images(self) -> Iterable[Image]:
        ensure_within_scale(len(self.pixel_range) ** self.size, "the image space")
        return itertools.product(self.pixel_range, repeat=self.size)

    def check_image(self, image: Iterable[Value]) -> Image:
        image = tuple(image)
        if len(image) != self.size:
            raise InvalidContext(f"image has {len(image)} pixels, grid has {self.size}")
        for value in image:
            if value not in self.pixel_range:
                raise ValueOutOfRange(f"pixel value {value!r} outside {self.pixel_range}")
        return image

    def context(self, image: Image) -> Context:
        return Context(tuple(sorted(zip(self.source_names, image))))

    def image_of(self, u: Context) -> Image:
        values = u.as_dict()
        return tuple(values[name] for name in self.source_names)


# ---------------------------------------------------------------------------
# Labelers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Labeler:
    """A deterministic image -> label function.

    kinds: any-on, parity-first-pixel, threshold (k pixels on), block (some k x k
    block fully dark) and table (explicit image -> label entries).
    """
    kind: str
    label_range: Tuple[Value, ...] = (0, 1)
    k: Optional[int] = None
    table: Tuple[Tuple[Image, Value], ...] = ()

    def __post_init__(self):
        if self.kind not in ("any-on", "parity-first-pixel", "threshold", "block", "table"):
            raise InvalidSignature(f"unknown labeler {self.kind!r}")
        if self.kind != "table" and len(self.label_range) != 2:
            raise InvalidSignature(f"labeler {self.kind} needs a two-valued label range")
        if self.kind in ("threshold", "block") and (self.k is None or self.k < 1):
            raise InvalidSignature(f"labeler {self.kind} needs a positive k")

    @classmethod
    def parse(cls, text: str) -> "Labeler":
        """'any-on', 'parity-first-pixel', 'threshold:2', 'block:2'."""
        name, _, arg = text.partition(":")
        if name in ("threshold", "block"):
            try:
                return cls(name, k=int(arg))
            except ValueError:
                raise InvalidSignature(f"labeler {name} needs an integer argument, e.g. {name}:2")
        return cls(name)

    def labeling(self, grid: GridSpec) -> Callable[[Image], Value]:
        off = grid.pixel_range[0]
        dark = grid.pixel_range[-1]
        neg, pos = self.label_range[0], self.label_range[-1]

        if self.kind == "any-on":
            return lambda image: pos if any(v != off for v in image) else neg
        if self.kind == "threshold":
            return lambda image: pos if sum(1 for v in image if v != off) >= self.k else neg
        if self.kind == "parity-first-pixel":
            def parity(image: Image) -> Value:
                zeros = sum(1 for v in image[1:] if v == off)
                if zeros % 2 == 0 and (image[0] == off or zeros > 0):
                    return neg
                return pos
            return parity
        if self.kind == "block":
            k = self.k
            if k > grid.width or k > grid.height:
                raise InvalidSignature(f"block size {k} does not fit a {grid.width}x{grid.height} grid")
            blocks = [
                [r * grid.width + c for r in range(top, top + k) for c in range(left, left + k)]
                for top in range(grid.height - k + 1) for left in range(grid.width - k + 1)
            ]
            return lambda image: pos if any(all(image[i] == dark for i in b) for b in blocks) else neg
        lookup = dict(self.table)

        def from_table(image: Image) -> Value:
            if image not in lookup:
                raise InvalidSignature(f"label table has no entry for image {image}")
            return lookup[image]
        return from_table

    def labels(self) -> Tuple[Value, ...]:
        return tuple(self.label_range)


# ---------------------------------------------------------------------------
# Image distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImageDistribution:
    grid: GridSpec
    entries: Tuple[Tuple[Image, Fraction], ...]

    def __post_init__(self):
        seen = set()
        entries = []
        for image, weight in self.entries:
            image = self.grid.check_image(image)
            weight = Fraction(weight)
            if weight <= 0:
                raise WeightSumNotOne(f"image {image} has non-positive weight {format_rational(weight)}")
            if image in seen:
                raise InvalidContext(f"image {image} is listed twice")
            seen.add(image)
            entries.append((image, weight))
        total = sum((w for _, w in entries), Fraction(0))
        if total != 1:
            raise WeightSumNotOne(f"image weights sum to {format_rational(total)}, not 1",
                                  {"sum": format_rational(total)})
        object.__setattr__(self, "entries", tuple(entries))

    def weight(self, image: Image) -> Fraction:
        return dict(self.entries).get(tuple(image), Fraction(0))

    def to_context_distribution(self) -> ContextDistribution:
        return ContextDistribution(tuple((self.grid.context(img), w) for img, w in self.entries))


def uniform_distribution(grid: GridSpec) -> ImageDistribution:
    images = list(grid.images())
    return ImageDistribution(grid, tuple((img, Fraction(1, len(images))) for img in images))


def independent_pixel_distribution(grid: GridSpec, value_probs: Mapping[Value, Fraction]) -> ImageDistribution:
    """Every pixel drawn independently from ``value_probs``; zero-probability images are dropped."""
    probs = {v: Fraction(p) for v, p in value_probs.items()}
    for v in probs:
        if v not in grid.pixel_range:
            raise ValueOutOfRange(f"pixel value {v!r} outside {grid.pixel_range}")
    if sum(probs.values(), Fraction(0)) != 1:
        raise WeightSumNotOne("pixel value probabilities must sum to 1")
    entries = []
    for image in grid.images():
        weight = math.prod((probs.get(v, Fraction(0)) for v in image), start=Fraction(1))
        if weight > 0:
            entries.append((image, weight))
    return ImageDistribution(grid, tuple(entries))


def parity_distribution(n: int) -> ImageDistribution:
    """2n+1 binary pixels: the first is fair, the tail has an even number of zeros with probability 9/10."""
    if n < 1:
        raise ValueOutOfRange("parity distribution needs n >= 1")
    grid = GridSpec(2 * n + 1, 1)
    tails = 2 ** (2 * n - 1)  # tails of each parity
    even, odd = Fraction(9, 10) / tails, Fraction(1, 10) / tails
    entries = []
    for image in grid.images():
        zeros = sum(1 for v in image[1:] if v == 0)
        entries.append((image, Fraction(1, 2) * (even if zeros % 2 == 0 else odd)))
    return ImageDistribution(grid, tuple(entries))


# ---------------------------------------------------------------------------
# The lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LiftedClassifier(ProbabilisticModel):
    grid: GridSpec = None
    labeler: Labeler = None
    images: ImageDistribution = field(default=None, repr=False)

    def image_of(self, u: Context) -> Image:
        return self.grid.image_of(u)


def lift_classifier(grid: GridSpec, labeler: Labeler, distribution: Optional[ImageDistribution] = None) -> LiftedClassifier:
    """Build the depth-two causal model of a labeler.

    Args:
        grid: pixel layout and pixel value range
        labeler: the image -> label function
        distribution: probability on images (uniform when omitted)
    Returns:
        LiftedClassifier with K = all contexts
    """
    distribution = distribution or uniform_distribution(grid)
    if distribution.grid != grid:
        raise InvalidContext("the image distribution is for a different grid")
    label = labeler.labeling(grid)
    labels = labeler.labels()

    rows = []
    counts: Dict[Value, int] = {}
    for image in grid.images():
        value = label(image)
        if value not in labels:
            raise ValueOutOfRange(f"labeler returned {value!r} outside {labels} for image {image}")
        counts[value] = counts.get(value, 0) + 1
        rows.append((image, value))
    default = max(labels, key=lambda v: (counts.get(v, 0), -labels.index(v)))
    table = TableEquation(OUTPUT, grid.pixel_names, tuple(r for r in rows if r[1] != default), default)

    signature = Signature(
        tuple(Variable(u, grid.pixel_range) for u in grid.source_names),
        tuple(Variable(x, grid.pixel_range) for x in grid.pixel_names) + (Variable(OUTPUT, labels),),
    )
    equations = [ExpressionEquation(x, Ref(u)) for x, u in zip(grid.pixel_names, grid.source_names)]
    model = build_model(signature, equations + [table])
    logger.info(f"✅ Lifted {labeler.kind} labeler on a {grid.width}x{grid.height} grid "
                f"({len(distribution.entries)} images with positive weight)")
    return LiftedClassifier(model, distribution.to_context_distribution(), ALL, grid, labeler, distribution)


def is_depth_two(model: CausalModel) -> bool:
    return depth_two_output(model) is not None


# ---------------------------------------------------------------------------
# Restrictions, reweighting, absence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionMask:
    pixels: FrozenSet[str]
    fill_value: Value = 0

    def __post_init__(self):
        object.__setattr__(self, "pixels", frozenset(self.pixels))


def restrict_contexts(pm: ProbabilisticModel, mask: RegionMask) -> ContextSet:
    """The contexts of K in which every masked pixel shows the fill value."""
    model = pm.model
    for name in mask.pixels:
        if not model.signature.is_endogenous(name) or name == depth_two_output(model):
            raise UnknownVariable(f"{name!r} is not a pixel", {"variable": name})
        if mask.fill_value not in model.signature.range_of(name):
            raise ValueOutOfRange(f"fill value {mask.fill_value!r} outside the range of {name}")
    kept = []
    for u in pm.k.members(model):
        values = model.solve(u)
        if all(values[p] == mask.fill_value for p in mask.pixels):
            kept.append(u)
    if not kept:
        raise EmptyRestriction("no context satisfies the mask", {"pixels": sorted(mask.pixels)})
    return ContextSet(tuple(kept))


def rare_event_reweight(lifted: LiftedClassifier, condition: Formula,
                        distribution: Optional[ImageDistribution] = None) -> ImageDistribution:
    """Condition an image distribution on a formula over pixels and label (e.g. O=1 for rare positives)."""
    model = lifted.model
    distribution = distribution or lifted.images
    check_formula(model, condition)
    kept = [(img, w) for img, w in distribution.entries
            if holds_in(model, lifted.grid.context(img), condition)]
    mass = sum((w for _, w in kept), Fraction(0))
    if mass == 0:
        raise ZeroProbabilityCondition(f"no image with positive weight satisfies {condition}")
    logger.info(f"Reweighted onto {len(kept)} images satisfying {condition} (prior mass {format_rational(mass)})")
    return ImageDistribution(distribution.grid, tuple((img, w / mass) for img, w in kept))


def explain_absence(pm: ProbabilisticModel, k: ContextSet, negative_label: Value, goodness: GoodnessPair,
                    max_size: Optional[int] = None, candidate_pixels: Optional[Iterable[str]] = None,
                    mask: Optional[RegionMask] = None) -> List[Tuple[Conjunction, GoodnessPair]]:
    """Partial explanations of O = negative_label relative to K, with Pr conditioned on K.

    Candidates range over the pixels (optionally only ``candidate_pixels``), never the masked ones.
    """
    model = pm.model
    output = depth_two_output(model)
    if output is None:
        raise InvalidSignature("explanations of absence need a lifted classifier")
    if negative_label not in model.signature.range_of(output):
        raise ValueOutOfRange(f"label {negative_label!r} outside the range of {output}")
    phi = PrimitiveEvent(output, negative_label)
    distribution = restrict_distribution(pm.distribution, k)

    pixels = [n for n in model.signature.endogenous_names if n != output]
    if candidate_pixels is not None:
        wanted = set(candidate_pixels)
        unknown = sorted(wanted - set(pixels))
        if unknown:
            raise UnknownVariable(f"not pixels: {', '.join(unknown)}", {"variables": unknown})
        pixels = [p for p in pixels if p in wanted]
    if mask is not None:
        pixels = [p for p in pixels if p not in mask.pixels]

    found, skipped = find_partial_explanations(model, distribution, k, phi, goodness, HALPERN,
                                               max_size=max_size, candidate_vars=pixels)
    logger.info(f"✅ {len(found)} explanations of {phi} at goodness "
                f"({format_rational(goodness.alpha)}, {format_rational(goodness.beta)})")
    return [(cand, verdict.achieved) for cand, verdict in found]


def pixel_net(grid: GridSpec, min_tumor_size: int) -> FrozenSet[str]:
    """Lattice of pixels every min_tumor_size steps: every s x s square of the grid contains one of them."""
    if min_tumor_size < 2:
        raise ValueOutOfRange("minimum tumour size must be at least 2")
    s = min_tumor_size
    return frozenset(grid.pixel(r, c) for r in range(0, grid.height, s) for c in range(0, grid.width, s))


# ---------------------------------------------------------------------------
# Image corpus text format
# ---------------------------------------------------------------------------

def parse_image_corpus(text: str, grid: GridSpec) -> ImageDistribution:
    """One image per line: pixel values in row-major order separated by spaces, then the weight.

    Weights are exact rationals (p/q or decimal). A ':' before the weight and commas between
    pixel values are accepted; '#' starts a comment.
    """
    entries = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace(",", " ").replace(":", " ").split()
        if len(tokens) < 2:
            raise InvalidContext(f"line {number}: expected pixel values followed by a weight", {"line": number})
        *values, weight = tokens
        image = tuple(int(v) if v.lstrip("-").isdigit() else v for v in values)
        entries.append((image, parse_rational(weight)))
    return ImageDistribution(grid, tuple(entries))


def format_image_corpus(distribution: ImageDistribution) -> str:
    lines = [f"# {distribution.grid.width}x{distribution.grid.height} images"]
    for image, weight in distribution.entries:
        lines.append(f"{' '.join(str(v) for v in image)} {format_rational(weight)}")
    return "\n".join(lines) + "\n"
