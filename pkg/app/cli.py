# app/cli.py
"""
Command-line front end: every query as a subcommand.

Exit codes: 0 when the verdict is true (or a search found something), 1 when it is
false (or nothing was found), 2 on any error. ``--json`` prints QueryResult JSON on
stdout; otherwise a table is printed.
"""
import json
import logging
from typing import Any, Dict, List, NoReturn, Optional

import pandas as pd
import typer

from app import config
from app.dsl.parser import ModelBundle, parse_formula, parse_model
from app.dsl.serializer import serialize_model
from app.engine.errors import CausalEngineError, DslError
from app.engine.explanation import ALL
from app.services import corpus_loader
from app.services.classifier_bridge import (
    GridSpec,
    ImageDistribution,
    Labeler,
    format_image_corpus,
    independent_pixel_distribution,
    lift_classifier,
    parity_distribution,
    pixel_net,
    rare_event_reweight,
    uniform_distribution,
)
from app.services.query_runner import (
    QueryResult,
    error_json,
    results_json,
    resolve_variant,
    run_absence,
    run_check_cause,
    run_explain,
    run_find_causes,
    run_verify,
)
from app.utils.rationals import parse_probability

logger = logging.getLogger(__name__)

app = typer.Typer(help="Exact actual causes, sufficient causes and explanations in finite causal models.",
                  no_args_is_help=True, add_completion=False)
classifier_app = typer.Typer(help="Depth-two lifts of pixel classifiers.", no_args_is_help=True)
app.add_typer(classifier_app, name="classifier")

EXIT_TRUE, EXIT_FALSE, EXIT_ERROR = 0, 1, 2

JSON_OPTION = typer.Option(False, "--json", help="Print QueryResult JSON instead of a table.")


@app.callback()
def main(log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides CEX_LOG_LEVEL.")):
    config.configure_logging(log_level.upper() if log_level else None)


# ---------------------------------------------------------------------
# Output and errors
# ---------------------------------------------------------------------

def _fail(error: CausalEngineError, source: Optional[str] = None, origin: str = "", as_json: bool = False) -> NoReturn:
    if isinstance(error, DslError):
        typer.echo(f"error: {origin}{error.location()}: {error.message}", err=True)
        if source is not None and error.span is not None:
            typer.echo(error.span.excerpt(source), err=True)
    else:
        typer.echo(f"error: {error.message}", err=True)
    if as_json:
        typer.echo(json.dumps(error_json(error), indent=2))
    raise typer.Exit(EXIT_ERROR)


def _load(reference: str, as_json: bool = False) -> ModelBundle:
    try:
        path, text = corpus_loader.read_model(reference)
    except CausalEngineError as e:
        _fail(e, as_json=as_json)
    try:
        return parse_model(text)
    except CausalEngineError as e:
        _fail(e, text, f"{path}:", as_json)


def _clauses_text(clauses: Dict[str, bool]) -> str:
    return " ".join(f"{name}={'T' if value else 'F'}" for name, value in clauses.items())


def _table(results: List[QueryResult]) -> str:
    rows = []
    for r in results:
        row: Dict[str, Any] = {"query": r.query, "verdict": r.verdict, "clauses": _clauses_text(r.clauses)}
        if r.achieved_goodness is not None:
            row["alpha"] = r.achieved_goodness["alpha"]
            row["beta"] = r.achieved_goodness["beta"]
        rows.append(row)
    return pd.DataFrame(rows).to_string(index=False)


def _emit(results: List[QueryResult], as_json: bool, single: bool = False, show_witnesses: bool = False) -> None:
    if as_json:
        payload = results_json(results)
        typer.echo(json.dumps(payload[0] if single else payload, indent=2, ensure_ascii=False))
        return
    if not results:
        typer.echo("(none)")
        return
    typer.echo(_table(results))
    if show_witnesses:
        for r in results:
            typer.echo(json.dumps(r.witnesses, indent=2, ensure_ascii=False))


def _split(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [p.strip() for p in text.split(",") if p.strip()]


# ---------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------

@app.command("check-cause")
def check_cause(
    model: str = typer.Argument(..., help="Model file or corpus name."),
    context: str = typer.Option(..., "--context", help="Context name, or inline 'U1=1, U2=0'."),
    cause: str = typer.Option(..., "--cause", help="Conjunction such as 'ML1=1 & ML2=1'."),
    phi: str = typer.Option(..., "--phi", help="Formula, e.g. 'FB=1'."),
    mode: str = typer.Option("actual", "--mode", help="actual | butfor | sufficient"),
    witness_values: Optional[str] = typer.Option(None, "--witness-values", help="actual-values | unconstrained"),
    witness_scope: Optional[str] = typer.Option(None, "--witness-scope", help="any-set | empty-set"),
    as_json: bool = JSON_OPTION,
):
    """Is CAUSE an actual / but-for / sufficient cause of PHI in CONTEXT?"""
    bundle = _load(model, as_json)
    try:
        result = run_check_cause(bundle, context, cause, phi, mode, witness_values, witness_scope)
    except CausalEngineError as e:
        _fail(e, as_json=as_json)
    _emit([result], as_json, single=True, show_witnesses=True)
    raise typer.Exit(EXIT_TRUE if result.verdict else EXIT_FALSE)


@app.command("causes")
def causes(
    model: str = typer.Argument(...),
    context: str = typer.Option(..., "--context"),
    phi: str = typer.Option(..., "--phi"),
    include_outcome: bool = typer.Option(False, "--include-outcome", help="Also consider variables of PHI."),
    as_json: bool = JSON_OPTION,
):
    """Every actual cause of PHI in CONTEXT."""
    bundle = _load(model, as_json)
    try:
        result = run_find_causes(bundle, context, phi, include_outcome)
    except CausalEngineError as e:
        _fail(e, as_json=as_json)
    if as_json:
        _emit([result], as_json, single=True)
    else:
        for item in result.witnesses:
            typer.echo(item["cause"])
    raise typer.Exit(EXIT_TRUE if result.verdict else EXIT_FALSE)


@app.command("explain")
def explain(
    model: str = typer.Argument(...),
    phi: str = typer.Option(..., "--phi"),
    k: Optional[str] = typer.Option(None, "--k", help="'all', a K name from the file, or '{u1, u2}'. Default: the file's K."),
    definition: str = typer.Option("halpern", "--definition", help="halpern | mmts"),
    alpha: Optional[str] = typer.Option(None, "--alpha", help="Partial mode: minimum probability, within K, that the candidate explains PHI (p/q or decimal, default 0)."),
    beta: Optional[str] = typer.Option(None, "--beta", help="Partial mode: minimum probability that setting the candidate brings about PHI (p/q or decimal, default 0)."),
    max_size: Optional[int] = typer.Option(None, "--max-size", min=1),
    candidate: Optional[str] = typer.Option(None, "--candidate", help="Check this conjunction instead of searching."),
    include_outcome: bool = typer.Option(False, "--include-outcome"),
    necessity: Optional[str] = typer.Option(None, "--necessity", help="conjunct-extendable | subset-is-cause"),
    witness_values: Optional[str] = typer.Option(None, "--witness-values", help="actual-values | unconstrained"),
    context_scope: Optional[str] = typer.Option(None, "--context-scope", help="given-K | all-contexts"),
    witness_scope: Optional[str] = typer.Option(None, "--witness-scope", help="any-set | empty-set"),
    as_json: bool = JSON_OPTION,
):
    """Explanations of PHI relative to K (partial explanations when --alpha/--beta are given)."""
    bundle = _load(model, as_json)
    try:
        variant = resolve_variant(definition, necessity, witness_values, context_scope, witness_scope)
        results = run_explain(bundle, phi, k, variant, alpha, beta, max_size, candidate, include_outcome)
    except CausalEngineError as e:
        _fail(e, as_json=as_json)
    if candidate is not None:
        _emit(results, as_json, single=True, show_witnesses=True)
        raise typer.Exit(EXIT_TRUE if results[0].verdict else EXIT_FALSE)
    _emit(results, as_json)
    raise typer.Exit(EXIT_TRUE if any(r.verdict for r in results) else EXIT_FALSE)


@app.command("verify")
def verify(
    theorem: int = typer.Argument(..., help="1 (SC2 from SC1, SC3, SC4) or 2 (depth-two partial explanations)."),
    model: Optional[str] = typer.Option(None, "--model", help="Check exhaustively on this model instead of random ones."),
    trials: int = typer.Option(1000, "--trials", min=1),
    seed: int = typer.Option(0, "--seed"),
    max_size: Optional[int] = typer.Option(None, "--max-size", min=1, help="Theorem 2 on a model: largest candidate."),
    as_json: bool = JSON_OPTION,
):
    """Run the sufficient-condition checks and report any counterexample."""
    bundle = _load(model, as_json) if model else None
    try:
        result = run_verify(theorem, bundle, trials, seed, max_size)
    except CausalEngineError as e:
        _fail(e, as_json=as_json)
    if as_json:
        _emit([result], as_json, single=True)
    else:
        summary = result.witnesses
        typer.echo(f"{result.query}: {summary['held']}/{summary['trials']} hold, "
                   f"{summary['applicable']} with every side condition, {summary['skipped']} skipped")
        for counterexample in summary["counterexamples"]:
            typer.echo(json.dumps(counterexample, ensure_ascii=False))
    raise typer.Exit(EXIT_TRUE if result.verdict else EXIT_FALSE)


@app.command("serialize")
def serialize(model: str = typer.Argument(...)):
    """Print the canonical form of a model file."""
    bundle = _load(model)
    typer.echo(serialize_model(bundle), nl=False)


@app.command("models")
def models():
    """List the models shipped in the corpus."""
    for name in corpus_loader.list_models():
        typer.echo(name)


# ---------------------------------------------------------------------
# Classifier lifts
# ---------------------------------------------------------------------

def _pixel_probs(text: str) -> Dict[Any, Any]:
    probs = {}
    for item in _split(text) or []:
        value, _, p = item.partition(":")
        probs[int(value) if value.strip().lstrip("-").isdigit() else value.strip()] = parse_probability(p)
    return probs


def _image_distribution(grid: GridSpec, corpus: Optional[str], parity: Optional[int],
                        pixel_probs: Optional[str]) -> ImageDistribution:
    if corpus:
        return corpus_loader.load_image_corpus(corpus, grid)
    if parity:
        return parity_distribution(parity)
    if pixel_probs:
        return independent_pixel_distribution(grid, _pixel_probs(pixel_probs))
    return uniform_distribution(grid)


def _grid(grid: Optional[str], parity: Optional[int]) -> GridSpec:
    if grid:
        return GridSpec.parse(grid)
    if parity:
        return GridSpec(2 * parity + 1, 1)
    raise typer.BadParameter("give --grid (or --parity)")


@classifier_app.command("lift")
def classifier_lift(
    grid: Optional[str] = typer.Option(None, "--grid", help="WxH, e.g. 3x1."),
    labeler: str = typer.Option(..., "--labeler", help="any-on | parity-first-pixel | threshold:K | block:K"),
    uniform: bool = typer.Option(False, "--uniform", help="Uniform distribution over images (the default)."),
    corpus: Optional[str] = typer.Option(None, "--corpus", help="Image corpus file with weights."),
    parity: Optional[int] = typer.Option(None, "--parity", help="Parity distribution on 2n+1 pixels."),
    pixel_probs: Optional[str] = typer.Option(None, "--pixel-probs", help="Independent pixels, e.g. '0:1/4,1:3/4'."),
    name: str = typer.Option("lifted", "--name"),
    output: Optional[str] = typer.Option(None, "--output", "-o", help="Write the .cm file here instead of stdout."),
):
    """Build the depth-two causal model of a labeler and print (or write) it as a model file."""
    try:
        spec = _grid(grid, parity)
        distribution = _image_distribution(spec, corpus, parity, pixel_probs)
        lifted = lift_classifier(spec, Labeler.parse(labeler), distribution)
    except CausalEngineError as e:
        _fail(e)
    if uniform and (corpus or parity or pixel_probs):
        logger.warning("⚠️ --uniform ignored: another distribution was given")
    text = serialize_model(ModelBundle(name, lifted.model, {}, lifted.distribution, ALL))
    if output:
        corpus_loader.write_text(output, text)
    else:
        typer.echo(text, nl=False)


@classifier_app.command("absence")
def classifier_absence(
    model: str = typer.Option(..., "--model"),
    label: str = typer.Option(..., "--label", help="The negative label to explain, e.g. 0."),
    alpha: str = typer.Option(..., "--alpha"),
    beta: str = typer.Option(..., "--beta"),
    k: Optional[str] = typer.Option(None, "--k"),
    max_size: Optional[int] = typer.Option(None, "--max-size", min=1),
    pixels: Optional[str] = typer.Option(None, "--pixels", help="Only these candidate pixels, e.g. 'X1,X5'."),
    net_grid: Optional[str] = typer.Option(None, "--net-grid", help="Candidates from a pixel net on this grid."),
    net_size: int = typer.Option(2, "--net-size", min=2),
    mask: Optional[str] = typer.Option(None, "--mask", help="Pixels excluded from the candidates."),
    fill_value: str = typer.Option("0", "--fill-value"),
    as_json: bool = JSON_OPTION,
):
    """Partial explanations of a negative label (e.g. 'no tumour')."""
    bundle = _load(model, as_json)
    try:
        candidate_pixels = _split(pixels)
        if net_grid:
            net = pixel_net(GridSpec.parse(net_grid), net_size)
            candidate_pixels = sorted(net if candidate_pixels is None else net & set(candidate_pixels))
        results = run_absence(bundle, label, alpha, beta, k, max_size, candidate_pixels, _split(mask), fill_value)
    except CausalEngineError as e:
        _fail(e, as_json=as_json)
    _emit(results, as_json)
    raise typer.Exit(EXIT_TRUE if results else EXIT_FALSE)


@classifier_app.command("reweight")
def classifier_reweight(
    grid: Optional[str] = typer.Option(None, "--grid"),
    labeler: str = typer.Option(..., "--labeler"),
    condition: str = typer.Option(..., "--condition", help="Formula over pixels and O, e.g. 'O=1'."),
    corpus: Optional[str] = typer.Option(None, "--corpus"),
    parity: Optional[int] = typer.Option(None, "--parity"),
    pixel_probs: Optional[str] = typer.Option(None, "--pixel-probs"),
    output: Optional[str] = typer.Option(None, "--output", "-o"),
):
    """Condition an image distribution on a formula and write the reweighted corpus."""
    try:
        spec = _grid(grid, parity)
        lifted = lift_classifier(spec, Labeler.parse(labeler), _image_distribution(spec, corpus, parity, pixel_probs))
        reweighted = rare_event_reweight(lifted, parse_formula(condition, lifted.model))
    except CausalEngineError as e:
        _fail(e)
    text = format_image_corpus(reweighted)
    if output:
        corpus_loader.write_text(output, text)
    else:
        typer.echo(text, nl=False)


@classifier_app.command("net")
def classifier_net(
    grid: str = typer.Option(..., "--grid"),
    min_size: int = typer.Option(..., "--min-size"),
    as_json: bool = JSON_OPTION,
):
    """Pixels such that every min-size square of the grid contains one of them."""
    try:
        spec = GridSpec.parse(grid)
        net = sorted(pixel_net(spec, min_size), key=spec.pixel_names.index)
    except CausalEngineError as e:
        _fail(e, as_json=as_json)
    if as_json:
        typer.echo(json.dumps({"grid": grid, "min_size": min_size, "pixels": net}))
    else:
        typer.echo(" ".join(net))


if __name__ == "__main__":
    app()
