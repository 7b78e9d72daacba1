"""
CLI tests: exit codes, table output and golden JSON.

Golden files under tests/golden/ hold the JSON a command prints, minus timing_ms.
Regenerate one by running the command with --json and dropping that field.
"""
import json
import os

import pytest
import typer
from typer.testing import CliRunner

from app.cli import app
from app.dsl.serializer import serialize_model
from app.services import corpus_loader

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")

runner = CliRunner()


def _normalize(payload):
    if isinstance(payload, list):
        return [_normalize(item) for item in payload]
    if isinstance(payload, dict):
        return {k: _normalize(v) for k, v in payload.items() if k != "timing_ms"}
    return payload


def _golden(name: str):
    with open(os.path.join(GOLDEN_DIR, name), encoding="utf-8") as f:
        return json.load(f)


def invoke(*args: str):
    return runner.invoke(app, list(args))


def json_of(result):
    return json.loads(result.stdout)


# ---------------------------------------------------------------------------
# Golden JSON
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("golden, args", [
    ("check_cause_suzy.json",
     ["check-cause", "suzy", "--context", "both_throw", "--cause", "ST=1", "--phi", "BS=1", "--json"]),
    ("check_cause_arsonists_joint.json",
     ["check-cause", "arsonists", "--context", "u1", "--cause", "ML1=1 & ML2=1", "--phi", "FB=1", "--json"]),
    ("causes_arsonists_u1.json",
     ["causes", "arsonists", "--context", "u1", "--phi", "FB=1", "--json"]),
    ("classifier_net_4x4.json",
     ["classifier", "net", "--grid", "4x4", "--min-size", "2", "--json"]),
])
def test_golden_output(golden, args):
    result = invoke(*args)
    assert result.exit_code == 0, result.output
    assert _normalize(json_of(result)) == _golden(golden)


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------

def test_false_verdicts_exit_with_one():
    billy = invoke("check-cause", "suzy", "--context", "both-throw", "--cause", "BT=1", "--phi", "BS=1")
    assert billy.exit_code == 1
    but_for = invoke("check-cause", "suzy", "--context", "both_throw", "--cause", "ST=1", "--phi", "BS=1",
                     "--mode", "butfor", "--json")
    assert but_for.exit_code == 1
    assert json_of(but_for)["witnesses"]["failed_clause"] == "AC2"


def test_sufficient_cause_mode():
    result = invoke("check-cause", "arsonists", "--context", "u1", "--cause", "ML1=1 & ML2=1", "--phi", "FB=1",
                    "--mode", "sufficient", "--json")
    assert result.exit_code == 0
    payload = json_of(result)
    assert payload["clauses"] == {"SC1": True, "SC2": True, "SC3": True, "SC4": True}
    assert payload["witnesses"]["sc2"]["conjunct"] in ("ML1=1", "ML2=1")


def test_unknown_variable_exits_with_two():
    result = invoke("check-cause", "suzy", "--context", "both_throw", "--cause", "NOPE=1", "--phi", "BS=1")
    assert result.exit_code == 2
    assert "error:" in result.output


def test_missing_model_exits_with_two():
    result = invoke("causes", "no_such_model", "--context", "u1", "--phi", "FB=1")
    assert result.exit_code == 2
    assert "no_such_model" in result.output


def test_dsl_errors_report_line_and_column(tmp_path):
    path = tmp_path / "broken.cm"
    path.write_text("model m {\n  exo U : {0, 1};\n  endo A : {0, 1};\n  eq A := Q;\n}\n", encoding="utf-8")
    result = invoke("causes", str(path), "--context", "U=1", "--phi", "A=1")
    assert result.exit_code == 2
    assert f"{path}:4:11" in result.output
    assert "unknown identifier 'Q'" in result.output


# ---------------------------------------------------------------------------
# Explanations
# ---------------------------------------------------------------------------

def test_explain_prints_a_table():
    result = invoke("explain", "voting", "--phi", "WIN=1")
    assert result.exit_code == 0
    for cand in ("A=1", "B=1", "C=1"):
        assert f"explanation: {cand} for WIN=1" in result.stdout


def test_mmts_finds_the_conjunction():
    result = invoke("explain", "voting", "--phi", "WIN=1", "--definition", "mmts", "--json")
    assert result.exit_code == 0
    assert [r["query"] for r in json_of(result)] == ["explanation: A=1 & B=1 & C=1 for WIN=1"]

    single = invoke("explain", "voting", "--phi", "WIN=1", "--definition", "mmts", "--candidate", "A=1", "--json")
    assert single.exit_code == 1
    assert json_of(single)["clauses"]["EX1-necessity"] is False


def test_partial_explanation_reports_exact_goodness():
    result = invoke("explain", "parity5", "--phi", "O=0", "--alpha", "1/8", "--beta", "0.9",
                    "--candidate", "X1=0", "--json")
    assert result.exit_code == 0
    payload = json_of(result)
    assert payload["achieved_goodness"] == {"alpha": "1/8", "beta": "9/10"}
    assert payload["clauses"] == {"EX1'": True, "EX2'": True, "EX3'": True}


def test_threshold_search_reports_near_misses():
    result = invoke("explain", "parity5", "--phi", "O=0", "--alpha", "1/4", "--json")
    assert result.exit_code == 0, result.output
    keys = ("query", "verdict", "clauses", "achieved_goodness")
    projected = [{**{k: r[k] for k in keys}, "rejection": r["witnesses"]["rejection"]} for r in json_of(result)]
    assert projected == _golden("explain_parity_alpha_quarter.json")


def test_explain_help_describes_the_thresholds():
    command = typer.main.get_command(app).commands["explain"]
    helps = {p.name: p.help for p in command.params}
    assert "setting the candidate brings about PHI" in helps["beta"]
    assert "EX3'" not in helps["beta"]
    assert "default 0" in helps["alpha"]


def test_bad_probability_literal():
    result = invoke("explain", "parity5", "--phi", "O=0", "--alpha", "1e-1", "--beta", "0.9")
    assert result.exit_code == 2


# ---------------------------------------------------------------------------
# Corpus and verification
# ---------------------------------------------------------------------------

def test_serialize_matches_the_library():
    result = invoke("serialize", "voting")
    assert result.exit_code == 0
    assert result.stdout == serialize_model(corpus_loader.load_model("voting"))


def test_models_lists_the_corpus():
    result = invoke("models")
    assert result.exit_code == 0
    assert {"voting", "suzy", "parity5"} <= set(result.stdout.split())


def test_verify_on_a_model():
    result = invoke("verify", "1", "--model", "voting", "--json")
    assert result.exit_code == 0
    payload = json_of(result)
    assert payload["verdict"] is True
    assert payload["witnesses"]["counterexamples"] == []


def test_verify_rejects_unknown_results():
    assert invoke("verify", "3", "--trials", "1").exit_code == 2


# ---------------------------------------------------------------------------
# Classifier commands
# ---------------------------------------------------------------------------

def test_lift_then_explain(tmp_path):
    out = tmp_path / "any_on.cm"
    lift = invoke("classifier", "lift", "--grid", "3x1", "--labeler", "any-on", "--name", "any_on", "-o", str(out))
    assert lift.exit_code == 0
    assert out.read_text(encoding="utf-8").startswith("model any_on {")

    result = invoke("explain", str(out), "--phi", "O=1", "--json")
    assert result.exit_code == 0
    assert [r["query"] for r in json_of(result)] == [
        "explanation: X1=1 for O=1", "explanation: X2=1 for O=1", "explanation: X3=1 for O=1",
    ]


def test_absence_of_a_tumour():
    result = invoke("classifier", "absence", "--model", "tumor9", "--label", "0", "--alpha", "9/10",
                    "--beta", "9/10", "--k", "suspicious", "--max-size", "2", "--json")
    assert result.exit_code == 0
    payload = json_of(result)
    assert len(payload) == 10
    assert payload[0]["witnesses"] == {"explanation": "X5=0"}
    assert all(r["achieved_goodness"] == {"alpha": "1/1", "beta": "1/1"} for r in payload)


def test_absence_restricted_to_a_net():
    result = invoke("classifier", "absence", "--model", "tumor9", "--label", "0", "--alpha", "9/10",
                    "--beta", "9/10", "--k", "suspicious", "--max-size", "1", "--net-grid", "3x3", "--json")
    # the 3x3 net is {X1, X3, X7, X9}: none of them explains the absence on its own
    assert result.exit_code == 1
    assert json_of(result) == []


def test_reweight_onto_rare_positives():
    result = invoke("classifier", "reweight", "--parity", "2", "--labeler", "parity-first-pixel",
                    "--condition", "O=1")
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0] == "# 5x1 images"
    assert "1 1 1 1 1 9/25" in lines
