import time

import pytest
from fastapi.testclient import TestClient

from app.api import endpoints
from app.main import app
from app.services import corpus_loader

client = TestClient(app)


@pytest.fixture(scope="module")
def suzy_text() -> str:
    return corpus_loader.read_model("suzy")[1]


@pytest.fixture(scope="module")
def parity_text() -> str:
    return corpus_loader.read_model("parity5")[1]


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_capabilities_report_limits_and_corpus(monkeypatch):
    monkeypatch.setenv("CEX_MAX_CONTEXTS", "1024")
    body = client.get("/api/health/capabilities").json()
    assert body["limits"]["max_contexts"] == 1024
    assert body["corpus"]["present"] is True
    assert "voting" in body["corpus"]["models"]


def test_check_cause(suzy_text):
    response = client.post("/api/check-cause", json={
        "model": suzy_text, "context": "both_throw", "cause": "ST=1", "phi": "BS=1",
    })
    assert response.status_code == 200
    body = response.json()
    assert body["verdict"] is True
    assert body["witnesses"]["ac2"] == {"alt_setting": {"ST": 0}, "fixed_set": {"BH": 0}}


def test_explain_partial(parity_text):
    response = client.post("/api/explain", json={
        "model": parity_text, "phi": "O=0", "alpha": "1/8", "beta": "9/10", "candidate": "X1=0",
    })
    assert response.status_code == 200
    [body] = response.json()
    assert body["achieved_goodness"] == {"alpha": "1/8", "beta": "9/10"}


def test_explain_search_with_mmts(suzy_text):
    response = client.post("/api/explain", json={"model": suzy_text, "phi": "BS=1", "definition": "mmts"})
    assert response.status_code == 200
    assert all(r["verdict"] for r in response.json())


def test_engine_errors_are_422_with_a_code(suzy_text):
    response = client.post("/api/check-cause", json={
        "model": suzy_text, "context": "both_throw", "cause": "NOPE=1", "phi": "BS=1",
    })
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "unknown_variable"


def test_dsl_errors_carry_the_location():
    broken = "model m {\n  exo U : {0, 1};\n  endo A : {0, 1};\n  eq A := Q;\n}\n"
    response = client.post("/api/check-cause", json={"model": broken, "context": "U=1", "cause": "A=1", "phi": "A=1"})
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert detail["code"] == "unknown_identifier"
    assert (detail["details"]["line"], detail["details"]["column"]) == (4, 11)


def test_request_validation(suzy_text):
    response = client.post("/api/explain", json={"model": suzy_text, "phi": "BS=1", "max_size": 0})
    assert response.status_code == 422


def test_slow_queries_time_out(monkeypatch, suzy_text):
    monkeypatch.setenv("CEX_QUERY_TIMEOUT", "0.05")
    monkeypatch.setattr(endpoints, "_check_cause", lambda req: time.sleep(0.5))
    response = client.post("/api/check-cause", json={
        "model": suzy_text, "context": "both_throw", "cause": "ST=1", "phi": "BS=1",
    })
    assert response.status_code == 504


def test_unexpected_failures_are_500(monkeypatch, suzy_text):
    def boom(req):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(endpoints, "_check_cause", boom)
    response = client.post("/api/check-cause", json={
        "model": suzy_text, "context": "both_throw", "cause": "ST=1", "phi": "BS=1",
    })
    assert response.status_code == 500
    assert "disk on fire" in response.json()["detail"]
