from datetime import datetime, timedelta

import httpx
import pytest
from fastapi.testclient import TestClient

from welfare.server import AuditServer


# --- Helpers ---

@pytest.fixture
def client():
    return TestClient(AuditServer(budget_cap_limit=4).get_app())


# --- Server Tests ---

def test_server_rejects_negative_limit():
    with pytest.raises(ValueError, match="must be non-negative"):
        AuditServer(budget_cap_limit=-1)

def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    data = response.json()
    assert data["status"] == "healthy"
    assert data["mechanisms_count"] == 8
    assert datetime.fromisoformat(data["timestamp"]).utcoffset() == timedelta(0)

def test_list_fixtures(client):
    data = client.get("/fixtures").json()
    assert "counter2" in [f["name"] for f in data["fixtures"]]
    assert "extension-infeasibility" in data["repro_cases"]


# --- Check Endpoint Tests ---

def test_check_fixture(client):
    response = client.get("/fixtures/mei-without-anonymity/check")
    assert response.status_code == 200
    checks = response.json()["checks"]
    assert [c["passed"] for c in checks] == [True, True, True, True, False, True]

def test_check_unknown_fixture(client):
    response = client.get("/fixtures/nope/check")
    assert response.status_code == 404

def test_check_bad_parameter(client):
    response = client.get("/fixtures/counter1/check", params={"epsilon": "abc"})
    assert response.status_code == 400


# --- Run Endpoint Tests ---

def test_run_fixture(client):
    response = client.post("/run", json={"fixture": "counter1", "bids": [2, 1], "seed": 4})
    assert response.status_code == 200
    data = response.json()
    assert data["outcome"]["mechanism"] == "two-player"
    assert [len(s) for s in data["outcome"]["sets"]] == [2, 1]
    assert len(data["expected_utilities"]) == 2

def test_run_inline_instance(client):
    instance = {"model": "additive", "ground": ["x", "y"], "values": [["2", "1"], ["2", "1"]]}
    response = client.post("/run", json={"instance": instance, "bids": [1, 1], "mechanism": "dictatorship"})
    assert response.status_code == 200
    assert response.json()["outcome"]["labels"] == [["x"], ["y"]]

def test_run_needs_exactly_one_source(client):
    response = client.post("/run", json={"bids": [1, 1]})
    assert response.status_code == 400
    response = client.post("/run", json={"fixture": "counter1", "instance": {}, "bids": [1, 1]})
    assert response.status_code == 400

def test_run_bad_instance(client):
    response = client.post("/run", json={"instance": {"model": "additive"}, "bids": [1, 1]})
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "instance"

def test_run_unknown_mechanism(client):
    response = client.post("/run", json={"fixture": "counter1", "bids": [1, 1], "mechanism": "lottery"})
    assert response.status_code == 404

def test_run_bids_beyond_ground(client):
    response = client.post("/run", json={"fixture": "counter1", "bids": [3, 3]})
    assert response.status_code == 400
    assert response.json()["detail"]["bids"] == [3, 3]


# --- Audit Endpoint Tests ---

def test_audit_dictatorship_fails(client):
    response = client.post("/audit", json={"fixture": "counter1", "mechanism": "dictatorship", "budget_cap": 3})
    assert response.status_code == 200
    data = response.json()
    assert data["verdict"] == "FAIL"
    assert data["monotonicity"]["witnesses"]

def test_audit_two_player_passes(client):
    response = client.post("/audit", json={"fixture": "counter1", "budget_cap": 3, "approximation": True})
    data = response.json()
    assert data["verdict"] == "PASS"
    assert data["approximation"]["passed"] is True

def test_audit_cap_limit(client):
    response = client.post("/audit", json={"fixture": "counter1", "budget_cap": 9})
    assert response.status_code == 400

def test_audit_negative_cap_is_invalid(client):
    response = client.post("/audit", json={"fixture": "counter1", "budget_cap": -1})
    assert response.status_code == 422


# --- Repro Endpoint Tests ---

def test_repro(client):
    response = client.get("/repro/disjoint-anonymity", params={"N": "20"})
    assert response.status_code == 200
    data = response.json()
    assert data["holds"] is True
    assert data["values"]["optimum"] == "21/1"

def test_repro_unknown_case(client):
    assert client.get("/repro/counter9").status_code == 404

def test_repro_bad_epsilon(client):
    assert client.get("/repro/uniform-counter3", params={"epsilon": "1/2"}).status_code == 400


# --- Async Client Tests ---

async def test_health_over_async_transport():
    app = AuditServer().get_app()
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://test") as async_client:
        response = await async_client.get("/health")
    assert response.status_code == 200
    assert response.json()["fixtures_count"] == 9
