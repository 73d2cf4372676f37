"""
Тесты HTTP API DelayLab
"""
import math

import pytest
from fastapi.testclient import TestClient

from main import app

client = TestClient(app)


def test_health():
    assert client.get("/health").json() == {"status": "healthy"}
    assert client.get("/").json()["status"] == "ok"


def test_bounds():
    response = client.post("/bounds", json={"dw": 1e15, "n": 1e7, "epsilon": 0.2})
    assert response.status_code == 200
    payload = response.json()
    assert payload["spectrometer_bound"] == pytest.approx(math.exp(0.02) * 7.90569e-20, rel=1e-5)
    assert payload["bias_factor"] == pytest.approx(1.02)


def test_bounds_domain_error():
    response = client.post("/bounds", json={"dw": 1e15, "n": 100, "phi": 0.0})
    assert response.status_code == 422
    assert response.json()["error"] == "UndefinedBound"


def test_bounds_validation():
    assert client.post("/bounds", json={"dw": -1.0, "n": 100}).status_code == 422


def test_budget():
    assert client.post("/budget", json={"dw": 1e15, "tau": 1e-18}).json() == {"photon_budget": 10_000_000}
    response = client.post("/budget", json={"dw": 1e15, "tau": 0.0})
    assert response.status_code == 422
    assert response.json()["error"] == "UndefinedBudget"


def test_curves():
    payload = client.post("/curves", json={"epsilon": 0.02, "c": 0.25e-18, "omega_ref": 2e15,
                                           "tau": [1e-18, 1e-16]}).json()
    assert payload["crossover"] == pytest.approx(2.5e-17)
    assert payload["joint_below_wva"] == [True, False]


def test_fisher():
    response = client.post("/fisher", json={"center": 2e15, "dw": 1e14, "mode": "split", "n": 1e6})
    assert response.status_code == 200
    payload = response.json()
    assert payload["carrier"]["tau_tau"] / 1e28 == pytest.approx(2 / math.pi, rel=1e-6)
    assert payload["fisher"]["tau_phi"] == pytest.approx(payload["carrier"]["tau_phi"] - 2e15, rel=1e-6)
    assert payload["cramer_rao"]["delta_tau"] > 0


def test_fisher_singular():
    response = client.post("/fisher", json={"center": 2e15, "dw": 1e14, "phi": 0.0})
    assert response.status_code == 422
    assert response.json()["error"] == "SingularModel"
