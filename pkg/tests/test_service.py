"""HTTP layer: request validation, response shapes, and domain error mapping."""

import math

import pytest
from fastapi.testclient import TestClient

from collapse_lab import __version__
from collapse_lab.service import app, create_app

MODEL = {"k": 3, "Q": [0.2, 0.5, 0.3], "features": [[1.0, 2.0, 3.0]], "alpha": [2.0]}
PAIR_MODEL = {"k": 2, "Q": [0.5, 0.5], "features": [[1.0, 2.0]], "alpha": [1.5]}


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"] == __version__


def test_create_app_is_idempotent():
    assert create_app().title == app.title == "collapse-lab"


def test_project_endpoint(client):
    resp = client.post("/project", json={"model": MODEL})
    assert resp.status_code == 200
    body = resp.json()
    assert body["p_star"][0] == pytest.approx(0.24744871391589052, abs=1e-12)
    assert body["p_star"][1] == pytest.approx(0.5051025721682191, abs=1e-12)
    assert body["lambda_star"][0] == pytest.approx(-0.2027325540540822, abs=1e-12)
    assert body["dual_value"] == pytest.approx(0.010153423432867847, abs=1e-12)
    assert body["kkt_residual"] <= 1e-10
    assert body["iterations"] >= 1


def test_curvature_endpoint(client):
    resp = client.post("/curvature", json={"model": MODEL, "plan_m": 1, "plan_epsilon": 0.1})
    assert resp.status_code == 200
    body = resp.json()
    assert body["tangent_dim"] == 1
    assert not body["degenerate"]
    assert body["lambda_min"] == pytest.approx(2.666944415515286, abs=1e-12)
    assert body["spectrum"] == [body["lambda_min"]]
    assert body["compression_low"] == pytest.approx(1.979795897113271, abs=1e-12)
    assert body["compression_high"] == pytest.approx(4.0412414523193165, abs=1e-12)
    assert body["plan_n"] == 87


def test_curvature_degenerate_uses_null(client):
    resp = client.post(
        "/curvature",
        json={"model": {"k": 2, "Q": [0.4, 0.6], "features": [[1.0, 2.0]], "alpha": [1.5]}},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["degenerate"]
    assert body["lambda_min"] is None
    assert body["lower_bound_traceinv"] is None
    assert body["plan_n"] is None
    assert body["spectrum"] == []
    assert body["det_H"] == 1.0


def test_collapse_endpoint(client):
    resp = client.post("/collapse", json={"model": MODEL, "n": 40, "m": 1})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n"] == 40 and body["m"] == 1
    assert body["tau"] == pytest.approx(0.0375, abs=1e-15)
    assert body["tv_exact"] == pytest.approx(0.0061794618401598556, abs=1e-12)
    assert body["mass_out"] == pytest.approx(0.00845986653274068, abs=1e-12)
    assert body["rho_ratio"] == pytest.approx(0.13855488435179414, abs=1e-12)
    # default constants are C_geo = C_geo_prime = 1
    lam = body["lambda_min"]
    expected = math.sqrt(math.log(40) / (40 * lam)) + 1.0 / (40 * 0.24744871391589052)
    assert body["bound"] == pytest.approx(expected, rel=1e-9)


def test_collapse_endpoint_custom_constants(client):
    base = client.post("/collapse", json={"model": MODEL, "n": 40, "m": 1}).json()
    resp = client.post(
        "/collapse", json={"model": MODEL, "n": 40, "m": 1, "C_geo": 2.0, "C_geo_prime": 0.0}
    )
    body = resp.json()
    lam = body["lambda_min"]
    assert body["bound"] == pytest.approx(2.0 * math.sqrt(math.log(40) / (40 * lam)), rel=1e-9)
    assert body["bound"] != pytest.approx(base["bound"], rel=1e-3)


def test_betel_endpoint(client):
    payload = {
        "model": {"k": 2, "Q": [0.5, 0.5], "features": [[1.0, 2.0]], "alpha": []},
        "theta_grid": [1.4, 1.6],
        "data": [1] * 4 + [2] * 6,
    }
    resp = client.post("/betel", json=payload)
    assert resp.status_code == 200
    body = resp.json()
    assert body["theta_grid"] == [[1.4], [1.6]]
    assert body["posterior"][0] == pytest.approx(4.0 / 13.0, abs=1e-12)
    assert body["posterior"][1] == pytest.approx(9.0 / 13.0, abs=1e-12)
    assert body["map_index"] == 1
    assert body["n"] == 10
    assert body["variant"] == "canonical"


def test_betel_endpoint_zero_prior_entry_serializes(client):
    payload = {
        "model": {"k": 2, "Q": [0.5, 0.5], "features": [[1.0, 2.0]], "alpha": []},
        "theta_grid": [1.4, 1.6],
        "data": [1, 2],
        "prior": [0.0, 1.0],
    }
    resp = client.post("/betel", json=payload)
    assert resp.status_code == 200
    body = resp.json()
    # log posterior of the excluded point is -inf, carried as null
    assert body["log_posterior"][0] is None
    assert body["posterior"][0] == 0.0


def test_gmm_endpoint(client):
    uniform = {"k": 3, "Q": [1 / 3, 1 / 3, 1 / 3], "features": [[1.0, 2.0, 3.0]], "alpha": [2.0]}
    resp = client.post("/gmm", json={"model": uniform, "data": [1, 2, 2, 3, 2, 1, 3, 2, 2, 2]})
    assert resp.status_code == 200
    body = resp.json()
    assert body["W_opt"] == [[pytest.approx(1.5, abs=1e-12)]]
    assert body["pushforward"] == [[pytest.approx(2.0 / 3.0, abs=1e-12)]]
    assert body["objective"] == pytest.approx(0.0, abs=1e-12)
    assert body["tangent_kind"] == "simplex_tangent"

    gapped = client.post("/gmm", json={"model": uniform, "data": [1, 2, 2]}).json()
    assert gapped["objective"] == pytest.approx(0.25, abs=1e-12)


def test_gee_endpoint(client):
    payload = {
        "clusters": [
            {"D": [[1.0]], "W": [[2.0]], "Sigma": [[0.5]]},
            {"D": [[1.0]], "W": [[3.0]], "Sigma": [[0.4444444444444444]]},
        ],
        "n": 50,
    }
    resp = client.post("/gee", json=payload)
    assert resp.status_code == 200
    body = resp.json()
    assert body["J"] == [[2.5]]
    assert body["K"][0][0] == pytest.approx(3.0, abs=1e-12)
    assert body["sandwich"][0][0] == pytest.approx(0.48, abs=1e-12)
    assert body["rate_proxy"] == pytest.approx(0.17690727526991412, abs=1e-15)

    no_n = client.post("/gee", json={"clusters": payload["clusters"]}).json()
    assert no_n["rate_proxy"] is None


def test_sweep_endpoint(client):
    resp = client.post("/sweep", json={"model": MODEL, "n_grid": [20, 30], "m_grid": [1]})
    assert resp.status_code == 200
    body = resp.json()
    assert body["exit_code"] == 0
    assert body["skipped"] == []
    assert body["csv"].startswith("# schema_version=1\n")
    assert body["summary"]["completed"] == 2
    assert body["summary"]["rate_fit"] is None


def test_sweep_endpoint_reports_skips(client):
    resp = client.post("/sweep", json={"model": MODEL, "n_grid": [25], "m_grid": [1, 20]})
    assert resp.status_code == 200
    body = resp.json()
    assert body["exit_code"] == 2
    assert len(body["skipped"]) == 1
    assert body["skipped"][0]["m"] == 20


def test_domain_errors_map_to_422(client):
    resp = client.post("/project", json={"model": {**MODEL, "alpha": [3.5]}})
    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "InfeasibleAlphaError"
    assert "hull" in body["detail"]

    resp = client.post("/project", json={"model": {**MODEL, "alpha": [3.0]}})
    assert resp.status_code == 422
    assert resp.json()["error"] == "BoundaryAlphaError"

    resp = client.post("/project", json={"model": {**MODEL, "Q": [0.2, 0.5, 0.4]}})
    assert resp.status_code == 422
    assert resp.json()["error"] == "ModelValidationError"


def test_request_validation_is_fastapi_shaped(client):
    resp = client.post("/project", json={})
    assert resp.status_code == 422
    assert "detail" in resp.json()

    resp = client.post("/collapse", json={"model": MODEL, "n": 40})
    assert resp.status_code == 422


def test_gmm_singular_tangent_maps_to_422(client):
    resp = client.post(
        "/gmm",
        json={"model": MODEL, "data": [1, 2, 3], "tangent_kind": "constraint_tangent"},
    )
    assert resp.status_code == 422
    assert resp.json()["error"] == "SingularPushforwardError"
