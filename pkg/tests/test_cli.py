"""Command line client: argument handling, output formats, exit codes."""

import json

import pytest

from collapse_lab.cli import main

F1 = {"k": 3, "Q": [0.2, 0.5, 0.3], "features": [[1.0, 2.0, 3.0]], "alpha": [2.0]}
PAIR_TEMPLATE = {"k": 2, "Q": [0.5, 0.5], "features": [[1.0, 2.0]], "alpha": []}


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(F1))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_project_json_output(capsys, model_file):
    code, out, _ = run(capsys, ["project", "--model", model_file])
    assert code == 0
    body = json.loads(out)
    assert body["p_star"][0] == pytest.approx(0.24744871391589052, abs=1e-12)
    assert body["dual_value"] == pytest.approx(0.010153423432867847, abs=1e-12)


def test_project_kv_csv_output(capsys, model_file):
    code, out, _ = run(capsys, ["project", "--model", model_file, "--format", "csv"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "key,value"
    rows = dict(line.split(",", 1) for line in lines[1:])
    assert float(rows["dual_value"]) == pytest.approx(0.010153423432867847, abs=1e-12)
    # vectors are space joined in the value cell
    assert len(rows["p_star"].split()) == 3


def test_usage_errors_exit_one(capsys):
    assert main([]) == 1
    capsys.readouterr()
    assert main(["project", "--bogus"]) == 1
    capsys.readouterr()
    assert main(["not-a-command"]) == 1
    capsys.readouterr()
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_missing_required_option(capsys):
    code, _, err = run(capsys, ["project"])
    assert code == 1
    assert "missing required option --model" in err


def test_domain_error_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**F1, "alpha": [3.5]}))
    code, _, err = run(capsys, ["project", "--model", str(bad)])
    assert code == 1
    assert "InfeasibleAlphaError" in err


def test_collapse_csv_output(capsys, model_file):
    code, out, err = run(
        capsys, ["collapse", "--model", model_file, "--n", "20", "--n", "30", "--m", "1"]
    )
    assert code == 0
    assert err == ""
    lines = out.splitlines()
    assert lines[0] == "n,m,tau,lambda_min,tv_exact,tv_gaussian,bound,mass_out,rho_ratio"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "20"
    assert float(first[4]) == pytest.approx(0.012090222368562498, abs=1e-12)


def test_collapse_skip_exits_two(capsys, model_file):
    code, out, err = run(
        capsys,
        ["collapse", "--model", model_file, "--n", "25", "--m", "1", "--m", "20", "--format", "json"],
    )
    assert code == 2
    assert "skipped n=25 m=20" in err
    body = json.loads(out)
    assert len(body["rows"]) == 1
    assert len(body["skipped"]) == 1
    assert "GuardError" in body["skipped"][0]["reason"]


def test_config_merge_and_override(capsys, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"model": F1, "n": [20], "m": [1]}))
    code, out, _ = run(capsys, ["collapse", "--config", str(config)])
    assert code == 0
    assert out.splitlines()[1].split(",")[0] == "20"

    # explicit flags win over config values
    code, out, _ = run(capsys, ["collapse", "--config", str(config), "--n", "30"])
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[0] == "30"


def test_config_rejects_unknown_keys(capsys, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"model": F1, "bogus": 1}))
    code, _, err = run(capsys, ["collapse", "--config", str(config)])
    assert code == 1
    assert "unknown config keys: bogus" in err


def test_betel_csv_output(capsys, tmp_path):
    model = tmp_path / "template.json"
    model.write_text(json.dumps(PAIR_TEMPLATE))
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"theta": [1.4, 1.6]}))
    data = tmp_path / "data.txt"
    data.write_text("# sample\n" + "\n".join(["1"] * 4 + ["2"] * 6) + "\n\n")

    code, out, _ = run(
        capsys, ["betel", "--model", str(model), "--grid", str(grid), "--data", str(data)]
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "theta_0,log_posterior,posterior"
    assert len(lines) == 3
    row = lines[2].split(",")
    assert float(row[0]) == 1.6
    assert float(row[2]) == pytest.approx(9.0 / 13.0, abs=1e-12)


def test_betel_zero_prior_prints_minus_inf(capsys, tmp_path):
    model = tmp_path / "template.json"
    model.write_text(json.dumps(PAIR_TEMPLATE))
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"theta": [1.4, 1.6]}))
    data = tmp_path / "data.txt"
    data.write_text("1\n2\n")
    code, out, _ = run(
        capsys,
        [
            "betel", "--model", str(model), "--grid", str(grid), "--data", str(data),
            "--prior", "0", "1",
        ],
    )
    assert code == 0
    first_row = out.splitlines()[1].split(",")
    assert first_row[1] == "-inf"
    assert float(first_row[2]) == 0.0


def test_gmm_command(capsys, tmp_path):
    model = tmp_path / "uniform.json"
    model.write_text(
        json.dumps({"k": 3, "Q": [1 / 3, 1 / 3, 1 / 3], "features": [[1.0, 2.0, 3.0]], "alpha": [2.0]})
    )
    data = tmp_path / "data.txt"
    data.write_text("1\n2\n2\n")
    code, out, _ = run(capsys, ["gmm", "--model", str(model), "--data", str(data)])
    assert code == 0
    body = json.loads(out)
    assert body["W_opt"] == [[pytest.approx(1.5, abs=1e-12)]]
    assert body["objective"] == pytest.approx(0.25, abs=1e-12)


def test_gee_command(capsys, tmp_path):
    clusters = tmp_path / "clusters.json"
    clusters.write_text(
        json.dumps(
            [
                {"D": [[1.0]], "W": [[2.0]], "Sigma": [[0.5]]},
                {"D": [[1.0]], "W": [[3.0]], "Sigma": [[4.0 / 9.0]]},
            ]
        )
    )
    code, out, _ = run(capsys, ["gee", "--clusters", str(clusters), "--n", "50"])
    assert code == 0
    body = json.loads(out)
    assert body["sandwich"][0][0] == pytest.approx(0.48, abs=1e-12)
    assert body["rate_proxy"] == pytest.approx(0.17690727526991412, abs=1e-15)


def test_sweep_writes_outputs(capsys, model_file, tmp_path):
    out_dir = tmp_path / "results"
    code, out, _ = run(
        capsys,
        [
            "sweep", "--model", model_file, "--n-grid", "20", "30", "--m-grid", "1",
            "--outputs", str(out_dir),
        ],
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["completed"] == 2
    csv_text = (out_dir / "sweep.csv").read_text()
    assert csv_text.startswith("# schema_version=1\n")
    assert json.loads((out_dir / "summary.json").read_text()) == summary


def test_sweep_csv_format_and_thread_env(capsys, model_file, monkeypatch):
    monkeypatch.setenv("COLLAPSE_LAB_THREADS", "1")
    code, single, _ = run(
        capsys,
        ["sweep", "--model", model_file, "--n-grid", "20", "25", "30", "--m-grid", "1",
         "--format", "csv"],
    )
    assert code == 0
    monkeypatch.setenv("COLLAPSE_LAB_THREADS", "4")
    code, four, _ = run(
        capsys,
        ["sweep", "--model", model_file, "--n-grid", "20", "25", "30", "--m-grid", "1",
         "--format", "csv"],
    )
    assert code == 0
    assert single == four
    assert single.startswith("# schema_version=1\n")
    assert len(single.splitlines()) == 5


def test_sweep_constants_and_tau_policy(capsys, model_file):
    code, out, _ = run(
        capsys,
        [
            "sweep", "--model", model_file, "--n-grid", "20", "--m-grid", "1",
            "--constants", "2.0", "3.0", "--tau-policy", "0.1",
        ],
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["constants"] == {"C_geo": 2.0, "C_geo_prime": 3.0}
    assert summary["tau_policy"] == 0.1

    code, out, _ = run(
        capsys,
        ["sweep", "--model", model_file, "--n-grid", "20", "--m-grid", "1",
         "--constants", "fit_at_smallest_n"],
    )
    assert code == 0
    assert json.loads(out)["constants"]["C_geo"] > 0


def test_sweep_skip_exit_code(capsys, model_file):
    code, out, _ = run(
        capsys, ["sweep", "--model", model_file, "--n-grid", "25", "--m-grid", "1", "20"]
    )
    assert code == 2
    assert json.loads(out)["skipped"][0]["m"] == 20


def test_remote_mode_uses_server(capsys, model_file, monkeypatch):
    import httpx

    calls = {}

    class FakeResponse:
        status_code = 200

        def json(self):
            return {"ok": True}

    def fake_post(url, json=None, timeout=None):
        calls["url"] = url
        calls["payload"] = json
        return FakeResponse()

    monkeypatch.setattr(httpx, "post", fake_post)
    code, out, _ = run(
        capsys, ["project", "--model", model_file, "--server", "http://svc:9"]
    )
    assert code == 0
    assert calls["url"] == "http://svc:9/project"
    assert calls["payload"]["model"]["k"] == 3
    assert json.loads(out) == {"ok": True}


def test_remote_mode_maps_domain_errors(capsys, model_file, monkeypatch):
    import httpx

    class FakeResponse:
        status_code = 422

        def json(self):
            return {"error": "InfeasibleAlphaError", "detail": "alpha outside hull"}

    monkeypatch.setattr(httpx, "post", lambda *a, **kw: FakeResponse())
    monkeypatch.setenv("COLLAPSE_LAB_SERVER", "http://svc:9")
    code, _, err = run(capsys, ["project", "--model", model_file])
    assert code == 1
    assert "InfeasibleAlphaError" in err


def test_remote_mode_transport_error(capsys, model_file):
    code, _, err = run(
        capsys, ["project", "--model", model_file, "--server", "http://127.0.0.1:1"]
    )
    assert code == 1
    assert "TransportError" in err
