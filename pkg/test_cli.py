"""
Тесты командной строки DelayLab
"""
import io
import json
import math

import pytest

from cli.commands import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, DelayLabCli
from db.database import DatabaseManager
from db.repository import CampaignRepository
from estimation.types import Estimate
from physics.dataset import DetectionDataset, DetectionMode

NARROW = ["--center", "2e15", "--dw", "1e14"]


def run(*argv):
    """Запуск CLI; возвращает (код выхода, stdout, stderr)"""
    stdout, stderr = io.StringIO(), io.StringIO()
    code = DelayLabCli(stdout, stderr).dispatch([str(a) for a in argv])
    return code, stdout.getvalue(), stderr.getvalue()


def test_bounds():
    code, out, _ = run("bounds", "--dw", "1e15", "--eps", "0", "--n", "1e7", "--tau", "1e-18")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["spectrometer_bound"] == pytest.approx(7.906e-20, rel=1e-4)
    assert payload["split_bound"] == pytest.approx(math.sqrt(2 * math.pi) * 7.90569e-20, rel=1e-5)
    assert payload["bias_factor"] == 1.0
    assert payload["photon_budget"] == 10_000_000


def test_bounds_undefined_at_extremum():
    code, _, err = run("bounds", "--dw", "1e15", "--n", "100", "--phi", "0")
    assert code == EXIT_DOMAIN
    assert err.startswith("UndefinedBound")


def test_sample_is_reproducible(tmp_path):
    args = ["sample", *NARROW, "--tau", "1e-17", "--phi", "1.2", "--n", "5000", "--seed", "9"]
    code_a, out_a, _ = run(*args, "--out", tmp_path / "a.csv")
    code_b, _, _ = run(*args, "--out", tmp_path / "b.csv")
    assert code_a == code_b == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    payload = json.loads(out_a)
    assert payload["n_photons"] == 5000
    assert payload["json"].endswith("a.json")


def test_sample_then_estimate(tmp_path):
    data = tmp_path / "data.csv"
    code, _, _ = run("sample", *NARROW, "--tau", "2e-16", "--phi", "1.3", "--phi-reference", "carrier",
                     "--n", "20000", "--seed", "4", "--out", data)
    assert code == EXIT_OK

    code, out, _ = run("estimate", "--data", data, "--out", tmp_path / "estimate.json")
    assert code == EXIT_OK
    estimate = Estimate.model_validate_json(out)
    assert abs(estimate.tau_hat - 2e-16) < 5 * estimate.stderr_tau
    saved = Estimate.model_validate_json((tmp_path / "estimate.json").read_text(encoding="utf-8"))
    assert saved == estimate


def test_estimate_split_undefined(tmp_path, narrow_spectrum):
    path = tmp_path / "cells.csv"
    DetectionDataset(DetectionMode.SPLIT, narrow_spectrum, counts=[[5, 0], [5, 0]]).save(path)
    code, out, err = run("estimate", "--data", path, "--method", "split")
    assert code == EXIT_DOMAIN
    assert out == ""
    assert err.startswith("UndefinedEstimator")


def test_estimate_bad_file(tmp_path, narrow_spectrum):
    path = tmp_path / "broken.csv"
    path.write_text("q,omega\n1,abc\n", encoding="utf-8")
    sidecar = {"mode": "spectrometer", "n": 1, "spectrum": narrow_spectrum.to_dict()}
    (tmp_path / "broken.json").write_text(json.dumps(sidecar), encoding="utf-8")
    code, _, err = run("estimate", "--data", path)
    assert code == EXIT_USAGE
    assert "DatasetFormatError" in err


def test_estimate_malformed_spectrum_table(tmp_path, narrow_spectrum):
    path = tmp_path / "cells.csv"
    DetectionDataset(DetectionMode.SPLIT, narrow_spectrum, counts=[[5, 3], [2, 4]]).save(path)
    sidecar = tmp_path / "cells.json"
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    meta["spectrum"] = {"kind": "tabulated", "support": [1.0e15, 3.0e15], "table": [[1.0]]}
    sidecar.write_text(json.dumps(meta), encoding="utf-8")
    code, out, err = run("estimate", "--data", path)
    assert code == EXIT_USAGE
    assert out == ""
    assert err.startswith("DatasetFormatError")


@pytest.mark.parametrize("argv", [
    ["bounds", "--dw", "1e15"],
    ["sample", "--phi", "0", "--n", "-5", "--seed", "1"],
    ["sample", "--phi", "0", "--n", "10"],
    ["no-such-command"],
    [],
    ["audit", "--n", "100"],
    ["curves", "--tau-min", "1e-15", "--tau-max", "1e-18"],
])
def test_usage_errors(argv):
    code, _, err = run(*argv)
    assert code == EXIT_USAGE
    assert err


def test_wva_needs_alpha(tmp_path):
    data = tmp_path / "data.csv"
    run("sample", *NARROW, "--phi", "0.1", "--n", "100", "--seed", "1", "--out", data)
    code, _, err = run("estimate", "--data", data, "--method", "wva")
    assert code == EXIT_USAGE
    assert "--alpha" in err


def test_help_lists_units():
    cli = DelayLabCli(io.StringIO(), io.StringIO())
    commands = cli.subparsers.choices
    assert set(commands) == {"sample", "estimate", "fisher", "bounds", "curves", "audit", "campaign"}
    sample_help = commands["sample"].format_help()
    for unit in ("[s]", "[rad]", "[rad/s]", "[photons]"):
        assert unit in sample_help
    assert "[rad/s]" in commands["bounds"].format_help()


def test_help_exits_cleanly():
    code, _, _ = run("--help")
    assert code == EXIT_OK


def test_fisher(narrow_spectrum):
    code, out, _ = run("fisher", *NARROW, "--frame", "carrier", "--n", "1e6")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["fisher"]["frame"] == "carrier"
    assert payload["fisher"]["phi_phi"] == pytest.approx(1.0, rel=1e-9)
    assert payload["cramer_rao"]["delta_tau"] == pytest.approx(1.0 / (narrow_spectrum.spread * 1e3), rel=1e-6)


def test_fisher_singular():
    code, _, err = run("fisher", *NARROW, "--phi", "0")
    assert code == EXIT_DOMAIN
    assert err.startswith("SingularModel")


def test_curves(tmp_path):
    out_path = tmp_path / "curves.csv"
    code, out, _ = run("curves", "--points", "11", "--out", out_path)
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["crossover"] == pytest.approx(2.5e-17)
    assert payload["wva_level"] == pytest.approx(5e-21)
    assert payload["standard_level"] == pytest.approx(1e-17)
    assert payload["joint_below_wva_max_tau"] < 2.5e-17
    assert out_path.read_text(encoding="utf-8").startswith("scheme,tau,delta_tau_ult")


def test_audit(tmp_path):
    code, out, _ = run("audit", *NARROW, "--thetas", "1e-4,1e-3", "--methods", "split",
                       "--out", tmp_path / "audit.json", "--csv", tmp_path / "audit.csv")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["input_kind"] == "exact"
    (summary,) = payload["summary"]
    assert summary["constant"]
    assert (tmp_path / "audit.csv").exists()


def test_campaign_with_archive(tmp_path):
    config = tmp_path / "campaign.json"
    config.write_text(json.dumps({
        "name": "cli",
        "spectrum": {"center": 2e15, "spread": 1e14},
        "grids": {"tau": [1e-16], "n_photons": [1000, 0], "modes": ["split"], "estimators": ["ml", "split"]},
        "run": {"trials": 2, "seed": 5},
        "output": {"csv": str(tmp_path / "results.csv"), "json": str(tmp_path / "results.json")},
    }), encoding="utf-8")
    database_url = f"sqlite:///{tmp_path / 'archive.db'}"

    code, out, _ = run("campaign", "--config", config, "--archive", "--db", database_url)
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["cells"] == 4
    assert payload["failures"] == 4
    assert (tmp_path / "results.json").exists()

    session = DatabaseManager(database_url).get_session_sync()
    try:
        cells = CampaignRepository(session).get_cells(payload["run_id"])
        assert [c.n_photons for c in cells] == [1000, 1000, 0, 0]
        assert json.loads(cells[2].failure_reasons) == {"Degenerate": 2}
    finally:
        session.close()


def test_campaign_invalid_config(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[grids]\ntau = []\n", encoding="utf-8")
    code, _, err = run("campaign", "--config", config)
    assert code == EXIT_USAGE
    assert err.startswith("ConfigInvalid")
