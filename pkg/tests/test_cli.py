import json
import os
import subprocess
import sys

import pytest

from epicon import preset
from epicon.cli import run
from epicon.io import save_scenario, scenario_to_dict, write_json


def _report(out):
    with open(os.path.join(out, "report.json")) as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def qq_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("qq"))
    assert run(["solve", "--preset", "sir_paper_qq_008", "--out", out]) == 0
    return out


def test_solve_writes_everything(qq_run):
    rep = _report(qq_run)
    assert rep["converged"] is True and rep["method"] == "fbsm"
    for f in ("trajectory.csv", "control.csv", "costates.csv", "report.json", "manifest.json"):
        assert os.path.exists(os.path.join(qq_run, f))
    with open(os.path.join(qq_run, "manifest.json")) as fh:
        manifest = json.load(fh)
    assert [e["file"] for e in manifest["files"]] == ["trajectory.csv", "control.csv", "costates.csv", "report.json"]


def test_solve_is_deterministic(qq_run, tmp_path):
    assert run(["solve", "--preset", "sir_paper_qq_008", "--out", str(tmp_path)]) == 0
    for f in ("trajectory.csv", "control.csv", "costates.csv"):
        with open(os.path.join(qq_run, f), "rb") as a, open(tmp_path / f, "rb") as b:
            assert a.read() == b.read()
    a, b = _report(qq_run), _report(tmp_path)
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b


def test_analyze_reads_saved_run(qq_run):
    assert run(["analyze", "--out", qq_run]) == 0
    with open(os.path.join(qq_run, "structure.json")) as fh:
        doc = json.load(fh)
    assert doc["structure"]["sequence_string"] == _report(qq_run)["structure"]["sequence_string"]
    assert doc["cost_value"] == pytest.approx(_report(qq_run)["cost_value"], rel=1e-12)


def test_validate_rejects_open_population(tmp_path, capsys):
    doc = scenario_to_dict(preset("sir_paper_qq_008"))
    doc["model"]["sigma"] = [0.05]
    path = tmp_path / "bad.json"
    write_json(path, doc)
    assert run(["validate", "--scenario", str(path)]) == 1
    assert "closed-population residual -0.01 in column 1" in capsys.readouterr().err


def test_validate_accepts_saved_preset(tmp_path):
    path = tmp_path / "ok.json"
    save_scenario(path, preset("covid_n5"))
    assert run(["validate", "--scenario", str(path)]) == 0


def test_simulate_conserves(tmp_path):
    assert run(["simulate", "--preset", "sir_paper_ll_01", "--control", "zero", "--out", str(tmp_path)]) == 0
    rep = _report(tmp_path)
    assert rep["conservation_error"] <= 1e-9
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,s,x1,r,d"


def test_simulate_rejects_inadmissible_constant(tmp_path):
    assert run(["simulate", "--preset", "sir_paper_qq_008", "--control", "0.5", "--out", str(tmp_path)]) == 1


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EPICON_OUT", str(tmp_path / "env"))
    assert run(["simulate", "--preset", "seir", "--control", "max"]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_missing_file_is_io_error(tmp_path):
    assert run(["validate", "--scenario", str(tmp_path / "nope.json")]) == 3


def test_non_convergence_exit_code(tmp_path):
    code = run(["solve", "--preset", "sir_paper_qq_008", "--grid", "50", "--tol", "1e-300", "--out", str(tmp_path)])
    assert code == 2
    assert _report(tmp_path)["converged"] is False


def test_several_presets_in_parallel(tmp_path):
    argv = ["solve", "--preset", "sir_paper_qq_008", "--preset", "sir_paper_qq_004", "--grid", "360",
            "--jobs", "2", "--out", str(tmp_path)]
    assert run(argv) == 0
    assert (tmp_path / "sir_paper_qq_004" / "report.json").exists()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "epicon.cli", "presets"], capture_output=True, text=True)
    assert out.returncode == 0 and "covid_n5" in out.stdout
