import json

import numpy as np
import pytest

from epicon import PRESET_NAMES, ControlTrajectory, preset, simulate_forward
from epicon.errors import ParseError, ValidationError
from epicon.io import (
    load_scenario,
    loads_scenario,
    read_control_csv,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_control_csv,
    write_trajectory_csv,
)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_preset_round_trip(name, tmp_path):
    sc = preset(name)
    path = tmp_path / "s.json"
    save_scenario(path, sc)
    back = load_scenario(path)
    assert scenario_to_dict(back) == scenario_to_dict(sc)
    assert back == sc


def test_missing_key_is_named():
    doc = scenario_to_dict(preset("sir_paper_qq_008"))
    del doc["cost"]["q"]
    with pytest.raises(ParseError, match=r"missing key 'cost\.q'"):
        scenario_from_dict(doc)


def test_out_of_range_exponent():
    doc = scenario_to_dict(preset("sir_paper_qq_008"))
    doc["cost"]["q"] = [3.0]
    with pytest.raises(ValidationError, match=r"q out of \[1,2\]"):
        scenario_from_dict(doc)
    assert scenario_from_dict(doc, validate=False).cost.q[0] == 3.0


def test_shape_errors():
    doc = scenario_to_dict(preset("covid_n3"))
    doc["model"]["sigma"] = [0.1, 0.2]
    with pytest.raises(ParseError, match="length 3"):
        scenario_from_dict(doc)
    doc = scenario_to_dict(preset("covid_n3"))
    doc["model"]["M"] = [[0.0]]
    with pytest.raises(ParseError, match="3x3"):
        scenario_from_dict(doc)


def test_malformed_json_reports_position():
    text = json.dumps(scenario_to_dict(preset("seir")), indent=2).replace('"init"', '"init" 1', 1)
    with pytest.raises(ParseError, match=r"line \d+, column \d+"):
        loads_scenario(text)


def test_trajectory_header(tmp_path):
    sc = preset("covid_n3").replace(grid_points=720)
    write_trajectory_csv(tmp_path / "t.csv", simulate_forward(sc, ControlTrajectory.zeros(sc)))
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,s,x1,x2,x3,r,d"
    assert len(lines) == 722


def test_control_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    grid = np.linspace(0, 360, 51)
    u = ControlTrajectory(grid, rng.uniform(0, 0.1, (51, 2)))
    write_control_csv(tmp_path / "u.csv", u)
    back = read_control_csv(tmp_path / "u.csv")
    assert np.array_equal(back.grid, u.grid) and np.array_equal(back.u, u.u)


def test_bad_control_csv(tmp_path):
    p = tmp_path / "u.csv"
    p.write_text("time,u\n0,1\n")
    with pytest.raises(ParseError):
        read_control_csv(p)
    p.write_text("t,u1\n0,1,2\n")
    with pytest.raises(ParseError):
        read_control_csv(p)
