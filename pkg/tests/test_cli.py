import csv
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermosched.cli import main, props_run
from thermosched.model import ArrivalProfile, ThermalParams
from thermosched.presets import preset
from thermosched.scenario import Scenario, ScenarioError, parse_scenario, scenario_from_dict

MINIMAL = {"params": {"a": 0.1, "b": 0.3, "T_e": 37, "T_c": 38}, "D": 3.5, "arrivals": [[0, 10]]}


def write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


# -- scenario documents ---------------------------------------------------------


def test_minimal_document_gets_defaults():
    sc = scenario_from_dict(MINIMAL)
    assert sc.T0 == 37.0 and sc.params.c == 0.0
    assert sc.solver.grid_n == 4096 and sc.solver.method == "auto"
    assert sc.profile == ArrivalProfile.single(10.0, 3.5)


def test_object_arrivals_accepted():
    doc = dict(MINIMAL, arrivals=[{"t": 0, "E": 6.08}, {"t": 1.5, "E": 14.55}], D=5)
    sc = scenario_from_dict(doc)
    assert sc.profile.times == (0.0, 1.5)


def test_fig7_preset_roundtrip():
    sc = parse_scenario(preset(7).to_json())
    assert sc.params == ThermalParams(0.1, 0.3, 37.0, 38.0)
    assert sc.profile == ArrivalProfile(5.0, (0.0, 1.5), (6.08, 14.55))


def test_validation_names_every_problem():
    doc = {"params": {"a": -1, "b": 0.3, "T_e": 38, "T_c": 38, "extra": 1}, "D": 2,
           "arrivals": [[0.5, 1], [0.2, -3]], "bogus": True, "solver": {"grid_n": 10}}
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(doc)
    msgs = exc.value.problems
    for path in ("$.bogus", "$.params.extra", "$.params.a", "$.params.T_c", "$.arrivals[0].t",
                 "$.arrivals[1].t", "$.arrivals[1].E", "$.solver.grid_n"):
        assert any(m.startswith(path) for m in msgs), path


def test_missing_fields_and_bad_json():
    with pytest.raises(ScenarioError, match=r"\$\.D: required"):
        scenario_from_dict({"params": MINIMAL["params"], "arrivals": [[0, 1]]})
    with pytest.raises(ScenarioError, match="invalid JSON"):
        parse_scenario("{not json")


@given(a=st.floats(0.01, 1.0), b=st.floats(0.01, 2.0), dT=st.floats(0.1, 5.0),
       D=st.floats(0.5, 10.0), E=st.floats(0.0, 100.0))
@settings(max_examples=50, deadline=None)
def test_scenario_json_roundtrip(a, b, dT, D, E):
    sc = Scenario(ThermalParams(a, b, 37.0, 37.0 + dT), ArrivalProfile.single(E, D), 37.0)
    back = parse_scenario(sc.to_json())
    assert back.params == sc.params and back.profile == sc.profile and back.T0 == sc.T0


# -- commands -----------------------------------------------------------------------


def test_solve_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["solve", write(tmp_path, MINIMAL), "--out", str(out)])
    assert code == 0
    rows = list(csv.reader((out / "trajectory.csv").open()))
    assert rows[0] == ["t", "P", "T", "E_cum", "rate"]
    assert float(rows[1][0]) == 0.0 and float(rows[-1][0]) == 3.5
    summary = json.loads((out / "summary.json").read_text())
    assert summary["regime"] == "constant" and summary["certified"]
    props = json.loads((out / "properties.json").read_text())
    assert props["passed"]
    assert "regime" in capsys.readouterr().out


def test_trajectory_rows_at_arrivals(tmp_path):
    doc = dict(MINIMAL, D=5.0, arrivals=[[0, 6.08], [1.2345, 14.55]])
    out = tmp_path / "o"
    assert main(["solve", write(tmp_path, doc), "--out", str(out), "--grid", "1024"]) == 0
    ts = [float(r[0]) for r in list(csv.reader((out / "trajectory.csv").open()))[1:]]
    assert 1.2345 in ts and 5.0 in ts


def test_outputs_are_byte_identical(tmp_path):
    path = write(tmp_path, dict(MINIMAL, arrivals=[[0, 6.0], [1.0, 8.0]]))
    for d in ("r1", "r2"):
        assert main(["solve", path, "--out", str(tmp_path / d), "--grid", "512"]) == 0
    for f in ("trajectory.csv", "summary.json", "properties.json"):
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()


def test_solve_with_oracle(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", write(tmp_path, dict(MINIMAL, arrivals=[[0, 17.71]])), "--oracle",
                 "--out", str(out), "--grid", "1024"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["oracle"]["relative_gap"] <= 1e-3


def test_zero_energy_scenario(tmp_path):
    out = tmp_path / "o"
    doc = dict(MINIMAL, arrivals=[[0, 0.0], [1.0, 0.0]])
    assert main(["solve", write(tmp_path, doc), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["throughput_bits"] == 0.0 and summary["certified"]


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = dict(MINIMAL, params={"a": 0.1, "b": 0.3, "T_e": 38, "T_c": 37})
    assert main(["solve", write(tmp_path, bad)]) == 2
    assert "$.params.T_c" in capsys.readouterr().err


def test_figure_presets(tmp_path, capsys):
    assert main(["figure", "8", "--out", str(tmp_path / "f8")]) == 0
    summary = json.loads((tmp_path / "f8" / "summary.json").read_text())
    assert summary["p_bar"] == pytest.approx(10.12)
    assert summary["t_h"] == pytest.approx(2.23, abs=0.05)
    assert summary["energy_wasted"]
    assert all(e["passed"] for e in summary["expectations"])


def test_figure_5_reports_required_energy(tmp_path, capsys):
    # exits 1: the required-energy expectation is off by 0.054 (see the notes)
    code = main(["figure", "5", "--out", str(tmp_path / "f5")])
    summary = json.loads((tmp_path / "f5" / "summary.json").read_text())
    assert summary["t0"] == pytest.approx(2.993, abs=1e-3)
    exp = {e["name"]: e for e in summary["expectations"]}
    assert exp["t0"]["passed"]
    assert code == (0 if exp["required energy"]["passed"] else 1)


def test_props_passes(tmp_path):
    lines = []
    assert props_run(1, 5, "two", out_dir=tmp_path, log=lines.append) == 0
    assert len(lines) == 5 and all(line.endswith("checks)") for line in lines)


def test_props_fault_dumps_reproducer(tmp_path):
    lines = []
    code = props_run(1, 3, "two", fault="negative-jump", out_dir=tmp_path, log=lines.append)
    assert code == 1
    assert any("jumps_at_arrivals" in line and "at t=" in line for line in lines)
    dumped = list(tmp_path.glob("*.json"))
    assert len(dumped) == 1
    sc = parse_scenario(dumped[0].read_text())
    assert sc.profile.n_epochs == 2


def test_compare_command(tmp_path, capsys):
    path = write(tmp_path, dict(MINIMAL, arrivals=[[0, 17.71]]))
    assert main(["compare", path, "--grid", "1024"]) == 0
    assert "relative_gap" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "thermosched", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for cmd in ("solve", "figure", "props", "compare"):
        assert cmd in res.stdout
