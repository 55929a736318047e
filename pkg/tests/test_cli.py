import json
import subprocess
import sys

import pytest

from tristate_dfl import __version__
from tristate_dfl.cli import main
from tristate_dfl.experiment import read_summary, read_sweep_csv, read_trajectory_csv
from tristate_dfl.simulate import corridor_scenario, save_scenario


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("sc") / "corridor.json"
    save_scenario(corridor_scenario(2.0), path)
    return path


def test_campaign_artifacts(scenario_file, tmp_path):
    out = tmp_path / "out"
    code = main(["--scenario", str(scenario_file), "--model", "three-state,exponential", "--runs", "2", "--out", str(out)])
    assert code == 0
    s = read_summary(out / "summary.json")
    assert set(s["models"]) == {"three-state", "exponential"}
    mean = s["models"]["three-state"]["mean"]
    for key in ("eps_x", "eps_y", "eps_pct", "eps_r", "sensitivity_area"):
        assert key in mean
    assert s["runs"] == 2 and s["seed"] == 0
    t = read_trajectory_csv(out / "three-state" / "run_00001_trajectory.csv")
    assert len(t["time_s"]) > 0
    assert (out / "exponential" / "run_00000_states.csv").exists()
    assert (out / "summary.txt").exists()


def test_summary_bytes_deterministic(tmp_path):
    args = ["--scenario", "corridor:3", "--model", "three-state", "--runs", "2", "--seed", "4"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_overrides_are_recorded(tmp_path):
    code = main(
        ["--scenario", "corridor:3", "--model", "three-state", "--runs", "1", "--set", "N=200", "--set", "init_shift=0.15", "--out", str(tmp_path)]
    )
    assert code == 0
    s = read_summary(tmp_path / "summary.json")
    assert s["overrides"] == {"N": "200", "init_shift": "0.15"} and s["init_shift"] == 0.15


def test_sweep(tmp_path):
    code = main(["--scenario", "corridor:3", "--model", "three-state", "--runs", "1", "--sweep", "rho=40:10:60", "--out", str(tmp_path)])
    assert code == 0
    rows = read_sweep_csv(tmp_path / "sweep.csv")
    assert [r["value"] for r in rows] == [40.0, 50.0, 60.0]
    assert {r["parameter"] for r in rows} == {"rho"}


@pytest.mark.parametrize(
    "extra",
    [
        ["--scenario", "missing.json"],
        ["--scenario", "corridor:wide"],
        ["--scenario", "corridor:3", "--model", "linear"],
        ["--scenario", "corridor:3", "--runs", "0"],
        ["--scenario", "corridor:3", "--set", "bogus=1"],
        ["--scenario", "corridor:3", "--set", "N"],
        ["--scenario", "corridor:3", "--sweep", "N=1:1:2"],
        ["--scenario", "corridor:3", "--sweep", "rho=1:x:2"],
        ["--scenario", "corridor:3", "--set", "A=abc"],
    ],
)
def test_config_errors_exit_nonzero(extra, tmp_path, capsys):
    assert main(extra + ["--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_invalid_scenario_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"links": []}))
    assert main(["--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "invalid scenario" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tristate_dfl", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
