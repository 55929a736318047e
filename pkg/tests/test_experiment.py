import math

import numpy as np
import pytest

from tristate_dfl.experiment import (
    OVERRIDE_KEYS,
    RunSetup,
    apply_override,
    detection_offset,
    frange,
    read_states_csv,
    read_summary,
    read_sweep_csv,
    read_trajectory_csv,
    resolve_setup,
    run_campaign,
    run_single,
    sweep_parameter,
    write_run_artifacts,
    write_states_csv,
    write_summary,
    write_sweep_csv,
    write_trajectory_csv,
)
from tristate_dfl.metrics import TrackReport
from tristate_dfl.simulate import corridor_scenario

SETUP = RunSetup(corridor_scenario(3.0))


@pytest.fixture(scope="module")
def run():
    return run_single(SETUP, "three-state", seed=0)


@pytest.fixture(scope="module")
def campaign():
    return run_campaign(SETUP, ("three-state", "exponential"), runs=3, seed=0)


def test_frange():
    assert frange(0.0, 0.1, 0.3) == [0.0, 0.1, 0.2, 0.3]
    assert frange(1.0, -0.5, 0.0) == [1.0, 0.5, 0.0]
    assert frange(2.0, 1.0, 2.0) == [2.0]
    with pytest.raises(ValueError):
        frange(0.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        frange(0.0, 0.0, 1.0)


def test_apply_override():
    s = apply_override(SETUP, "A", "0.15")
    assert s.tracker.ellipse.a_semi_minor == 0.15
    assert s.scenario.person.a_semi_minor == 0.11  # the simulated person is untouched
    assert apply_override(SETUP, "N", "200").tracker.n_particles == 200
    assert apply_override(SETUP, "w", "0.3").tracker.process_noise_std == (0.3, 0.3)
    assert apply_override(SETUP, "w", "0.1,0.2").tracker.process_noise_std == (0.1, 0.2)
    assert apply_override(SETUP, "sigma_p", 2).tracker.meas_noise_std == 2.0
    t = apply_override(SETUP, "T_s", "0.016")
    assert t.tracker.sampling_interval == t.scenario.sampling_interval == 0.016
    assert apply_override(SETUP, "C", "8").scenario.n_channels == 8
    assert apply_override(SETUP, "prefilter", "yes").prefilter
    fixed = apply_override(SETUP, "init_shift", "0.12")
    assert fixed.tracker.init_shift == 0.12 and resolve_setup(fixed) == fixed
    assert apply_override(fixed, "init_shift", "auto").tracker.init_shift is None
    with pytest.raises(ValueError):
        apply_override(SETUP, "bogus", 1)
    assert set(OVERRIDE_KEYS) >= {"A", "psi0", "eps_r", "rho", "sigma_p"}


def test_detection_offset_sits_between_contact_and_label_edge():
    off = detection_offset(SETUP, runs=5)
    # the HMM needs some fade before it reports shadowing
    assert 0.05 < off < 0.2
    resolved = resolve_setup(SETUP)
    assert resolved.tracker.init_shift == pytest.approx(detection_offset(SETUP), abs=1e-12)


def test_run_single_shapes(run):
    m = len(run.times)
    assert run.estimates.shape == (m, 4) and run.truth.shape == (m, 2)
    assert run.states.shape == run.true_states.shape == (m, 2)
    act = run.active
    assert act.any() and (~act).any()
    assert np.all(run.inside[~act] == -1) and np.all(run.inside[act] >= 0)


def test_run_single_tracks(run):
    rep = run.report(3.0)
    assert rep.eps_x < 0.05 and rep.eps_pct > 80
    assert rep.sensitivity_area == pytest.approx(4.96, abs=0.01)


def test_run_single_deterministic(run):
    again = run_single(SETUP, "three-state", seed=0)
    assert again.estimates.tobytes() == run.estimates.tobytes()
    assert again.inside.tobytes() == run.inside.tobytes()


def test_prefilter_run_completes():
    r = run_single(apply_override(SETUP, "prefilter", True), "three-state", seed=0)
    assert r.active.any()


def test_campaign_fields(campaign):
    assert set(campaign) == {"three-state", "exponential"}
    c = campaign["three-state"]
    assert len(c.runs) == len(c.reports) == 3
    assert c.mean.eps_r > 0 and campaign["exponential"].mean.eps_r == 0
    assert [r.seed for r in c.runs] == [0, 1, 2]


def test_campaign_parallel_matches_serial(campaign):
    par = run_campaign(SETUP, ("three-state", "exponential"), runs=3, seed=0, jobs=2)
    for m in campaign:
        assert par[m].mean == campaign[m].mean


def test_campaign_validation():
    with pytest.raises(ValueError):
        run_campaign(SETUP, ("three-state",), runs=0)
    with pytest.raises(ValueError):
        run_campaign(SETUP, ("linear",), runs=1)


def test_trajectory_and_states_csv_round_trip(run, tmp_path):
    write_trajectory_csv(run, tmp_path / "t.csv")
    t = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(t["time_s"], run.times)
    np.testing.assert_array_equal(np.column_stack([t[k] for k in ("est_px", "est_vx", "est_py", "est_vy")]), run.estimates)
    np.testing.assert_array_equal(np.column_stack([t["true_px"], t["true_py"]]), run.truth)
    np.testing.assert_array_equal(t["inside"], run.inside)

    write_states_csv(run, tmp_path / "s.csv")
    times, hmm, true, ids = read_states_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(times, run.times)
    np.testing.assert_array_equal(hmm, run.states)
    np.testing.assert_array_equal(true, run.true_states)
    assert ids == run.link_ids


def test_run_artifacts(run, tmp_path):
    rep = run.report(3.0)
    write_run_artifacts(run, rep, tmp_path / "three-state")
    files = sorted(p.name for p in (tmp_path / "three-state").iterdir())
    assert files == ["run_00000_report.json", "run_00000_states.csv", "run_00000_trajectory.csv"]
    assert TrackReport.from_json((tmp_path / "three-state" / files[0]).read_text()) == rep


def test_summary_round_trip_and_bytes(campaign, tmp_path):
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        write_summary(campaign, tmp_path / name, {"seed": 0})
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes()
    d = read_summary(tmp_path / "a" / "summary.json")
    assert d["seed"] == 0
    for m, c in campaign.items():
        assert TrackReport.from_dict(d["models"][m]["mean"]) == c.mean
        assert d["models"][m]["runs"] == 3
    assert "eps_x [cm]" in (tmp_path / "a" / "summary.txt").read_text()


def test_sweep_csv_round_trip(tmp_path):
    rows = [
        dict(parameter="rho", value=40.0, model="three-state", eps_x=0.01, eps_y=0.1, eps_pct=90.0,
             eps_pct_std=1.5, eps_r=math.inf, tracked_runs=3),
    ]
    write_sweep_csv(rows, tmp_path / "sweep.csv")
    assert read_sweep_csv(tmp_path / "sweep.csv") == rows


def test_single_value_sweep_matches_campaign(campaign):
    rows = sweep_parameter(SETUP, "rho", [53.0], ("three-state", "exponential"), runs=3, seed=0)
    for r in rows:
        c = campaign[r["model"]]
        assert (r["eps_x"], r["eps_y"], r["eps_pct"], r["eps_r"]) == (
            c.mean.eps_x, c.mean.eps_y, c.mean.eps_pct, c.mean.eps_r
        )


def test_sweep_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        sweep_parameter(SETUP, "N", [100], runs=1)


def test_three_state_beats_exponential_without_reflection_term():
    rows = sweep_parameter(SETUP, "psi0", [0.0], ("three-state", "exponential"), runs=5)
    pct = {r["model"]: r["eps_pct"] for r in rows}
    assert pct["three-state"] > pct["exponential"]


def test_ratio_drops_for_large_measurement_noise():
    rows = sweep_parameter(SETUP, "sigma_p", [1.5, 8.0, 16.0], ("three-state",), runs=5)
    pct = [r["eps_pct"] for r in rows]
    assert pct[0] > pct[1] > pct[2]
