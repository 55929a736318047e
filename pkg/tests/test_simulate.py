import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from tristate_dfl.geometry import HumanEllipse, LinkGeometry, Point2D
from tristate_dfl.propagation import LinkState
from tristate_dfl.simulate import (
    FilterSpec,
    InvalidScenarioError,
    RssStream,
    Scenario,
    corridor_scenario,
    design_lowpass,
    generate_trajectory,
    label_state,
    load_scenario,
    lowpass_filter,
    measurement_vectors,
    noiseless_gains,
    read_rss_csv,
    read_truth_csv,
    remove_mean,
    save_scenario,
    scenario_from_dict,
    scenario_schema,
    scenario_to_dict,
    single_link_scenario,
    synthesize_rss,
    write_rss_csv,
    write_truth_csv,
)

ROOT = Path(__file__).resolve().parents[1]
LINK = LinkGeometry((0.0, 0.0), (3.0, 0.0))


def _far_scenario(**kw):
    # person walks well outside every sensitivity region
    return Scenario((LINK,), ((Point2D(0, 20), 0.5), (Point2D(3, 20), 0.5)), **kw)


def test_trajectory_arrives_on_time():
    sc = Scenario((LINK,), ((Point2D(0, 1), 0.5), (Point2D(1, 1), 0.5)))
    tr = generate_trajectory(sc)
    assert tr.times[-1] == pytest.approx(2.0)
    np.testing.assert_allclose(tr.positions[-1], [1, 1])
    np.testing.assert_allclose(np.diff(tr.times), 0.002)
    np.testing.assert_allclose(tr.velocities, [[0.5, 0.0]] * len(tr.times))


def test_trajectory_piecewise_speed():
    sc = Scenario((LINK,), ((Point2D(0, 1), 1.0), (Point2D(1, 1), 0.5), (Point2D(1, 2), 0.5)))
    tr = generate_trajectory(sc)
    assert tr.times[-1] == pytest.approx(3.0)
    pos, vel = tr.at([0.5, 2.0])
    np.testing.assert_allclose(pos, [[0.5, 1.0], [1.0, 1.5]], atol=1e-9)
    np.testing.assert_allclose(vel, [[1.0, 0.0], [0.0, 0.5]])


@pytest.mark.parametrize(
    "kw",
    [
        dict(sampling_interval=0),
        dict(n_channels=0),
        dict(noise_std=-1),
        dict(waypoints=((Point2D(0, 0), 0.5),)),
        dict(waypoints=((Point2D(0, 0), 0.0), (Point2D(1, 0), 0.5))),
        dict(links=()),
    ],
)
def test_invalid_scenarios(kw):
    base = dict(links=(LINK,), waypoints=((Point2D(0, 1), 0.5), (Point2D(1, 1), 0.5)))
    with pytest.raises(InvalidScenarioError):
        Scenario(**{**base, **kw})


def test_coincident_waypoints_rejected():
    sc = Scenario((LINK,), ((Point2D(0, 1), 0.5), (Point2D(0, 1), 0.5)))
    with pytest.raises(InvalidScenarioError):
        generate_trajectory(sc)


def test_round_robin_slots():
    stream, _ = synthesize_rss(single_link_scenario(), seed=0)
    np.testing.assert_allclose(np.diff(stream.times), 0.002)
    np.testing.assert_array_equal(stream.channels[:18], list(range(1, 17)) + [1, 2])


def test_empty_room_noise():
    stream, truth = synthesize_rss(_far_scenario(), seed=1)
    assert np.all(truth.states == LinkState.NON_FADING)
    assert stream.rss_db.mean() == pytest.approx(0.0, abs=0.02)
    assert stream.rss_db.std() == pytest.approx(0.38, rel=0.03)


def test_offset_and_quantization():
    stream, _ = synthesize_rss(_far_scenario(offset_db=-50.0, quantization=1.0), seed=1)
    assert np.all(stream.rss_db == np.round(stream.rss_db))
    assert stream.rss_db.mean() == pytest.approx(-50.0, abs=0.05)


def test_noiseless_midpoint_shadowing():
    sc = Scenario((LINK,), ((Point2D(1.5, 0.6), 0.5), (Point2D(1.5, -0.6), 0.5)), noise_std=0.0)
    tr = generate_trajectory(sc)
    gains, states = noiseless_gains(sc, tr)
    k = int(np.argmin(np.abs(tr.positions[:, 1])))
    assert states[k, 0] == LinkState.SHADOWING
    # same-channel shadowing depth at the LoS midpoint for this link
    person = sc.person
    from tristate_dfl.propagation import three_state_gain

    lam = LINK.wavelengths[k % 16]
    assert gains[k, 0] == pytest.approx(three_state_gain(LINK, person.at(tr.positions[k]), lam, LinkState.SHADOWING))
    assert gains[k, 0] == pytest.approx(-13.97, abs=0.25)


def test_labels_only_step_between_neighbours():
    for sc in (single_link_scenario(), corridor_scenario(3.0)):
        _, truth = synthesize_rss(sc, seed=0)
        jumps = np.abs(np.diff(truth.states.astype(int), axis=0))
        assert jumps.max() == 1


def test_label_state():
    e = HumanEllipse()
    assert label_state(LINK, e.at((1.5, 0.1))) is LinkState.SHADOWING
    assert label_state(LINK, e.at((1.5, 0.4))) is LinkState.REFLECTION
    assert label_state(LINK, e.at((1.5, 2.0))) is LinkState.NON_FADING
    assert label_state(LINK, e.at((1.5, 2.0)), delta_threshold=5.0) is LinkState.REFLECTION


def test_crossing_times():
    _, truth = synthesize_rss(single_link_scenario(3.0), seed=0)
    assert truth.crossings == {0: [pytest.approx(3.0)]}
    _, truth = synthesize_rss(corridor_scenario(3.0), seed=0)
    # links cross the walk line at x = -/+0.25
    assert truth.crossings[0] == [pytest.approx(2.5)] and truth.crossings[1] == [pytest.approx(3.5)]


def test_synthesis_deterministic():
    sc = corridor_scenario(2.0)
    assert synthesize_rss(sc, seed=5)[0] == synthesize_rss(sc, seed=5)[0]
    assert synthesize_rss(sc, seed=5)[0] != synthesize_rss(sc, seed=6)[0]


def test_measurement_vectors():
    stream, _ = synthesize_rss(corridor_scenario(2.0), seed=0)
    times, r = measurement_vectors(stream)
    assert r.shape == (len(times), 2, 16)
    np.testing.assert_allclose(r[0, :, 3], stream.rss_db[3])
    assert times[0] == pytest.approx(np.mean(stream.times[:16]))
    bad = replace(stream, channels=stream.channels[::-1].copy())
    with pytest.raises(ValueError):
        measurement_vectors(bad)


def test_remove_mean():
    stream, _ = synthesize_rss(_far_scenario(offset_db=-40.0), seed=0)
    out = remove_mean(stream, 1.0)
    calib = stream.times < 1.0
    for c in (1, 9):
        sel = calib & (out.channels == c)
        assert out.rss_db[sel].mean() == pytest.approx(0.0, abs=1e-9)


# --- prefilter ----------------------------------------------------------------


def test_lowpass_design_meets_spec():
    fs = 1 / 0.032
    spec = FilterSpec()
    taps = design_lowpass(spec, fs)
    assert len(taps) % 2 == 1
    np.testing.assert_allclose(taps, taps[::-1])
    f, h = signal.freqz(taps, worN=4096, fs=fs)
    mag = 20 * np.log10(np.abs(h) + 1e-300)
    assert abs(mag[0]) < 1e-6
    assert np.max(mag[f >= spec.stopband_hz]) <= -40.0
    assert np.ptp(mag[f <= 2.0]) <= 0.1


def test_lowpass_passes_constant_and_reports_delay():
    x = np.full((50, 2, 3), -7.5)
    y, delay = lowpass_filter(x)
    np.testing.assert_allclose(y, x)
    taps = design_lowpass(FilterSpec(), 1 / 0.032)
    assert delay == pytest.approx((len(taps) - 1) / 2 * 0.032)


def test_lowpass_delays_step_by_group_delay():
    x = np.r_[np.zeros(60), np.ones(60)]
    y, delay = lowpass_filter(x)
    half = np.flatnonzero(y >= 0.5)[0]
    assert half * 0.032 == pytest.approx(60 * 0.032 + delay, abs=0.032)


def test_lowpass_rejects_band_above_nyquist():
    with pytest.raises(ValueError, match="Nyquist"):
        design_lowpass(FilterSpec(5.0, 20.0), 1 / 0.032)


# --- files --------------------------------------------------------------------


def test_schema_copy_matches_package():
    assert json.loads((ROOT / "docs" / "scenario.schema.json").read_text()) == scenario_schema()


def test_scenario_json_round_trip(tmp_path):
    sc = corridor_scenario(3.5, noise_std=0.5, seed=9)
    save_scenario(sc, tmp_path / "s.json")
    assert load_scenario(tmp_path / "s.json") == sc
    assert scenario_from_dict(scenario_to_dict(sc)) == sc


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 5.0), st.floats(0.1, 2.0), st.floats(0.0, 2.0), st.integers(1, 16))
def test_scenario_dict_round_trip_property(width, speed, noise, channels):
    sc = corridor_scenario(width, speed=speed, noise_std=noise, n_channels=channels)
    assert scenario_from_dict(json.loads(json.dumps(scenario_to_dict(sc)))) == sc


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("links"),
        lambda d: d.update(n_channels=0),
        lambda d: d["links"][0].update(tx=[0.0]),
        lambda d: d.update(unknown=1),
        lambda d: d["waypoints"][0].update(speed=-1),
    ],
)
def test_scenario_schema_rejects(mutate):
    d = scenario_to_dict(single_link_scenario())
    mutate(d)
    with pytest.raises(InvalidScenarioError):
        scenario_from_dict(d)


def test_rss_csv_round_trip(tmp_path):
    stream, truth = synthesize_rss(corridor_scenario(2.0), seed=3)
    write_rss_csv(stream, tmp_path / "rss.csv")
    assert read_rss_csv(tmp_path / "rss.csv") == stream
    header = (tmp_path / "rss.csv").read_text().splitlines()[0]
    assert header == "time_s,link_id,channel,rss_db"


def test_truth_csv_round_trip(tmp_path):
    _, truth = synthesize_rss(corridor_scenario(2.0), seed=3)
    write_truth_csv(truth, tmp_path / "truth.csv")
    traj, states, ids = read_truth_csv(tmp_path / "truth.csv")
    np.testing.assert_array_equal(traj.times, truth.times)
    np.testing.assert_array_equal(traj.positions, truth.positions)
    np.testing.assert_array_equal(traj.velocities, truth.velocities)
    np.testing.assert_array_equal(states, truth.states)
    assert ids == truth.link_ids
