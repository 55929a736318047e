"""Monte-Carlo tracking campaigns over simulated scenarios.

A run synthesizes one noisy RSS stream from a :class:`Scenario` and feeds
it to a :class:`Tracker`.  Parameter overrides only reach the tracker; the
simulated world stays fixed, so a sweep measures how mis-set parameters
hurt tracking.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import (
    SENSITIVITY_DELTA,
    TrackReport,
    enhancement,
    error_std,
    inside_count,
    mae,
    sensitivity_area,
)
from .propagation import MODELS
from .simulate import (
    FilterSpec,
    Scenario,
    lowpass_filter,
    measurement_vectors,
    synthesize_rss,
)
from .tracking import Tracker, TrackerConfig

SWEEP_PARAMS = ("sigma_p", "eps_r", "psi0", "rho", "A")

_ELLIPSE_KEYS = {
    "A": "a_semi_minor",
    "B": "b_semi_major",
    "psi0": "psi0",
    "eps_r": "eps_r",
    "eta": "eta",
    "rho": "rho",
    "shadow_a": "shadow_a",
}
OVERRIDE_KEYS = tuple(_ELLIPSE_KEYS) + ("N", "w", "sigma_p", "init_shift", "T_s", "C", "prefilter")


@dataclass(frozen=True)
class RunSetup:
    """Everything a campaign needs besides the seed.

    With ``auto_shift`` and no explicit ``tracker.init_shift``, the initial
    particle offset is calibrated with :func:`detection_offset` instead of
    defaulting to the ellipse's semi-minor axis.
    """

    scenario: Scenario
    tracker: TrackerConfig = TrackerConfig()
    prefilter: bool = False
    filter_spec: FilterSpec = FilterSpec()
    auto_shift: bool = True


def apply_override(setup: RunSetup, key: str, value) -> RunSetup:
    """Return ``setup`` with one named parameter replaced.

    Person parameters, ``N``, ``w``, ``sigma_p`` and ``init_shift`` change
    the tracker only.  ``T_s`` and ``C`` change the scenario as well since
    they define the measurement stream itself.
    """
    cfg, sc = setup.tracker, setup.scenario
    if key in _ELLIPSE_KEYS:
        cfg = replace(cfg, ellipse=replace(cfg.ellipse, **{_ELLIPSE_KEYS[key]: float(value)}))
    elif key == "N":
        cfg = replace(cfg, n_particles=int(value))
    elif key == "w":
        vals = [float(v) for v in str(value).split(",")] if isinstance(value, str) else list(value)
        if len(vals) == 1:
            vals = vals * 2
        cfg = replace(cfg, process_noise_std=tuple(vals))
    elif key == "sigma_p":
        cfg = replace(cfg, meas_noise_std=float(value))
    elif key == "init_shift":
        if str(value).lower() == "auto":
            return replace(setup, tracker=replace(cfg, init_shift=None), auto_shift=True)
        cfg = replace(cfg, init_shift=float(value))
    elif key == "T_s":
        cfg = replace(cfg, sampling_interval=float(value))
        sc = replace(sc, sampling_interval=float(value))
    elif key == "C":
        sc = replace(sc, n_channels=int(value))
    elif key == "prefilter":
        flag = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
        return replace(setup, prefilter=flag)
    else:
        raise ValueError(f"unknown parameter {key!r}; expected one of {OVERRIDE_KEYS}")
    return replace(setup, scenario=sc, tracker=cfg)


@dataclass(frozen=True)
class RunResult:
    """Per-step record of one tracking run.

    ``estimates`` holds ``(px, vx, py, vy)`` and is NaN while the tracker is
    idle; ``inside`` is -1 on idle steps.
    """

    model: str
    seed: int
    times: np.ndarray
    truth: np.ndarray
    estimates: np.ndarray
    states: np.ndarray
    true_states: np.ndarray
    inside: np.ndarray
    n_particles: int
    diverged: int
    link_ids: tuple[int, ...]

    @property
    def active(self) -> np.ndarray:
        return ~np.isnan(self.estimates[:, 0])

    def report(self, d_los: float) -> TrackReport:
        act = self.active
        area = sensitivity_area(d_los, SENSITIVITY_DELTA[self.model])
        if not np.any(act):
            nan = float("nan")
            return TrackReport(nan, nan, nan, nan, nan, 0.0, area, 0, self.diverged, self.model)
        est = self.estimates[act][:, [0, 2]]
        tru = self.truth[act]
        ex, ey = mae(tru, est)
        sx, sy = error_std(tru, est)
        pct = 100.0 * self.inside[act].sum() / (act.sum() * self.n_particles)
        return TrackReport(ex, ey, sx, sy, float(pct), 0.0, area, int(act.sum()), self.diverged, self.model)


def _measurements(setup: RunSetup, stream):
    times, r = measurement_vectors(stream)
    if setup.prefilter:
        r, delay = lowpass_filter(r, setup.filter_spec, 1.0 / setup.scenario.sampling_interval, axis=0)
        # filtered samples describe where the person was one group delay ago
        times = times - delay
    return times, r


def run_single(setup: RunSetup, model: str | None = None, seed: int = 0) -> RunResult:
    """Simulate one crossing and track it with the chosen observation model."""
    setup = resolve_setup(setup)
    cfg = setup.tracker if model is None else replace(setup.tracker, model=model)
    sc = setup.scenario
    stream, truth = synthesize_rss(sc, seed=[seed, 0])
    times, r = _measurements(setup, stream)
    pos, _ = truth.trajectory.at(times)
    idx = np.clip(np.searchsorted(truth.times, times), 0, len(truth.times) - 1)
    true_states = truth.states[idx]

    tracker = Tracker(sc.links, cfg, seed=[seed, 1])
    m = len(times)
    est = np.full((m, 4), np.nan)
    states = np.zeros((m, len(sc.links)), dtype=np.int8)
    inside = np.full(m, -1, dtype=np.int64)
    for k in range(m):
        step = tracker.step(r[k])
        states[k] = step.states
        if step.estimate is not None:
            est[k] = step.estimate.as_array()
            inside[k] = inside_count(step.particles.positions, sc.person.at(pos[k]))
    return RunResult(
        cfg.model,
        seed,
        times,
        pos,
        est,
        states,
        true_states,
        inside,
        cfg.n_particles,
        tracker.ctrl.divergences,
        sc.link_ids,
    )


def detection_offset(setup: RunSetup, runs: int = 20, seed: int = 1_000_000) -> float:
    """Median distance from the LoS at which the HMM first reports shadowing.

    Simulates ``runs`` crossings of the scenario with seeds disjoint from
    campaign seeds and, for every link that gets shadowed, takes the true
    perpendicular offset at the first shadowing step.  This is the offset
    the tracker's initial particle cloud should sit at.
    """
    from .linkstate import LinkStateEstimator, hmm_input
    from .propagation import LinkState

    sc = setup.scenario
    offsets = []
    for i in range(runs):
        stream, truth = synthesize_rss(sc, seed=[seed + i, 2])
        times, r = _measurements(setup, stream)
        pos, _ = truth.trajectory.at(times)
        for j, link in enumerate(sc.links):
            est = LinkStateEstimator()
            prev = None
            for k in range(len(times)):
                s = est.update(hmm_input(r[k, j]))
                if s is LinkState.SHADOWING and prev is not LinkState.SHADOWING:
                    offsets.append(abs(float(link.to_frame(pos[k])[1])))
                    break
                prev = s
    if not offsets:
        raise ValueError("no link was ever reported shadowed")
    return float(np.median(offsets))


@functools.lru_cache(maxsize=32)
def _cached_offset(scenario: Scenario, prefilter: bool, filter_spec: FilterSpec) -> float:
    return detection_offset(RunSetup(scenario, prefilter=prefilter, filter_spec=filter_spec))


def resolve_setup(setup: RunSetup) -> RunSetup:
    """Fix the initial particle offset if it is left to calibration."""
    if not setup.auto_shift or setup.tracker.init_shift is not None:
        return setup
    shift = _cached_offset(setup.scenario, setup.prefilter, setup.filter_spec)
    return replace(setup, tracker=replace(setup.tracker, init_shift=shift))


def _mean_link_length(sc: Scenario) -> float:
    return float(np.mean([l.d_los for l in sc.links]))


@dataclass(frozen=True)
class CampaignResult:
    model: str
    runs: tuple[RunResult, ...]
    reports: tuple[TrackReport, ...]
    mean: TrackReport
    std: TrackReport

    @property
    def tracked(self) -> int:
        return sum(r.n_steps > 0 for r in self.reports)


def _summarise(model: str, runs, d_los: float) -> CampaignResult:
    reports = tuple(r.report(d_los) for r in runs)

    def agg(fn, attr):
        vals = np.array([getattr(r, attr) for r in reports], dtype=float)
        vals = vals[~np.isnan(vals)]
        return float(fn(vals)) if vals.size else float("nan")

    keys = ("eps_x", "eps_y", "sigma_x", "sigma_y", "eps_pct")
    area = sensitivity_area(d_los, SENSITIVITY_DELTA[model])
    steps = sum(r.n_steps for r in reports)
    div = sum(r.diverged for r in reports)
    mean = TrackReport(*(agg(np.mean, k) for k in keys), 0.0, area, steps, div, model)
    std = TrackReport(*(agg(np.std, k) for k in keys), 0.0, 0.0, steps, div, model)
    return CampaignResult(model, tuple(runs), reports, mean, std)


def _run_job(args):
    setup, model, seed = args
    return run_single(setup, model, seed)


def run_campaign(
    setup: RunSetup,
    models: Sequence[str] = MODELS,
    runs: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> dict[str, CampaignResult]:
    """Monte-Carlo runs per model; run ``i`` uses seed ``seed + i`` for every model.

    Sharing seeds across models means each model sees the same noise
    realisations.  The relative enhancement is filled in across models.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    for m in models:
        if m not in MODELS:
            raise ValueError(f"unknown model {m!r}; expected one of {MODELS}")
    setup = resolve_setup(setup)
    jobs_list = [(setup, m, seed + i) for m in models for i in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_job, jobs_list, chunksize=max(1, len(jobs_list) // (4 * jobs))))
    else:
        results = [_run_job(j) for j in jobs_list]
    d_los = _mean_link_length(setup.scenario)
    out = {m: _summarise(m, results[i * runs : (i + 1) * runs], d_los) for i, m in enumerate(models)}

    pct = {m: c.mean.eps_pct for m, c in out.items()}
    if len(pct) > 1 and not any(math.isnan(v) for v in pct.values()):
        gain = enhancement(pct)
        out = {m: replace(c, mean=replace(c.mean, eps_r=gain[m])) for m, c in out.items()}
    return out


def frange(start: float, step: float, stop: float) -> list[float]:
    """Inclusive arithmetic grid; tolerant to floating-point drift at ``stop``."""
    if step == 0 or (stop - start) / step < 0:
        raise ValueError("step must move start toward stop")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(n + 1)]


def sweep_parameter(
    setup: RunSetup,
    name: str,
    values: Sequence[float],
    models: Sequence[str] = MODELS,
    runs: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> list[dict]:
    """One campaign per grid value; returns plot-ready rows."""
    if name not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {name!r}; expected one of {SWEEP_PARAMS}")
    rows = []
    for v in values:
        camp = run_campaign(apply_override(setup, name, v), models, runs, seed, jobs)
        for m, c in camp.items():
            rows.append(
                {
                    "parameter": name,
                    "value": float(v),
                    "model": m,
                    "eps_x": c.mean.eps_x,
                    "eps_y": c.mean.eps_y,
                    "eps_pct": c.mean.eps_pct,
                    "eps_pct_std": c.std.eps_pct,
                    "eps_r": c.mean.eps_r,
                    "tracked_runs": c.tracked,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# artifacts


def _fmt(v) -> str:
    return repr(float(v))


def write_trajectory_csv(run: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "est_px", "est_vx", "est_py", "est_vy", "true_px", "true_py", "inside"])
        for k in range(len(run.times)):
            w.writerow(
                [_fmt(run.times[k]), *(_fmt(v) for v in run.estimates[k]), *(_fmt(v) for v in run.truth[k]), int(run.inside[k])]
            )


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * len(header)
    out = {h: np.array(c, dtype=float) for h, c in zip(header, cols)}
    out["inside"] = out["inside"].astype(np.int64)
    return out


def write_states_csv(run: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["time_s"]
            + [f"hmm_state_{i}" for i in run.link_ids]
            + [f"true_state_{i}" for i in run.link_ids]
        )
        for k in range(len(run.times)):
            w.writerow([_fmt(run.times[k]), *map(int, run.states[k]), *map(int, run.true_states[k])])


def read_states_csv(path):
    """Returns ``(times, hmm_states, true_states, link_ids)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    n = (len(header) - 1) // 2
    link_ids = tuple(int(h.rsplit("_", 1)[1]) for h in header[1 : 1 + n])
    times = np.array([float(r[0]) for r in rows])
    ints = np.array([[int(v) for v in r[1:]] for r in rows], dtype=np.int8).reshape(len(rows), 2 * n)
    return times, ints[:, :n], ints[:, n:], link_ids


def summary_dict(campaign: dict[str, CampaignResult], meta: dict | None = None) -> dict:
    return {
        **(meta or {}),
        "models": {
            m: {
                "mean": c.mean.to_dict(),
                "std": c.std.to_dict(),
                "tracked_runs": c.tracked,
                "runs": len(c.runs),
                "diverged_steps": c.mean.diverged,
            }
            for m, c in campaign.items()
        },
    }


def write_summary(campaign: dict[str, CampaignResult], out_dir, meta: dict | None = None) -> None:
    from .metrics import format_table

    out_dir = Path(out_dir)
    (out_dir / "summary.json").write_text(
        json.dumps(summary_dict(campaign, meta), indent=2, sort_keys=True) + "\n"
    )
    means = [c.mean for c in campaign.values()]
    stds = [c.std for c in campaign.values()]
    (out_dir / "summary.txt").write_text(format_table(means, stds))


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text())


def write_run_artifacts(run: RunResult, report: TrackReport, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"run_{run.seed:05d}"
    write_trajectory_csv(run, out_dir / f"{stem}_trajectory.csv")
    write_states_csv(run, out_dir / f"{stem}_states.csv")
    (out_dir / f"{stem}_report.json").write_text(report.to_json() + "\n")


SWEEP_FIELDS = ("parameter", "value", "model", "eps_x", "eps_y", "eps_pct", "eps_pct_std", "eps_r", "tracked_runs")


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {k: float(v) for k, v in r.items() if k not in ("parameter", "model", "tracked_runs")}
        d.update(parameter=r["parameter"], model=r["model"], tracked_runs=int(r["tracked_runs"]))
        out.append(d)
    return out
