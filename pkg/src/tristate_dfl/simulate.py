"""Scenario engine: scripted walks, ground-truth labels and RSS synthesis."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import signal

from .geometry import HumanEllipse, LinkGeometry, Point2D, channel_plan
from .propagation import LinkState, geometric_states, three_state_gains


class InvalidScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """A deployment, a person template and the path the person walks.

    ``waypoints`` holds ``(point, speed)`` pairs; the speed applies to the
    segment leaving that point, so the last speed is unused.
    """

    links: tuple[LinkGeometry, ...]
    waypoints: tuple[tuple[Point2D, float], ...]
    person: HumanEllipse = HumanEllipse()
    sampling_interval: float = 0.032
    n_channels: int = 16
    noise_std: float = 0.38
    quantization: float = 0.0
    seed: int = 0
    sensitivity_delta: float = 0.5
    offset_db: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not self.sampling_interval > 0:
            raise InvalidScenarioError("sampling_interval must be positive")
        if self.n_channels < 1:
            raise InvalidScenarioError("n_channels must be >= 1")
        if self.noise_std < 0 or self.quantization < 0:
            raise InvalidScenarioError("noise_std and quantization must be >= 0")
        if not self.links:
            raise InvalidScenarioError("scenario needs at least one link")
        plan = channel_plan(self.n_channels)
        links = tuple(
            l if l.channels == plan else replace(l, channels=plan) for l in self.links
        )
        object.__setattr__(self, "links", links)
        wps = tuple((p if isinstance(p, Point2D) else Point2D(*p), float(v)) for p, v in self.waypoints)
        if len(wps) < 2:
            raise InvalidScenarioError("need at least two waypoints")
        if any(not v > 0 for _, v in wps[:-1]):
            raise InvalidScenarioError("segment speeds must be positive")
        object.__setattr__(self, "waypoints", wps)

    @property
    def slot_interval(self) -> float:
        """Time between consecutive receptions, one channel per slot."""
        return self.sampling_interval / self.n_channels

    @property
    def link_ids(self) -> tuple[int, ...]:
        return tuple(l.link_id for l in self.links)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def at(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Positions and velocities interpolated at times ``t``."""
        t = np.asarray(t, dtype=float)
        pos = np.column_stack([np.interp(t, self.times, self.positions[:, i]) for i in (0, 1)])
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1)
        return pos, self.velocities[idx]


@dataclass(frozen=True)
class GroundTruth:
    trajectory: Trajectory
    states: np.ndarray  # (K, L) LinkState values per reception slot
    link_ids: tuple[int, ...]
    crossings: dict[int, list[float]] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @property
    def positions(self) -> np.ndarray:
        return self.trajectory.positions

    @property
    def velocities(self) -> np.ndarray:
        return self.trajectory.velocities


@dataclass(frozen=True)
class RssStream:
    """Received samples in reception order; every link hears every slot."""

    times: np.ndarray  # (K,)
    channels: np.ndarray  # (K,) 1-based channel index
    rss_db: np.ndarray  # (K, L)
    link_ids: tuple[int, ...]
    n_channels: int

    def __eq__(self, other):
        if not isinstance(other, RssStream):
            return NotImplemented
        return (
            self.link_ids == other.link_ids
            and self.n_channels == other.n_channels
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.rss_db, other.rss_db)
        )


def generate_trajectory(scenario: Scenario) -> Trajectory:
    """Constant-speed piecewise-linear walk sampled at the reception interval."""
    pts = np.array([p.as_array() for p, _ in scenario.waypoints])
    speeds = np.array([v for _, v in scenario.waypoints[:-1]])
    seg = np.diff(pts, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(lengths == 0):
        raise InvalidScenarioError("consecutive waypoints coincide")
    knots = np.concatenate([[0.0], np.cumsum(lengths / speeds)])
    dt = scenario.slot_interval
    n = int(math.floor(knots[-1] / dt + 1e-9)) + 1
    t = np.arange(n) * dt
    i = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(seg) - 1)
    frac = ((t - knots[i]) / (knots[i + 1] - knots[i]))[:, None]
    pos = pts[i] + frac * seg[i]
    vel = seg[i] / lengths[i, None] * speeds[i, None]
    return Trajectory(t, pos, vel)


def label_state(
    link: LinkGeometry,
    ellipse: HumanEllipse,
    lambda_c: float | None = None,
    delta_threshold: float = 0.5,
) -> LinkState:
    """Ground-truth state of ``link`` for a person at ``ellipse.center``.

    ``lambda_c`` is accepted for symmetry with the gain functions; the
    label depends on geometry only.
    """
    s = geometric_states(link, ellipse.center.as_array(), ellipse.shadow_a, delta_threshold)
    return LinkState(int(s[0]))


def _crossing_times(link: LinkGeometry, traj: Trajectory) -> list[float]:
    along, across = link.to_frame(traj.positions)
    out = []
    for k in np.flatnonzero(np.sign(across[:-1]) * np.sign(across[1:]) < 0):
        f = across[k] / (across[k] - across[k + 1])
        if 0 < along[k] + f * (along[k + 1] - along[k]) < link.d_los:
            out.append(float(traj.times[k] + f * (traj.times[k + 1] - traj.times[k])))
    for k in np.flatnonzero(across == 0):
        if 0 < along[k] < link.d_los:
            out.append(float(traj.times[k]))
    return sorted(set(out))


def noiseless_gains(scenario: Scenario, traj: Trajectory | None = None):
    """Model gain per reception slot and link plus the labels that produced it."""
    traj = traj or generate_trajectory(scenario)
    k = len(traj.times)
    chan_idx = np.arange(k) % scenario.n_channels
    gains = np.zeros((k, len(scenario.links)))
    states = np.zeros((k, len(scenario.links)), dtype=np.int8)
    for j, link in enumerate(scenario.links):
        s = geometric_states(
            link, traj.positions, scenario.person.shadow_a, scenario.sensitivity_delta
        )
        states[:, j] = s
        g = three_state_gains(link, traj.positions, scenario.person, s)
        gains[:, j] = g[np.arange(k), chan_idx]
    return gains, states


def synthesize_rss(scenario: Scenario, seed: int | None = None):
    """Simulate the RSS every link reports while the person walks.

    Channels are visited round-robin, one per reception slot.  Returns the
    stream and the matching :class:`GroundTruth`.
    """
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    traj = generate_trajectory(scenario)
    gains, states = noiseless_gains(scenario, traj)
    rss = gains + scenario.offset_db
    if scenario.noise_std > 0:
        rss = rss + rng.normal(0.0, scenario.noise_std, rss.shape)
    if scenario.quantization > 0:
        rss = np.round(rss / scenario.quantization) * scenario.quantization
    channels = np.arange(len(traj.times)) % scenario.n_channels + 1
    stream = RssStream(traj.times, channels, rss, scenario.link_ids, scenario.n_channels)
    truth = GroundTruth(
        traj,
        states,
        scenario.link_ids,
        {l.link_id: _crossing_times(l, traj) for l in scenario.links},
    )
    return stream, truth


def remove_mean(stream: RssStream, window_s: float) -> RssStream:
    """Subtract the per-link, per-channel mean of the first ``window_s`` seconds."""
    calib = stream.times < stream.times[0] + window_s
    out = stream.rss_db.copy()
    for c in range(1, stream.n_channels + 1):
        sel = stream.channels == c
        ref = sel & calib
        if not np.any(ref):
            raise ValueError(f"calibration window holds no samples of channel {c}")
        out[sel] -= stream.rss_db[ref].mean(axis=0)
    return replace(stream, rss_db=out)


def measurement_vectors(stream: RssStream):
    """Group full channel sweeps into per-step measurement vectors.

    Returns ``(times, r)`` where ``r`` has shape ``(M, L, C)`` and each time
    is the mean reception time of its sweep.  A trailing partial sweep and
    samples before the first channel-1 slot are dropped.
    """
    c = stream.n_channels
    first = int(np.argmax(stream.channels == 1))
    m = (len(stream.times) - first) // c
    sl = slice(first, first + m * c)
    r = stream.rss_db[sl].reshape(m, c, -1).transpose(0, 2, 1)
    chans = stream.channels[sl].reshape(m, c)
    if not np.all(chans == np.arange(1, c + 1)):
        raise ValueError("stream is not a round-robin channel sweep")
    return stream.times[sl].reshape(m, c).mean(axis=1), r


# ---------------------------------------------------------------------------
# low-pass prefilter


@dataclass(frozen=True)
class FilterSpec:
    passband_hz: float = 5.0
    stopband_hz: float = 15.0
    attenuation_db: float = 40.0
    ripple_db: float = 0.05


def design_lowpass(spec: FilterSpec, fs: float) -> np.ndarray:
    """Kaiser-window FIR taps meeting ``spec`` at sampling rate ``fs``."""
    nyq = fs / 2
    if not 0 < spec.passband_hz < spec.stopband_hz < nyq:
        raise ValueError(
            f"need 0 < passband < stopband < Nyquist ({nyq:g} Hz), got "
            f"{spec.passband_hz:g}/{spec.stopband_hz:g} Hz"
        )
    # one window sets both ripples; take the tighter of the two
    delta_pass = 10 ** (spec.ripple_db / 20) - 1
    delta_stop = 10 ** (-spec.attenuation_db / 20)
    atten = -20 * math.log10(min(delta_pass, delta_stop))
    width = (spec.stopband_hz - spec.passband_hz) / nyq
    numtaps, beta = signal.kaiserord(atten, width)
    numtaps |= 1  # odd length -> integer group delay
    cutoff = 0.5 * (spec.passband_hz + spec.stopband_hz)
    return signal.firwin(numtaps, cutoff, window=("kaiser", beta), fs=fs)


def lowpass_filter(x, spec: FilterSpec = FilterSpec(), fs: float = 1 / 0.032, axis: int = 0):
    """Causal linear-phase FIR along ``axis``.

    The filter state starts at steady state for the first sample so a
    constant input passes unchanged.  Returns ``(y, group_delay_s)``.
    """
    taps = design_lowpass(spec, fs)
    x = np.moveaxis(np.asarray(x, dtype=float), axis, 0)
    zi = signal.lfilter_zi(taps, 1.0)
    zi = zi.reshape((-1,) + (1,) * (x.ndim - 1)) * x[0]
    y, _ = signal.lfilter(taps, 1.0, x, axis=0, zi=zi)
    return np.moveaxis(y, 0, axis), (len(taps) - 1) / 2 / fs


# ---------------------------------------------------------------------------
# canned deployments


def corridor_scenario(
    width: float,
    crossing_y: float | None = None,
    *,
    direction: int = 1,
    speed: float = 0.5,
    x_span: float = 1.5,
    rx_spacing: float = 1.0,
    **kwargs,
) -> Scenario:
    """One TX on a corridor wall, two RXs ``rx_spacing`` apart on the other.

    The TX sits at the origin and the receivers at ``(-/+ rx_spacing/2,
    width)``.  The person walks along x at height ``crossing_y`` (default
    mid-corridor) from ``-direction * x_span`` to ``+direction * x_span``.
    """
    y = width / 2 if crossing_y is None else crossing_y
    links = (
        LinkGeometry((0.0, 0.0), (-rx_spacing / 2, width), link_id=0),
        LinkGeometry((0.0, 0.0), (rx_spacing / 2, width), link_id=1),
    )
    wps = ((Point2D(-direction * x_span, y), speed), (Point2D(direction * x_span, y), speed))
    kwargs.setdefault("name", f"corridor-{width:g}m")
    return Scenario(links, wps, **kwargs)


def single_link_scenario(
    length: float = 3.0,
    crossing_y: float | None = None,
    *,
    direction: int = 1,
    speed: float = 0.5,
    x_span: float = 1.5,
    **kwargs,
) -> Scenario:
    """A single link along the y axis crossed perpendicularly."""
    y = length / 2 if crossing_y is None else crossing_y
    links = (LinkGeometry((0.0, 0.0), (0.0, length), link_id=0),)
    wps = ((Point2D(-direction * x_span, y), speed), (Point2D(direction * x_span, y), speed))
    kwargs.setdefault("name", f"link-{length:g}m")
    return Scenario(links, wps, **kwargs)


# ---------------------------------------------------------------------------
# files


def scenario_schema() -> dict:
    text = resources.files("tristate_dfl").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


_PERSON_FIELDS = (
    "a_semi_minor",
    "b_semi_major",
    "psi0",
    "eps_r",
    "eta",
    "rho",
    "orientation",
    "shadow_a",
)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "links": [
            {"id": l.link_id, "tx": [l.p_tx.x, l.p_tx.y], "rx": [l.p_rx.x, l.p_rx.y]}
            for l in s.links
        ],
        "person": {k: getattr(s.person, k) for k in _PERSON_FIELDS},
        "waypoints": [{"x": p.x, "y": p.y, "speed": v} for p, v in s.waypoints],
        "sampling_interval": s.sampling_interval,
        "n_channels": s.n_channels,
        "noise_std": s.noise_std,
        "quantization": s.quantization,
        "seed": s.seed,
        "sensitivity_delta": s.sensitivity_delta,
        "offset_db": s.offset_db,
    }


def scenario_from_dict(d: dict) -> Scenario:
    import jsonschema

    try:
        jsonschema.validate(d, scenario_schema())
    except jsonschema.ValidationError as exc:
        raise InvalidScenarioError(f"invalid scenario: {exc.message}") from exc
    n_channels = d.get("n_channels", 16)
    links = tuple(
        LinkGeometry(tuple(l["tx"]), tuple(l["rx"]), channel_plan(n_channels), l.get("id", i))
        for i, l in enumerate(d["links"])
    )
    person = HumanEllipse(**d.get("person", {}))
    wps = tuple((Point2D(w["x"], w["y"]), w.get("speed", 0.5)) for w in d["waypoints"])
    keys = ("sampling_interval", "noise_std", "quantization", "seed", "sensitivity_delta", "offset_db", "name")
    return Scenario(links, wps, person, n_channels=n_channels, **{k: d[k] for k in keys if k in d})


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n")


def write_rss_csv(stream: RssStream, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "link_id", "channel", "rss_db"])
        for k in range(len(stream.times)):
            for j, lid in enumerate(stream.link_ids):
                w.writerow([repr(float(stream.times[k])), lid, int(stream.channels[k]), repr(float(stream.rss_db[k, j]))])


def read_rss_csv(path, n_channels: int | None = None) -> RssStream:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    link_ids = tuple(dict.fromkeys(int(r["link_id"]) for r in rows))
    n_links = len(link_ids)
    times = np.array([float(r["time_s"]) for r in rows[::n_links]])
    channels = np.array([int(r["channel"]) for r in rows[::n_links]])
    rss = np.array([float(r["rss_db"]) for r in rows]).reshape(-1, n_links)
    return RssStream(times, channels, rss, link_ids, n_channels or int(channels.max()))


def write_truth_csv(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "px", "py", "vx", "vy"] + [f"state_{lid}" for lid in truth.link_ids])
        tr = truth.trajectory
        for k in range(len(tr.times)):
            w.writerow(
                [repr(float(v)) for v in (tr.times[k], *tr.positions[k], *tr.velocities[k])]
                + [int(s) for s in truth.states[k]]
            )


def read_truth_csv(path):
    """Returns ``(trajectory, states, link_ids)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    link_ids = tuple(int(h.split("_", 1)[1]) for h in header[5:])
    num = np.array([[float(v) for v in r[:5]] for r in rows]).reshape(-1, 5)
    states = np.array([[int(v) for v in r[5:]] for r in rows], dtype=np.int8).reshape(len(rows), -1)
    return Trajectory(num[:, 0], num[:, 1:3], num[:, 3:5]), states, link_ids
