"""Particle-filter tracking over a constant-velocity model.

State vectors are ordered ``(px, vx, py, vy)``.  A :class:`Tracker` runs
one forward HMM per link and only keeps the particle filter alive while
some link reports a fade: it starts when a link enters shadowing and stops
once every link is back to non-fading.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import HumanEllipse, LinkGeometry
from .linkstate import HmmModel, LinkStateEstimator, hmm_input
from .propagation import MODELS, LinkState, model_gains

# below this log-likelihood every particle's likelihood underflows a double
_UNDERFLOW_LOG = float(np.log(np.finfo(float).tiny))


@dataclass(frozen=True)
class KinematicState:
    px: float
    vx: float
    py: float
    vy: float

    def __post_init__(self):
        for name in ("px", "vx", "py", "vy"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.vx, self.py, self.vy])

    @classmethod
    def from_array(cls, x) -> "KinematicState":
        return cls(*np.asarray(x, dtype=float)[:4])


@dataclass
class ParticleSet:
    """Particles ``(N, 4)`` with weights and the generator that moves them."""

    particles: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator
    diverged: bool = False

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.particles.ndim != 2 or self.particles.shape[1] != 4 or len(self.particles) < 1:
            raise ValueError("particles must have shape (N, 4) with N >= 1")
        if self.weights.shape != (len(self.particles),) or np.any(self.weights < 0):
            raise ValueError("need one non-negative weight per particle")

    @property
    def n(self) -> int:
        return len(self.particles)

    @property
    def positions(self) -> np.ndarray:
        return self.particles[:, [0, 2]]


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker settings.

    ``init_shift`` is how far particles start behind the shadowed link; it
    defaults to the ellipse's semi-minor axis.  ``sensitivity_delta`` is
    the excess path length beyond which the three-state observation model
    predicts no fade.
    """

    n_particles: int = 1000
    process_noise_std: tuple[float, float] = (0.2, 0.6)
    meas_noise_std: float = 1.5
    ellipse: HumanEllipse = HumanEllipse()
    sampling_interval: float = 0.032
    model: str = "three-state"
    sensitivity_delta: float | None = 0.5
    init_shift: float | None = None
    reflection_grid: int = 64
    reflection_method: str = "newton"

    def __post_init__(self):
        object.__setattr__(self, "process_noise_std", tuple(float(w) for w in self.process_noise_std))
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if len(self.process_noise_std) != 2 or min(self.process_noise_std) < 0:
            raise ValueError("process_noise_std must be two non-negative values")
        if not self.meas_noise_std > 0 or not self.sampling_interval > 0:
            raise ValueError("meas_noise_std and sampling_interval must be positive")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")

    @property
    def shift(self) -> float:
        return self.ellipse.a_semi_minor if self.init_shift is None else self.init_shift


def transition_matrices(ts: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis constant-velocity ``F`` (2x2) and noise gain ``G`` (2,)."""
    return np.array([[1.0, ts], [0.0, 1.0]]), np.array([ts * ts / 2.0, ts])


def predict(ps: ParticleSet, cfg: TrackerConfig) -> ParticleSet:
    f, g = transition_matrices(cfg.sampling_interval)
    x = ps.particles.copy()
    for axis, w in zip((0, 2), cfg.process_noise_std):
        xv = x[:, axis : axis + 2] @ f.T
        if w > 0:
            xv += ps.rng.normal(0.0, w, ps.n)[:, None] * g
        x[:, axis : axis + 2] = xv
    return replace(ps, particles=x)


def predicted_observations(positions, links: Sequence[LinkGeometry], cfg: TrackerConfig) -> np.ndarray:
    """Model gain for every particle, link and channel, shape ``(N, L, C)``."""
    delta = cfg.sensitivity_delta if cfg.model == "three-state" else None
    return np.stack(
        [
            model_gains(
                cfg.model,
                link,
                positions,
                cfg.ellipse,
                n_grid=cfg.reflection_grid,
                method=cfg.reflection_method,
                delta_threshold=delta,
            )
            for link in links
        ],
        axis=1,
    )


def log_likelihoods(measurements, z, sigma: float) -> np.ndarray:
    """Gaussian log-likelihood up to a constant, summed over links and channels."""
    res = (np.asarray(measurements, dtype=float)[None] - z) / sigma
    return -0.5 * np.sum(res * res, axis=tuple(range(1, res.ndim)))


def weight_update(
    ps: ParticleSet, measurements, links: Sequence[LinkGeometry], cfg: TrackerConfig
) -> ParticleSet:
    """Reweight by the likelihood of ``measurements`` (``(L, C)`` in dB).

    If every particle's likelihood underflows, the weights fall back to
    uniform and ``diverged`` is set.
    """
    m = np.asarray(measurements, dtype=float)
    if m.shape != (len(links), links[0].n_channels):
        raise ValueError(f"measurements must have shape {(len(links), links[0].n_channels)}")
    ll = log_likelihoods(m, predicted_observations(ps.positions, links, cfg), cfg.meas_noise_std)
    with np.errstate(divide="ignore"):
        ll = ll + np.log(ps.weights)
    top = np.max(ll)
    if not np.isfinite(top) or top < _UNDERFLOW_LOG:
        return replace(ps, weights=np.full(ps.n, 1.0 / ps.n), diverged=True)
    w = np.exp(ll - top)
    return replace(ps, weights=w / w.sum(), diverged=False)


def systematic_indices(weights, u0: float) -> np.ndarray:
    """Indices drawn by systematic resampling with offset ``u0`` in [0, 1)."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    return np.searchsorted(cdf, (u0 + np.arange(n)) / n, side="right")


def resample(ps: ParticleSet) -> ParticleSet:
    idx = systematic_indices(ps.weights, ps.rng.random())
    return replace(ps, particles=ps.particles[idx], weights=np.full(ps.n, 1.0 / ps.n))


def estimate(ps: ParticleSet) -> KinematicState:
    return KinematicState.from_array(ps.particles.mean(axis=0))


def initialize(
    link: LinkGeometry, direction: int | None, cfg: TrackerConfig, rng: np.random.Generator
) -> ParticleSet:
    """Spread particles uniformly on the LoS of ``link``.

    ``direction`` is ``+1`` for a person moving toward +x and ``-1`` for
    -x.  Positions are shifted back along x against the motion and ``vx``
    drawn from (0, 1] m/s with the motion's sign.  With an unknown
    direction (``None`` or 0) positions stay on the LoS and ``vx`` is drawn
    from [-1, 1].
    """
    n = cfg.n_particles
    t = rng.random(n)[:, None]
    pos = link.p_tx.as_array() + t * (link.p_rx.as_array() - link.p_tx.as_array())
    if direction:
        sign = 1.0 if direction > 0 else -1.0
        pos[:, 0] -= sign * cfg.shift
        vx = sign * (1.0 - rng.random(n))
    else:
        vx = rng.uniform(-1.0, 1.0, n)
    particles = np.column_stack([pos[:, 0], vx, pos[:, 1], np.zeros(n)])
    return ParticleSet(particles, np.full(n, 1.0 / n), rng)


def filter_step(
    ps: ParticleSet, measurements, links: Sequence[LinkGeometry], cfg: TrackerConfig, *, advance=True
) -> tuple[ParticleSet, KinematicState]:
    """One predict / update / resample / estimate cycle."""
    if advance:
        ps = predict(ps, cfg)
    ps = weight_update(ps, measurements, links, cfg)
    diverged = ps.diverged
    ps = resample(ps)
    ps.diverged = diverged
    return ps, estimate(ps)


# ---------------------------------------------------------------------------
# start / stop control


@dataclass
class ControllerState:
    active: bool = False
    particles: ParticleSet | None = None
    divergences: int = 0


def approach_direction(links: Sequence[LinkGeometry], index: int) -> int:
    """Motion direction implied by ``links[index]`` being shadowed first.

    A link lying at smaller x than the others is reached first by someone
    walking toward +x.  Returns 0 when the layout does not tell.
    """
    if len(links) < 2:
        return 0
    x = np.array([l.midpoint[0] for l in links])
    others = np.delete(x, index).mean()
    return int(np.sign(others - x[index]))


def track_step(
    ctrl: ControllerState,
    states: Sequence[int],
    measurements,
    links: Sequence[LinkGeometry],
    cfg: TrackerConfig,
    rng: np.random.Generator,
    direction: int | None = None,
) -> tuple[KinematicState | None, ControllerState]:
    """Advance the start/stop logic by one step.

    Idle: start when any link reports shadowing and return the first
    estimate.  Active: stop when every link reports non-fading, otherwise
    run one filter cycle.
    """
    states = [LinkState(int(s)) for s in states]
    if not ctrl.active:
        shadowed = [i for i, s in enumerate(states) if s is LinkState.SHADOWING]
        if not shadowed:
            return None, ctrl
        i = shadowed[0]
        d = approach_direction(links, i) if direction is None else direction
        ps = initialize(links[i], d, cfg, rng)
        ps, est = filter_step(ps, measurements, links, cfg, advance=False)
        return est, ControllerState(True, ps, ctrl.divergences + ps.diverged)
    if all(s is LinkState.NON_FADING for s in states):
        return None, ControllerState(False, None, ctrl.divergences)
    ps, est = filter_step(ctrl.particles, measurements, links, cfg)
    return est, ControllerState(True, ps, ctrl.divergences + ps.diverged)


@dataclass
class TrackStep:
    states: tuple[LinkState, ...]
    estimate: KinematicState | None
    particles: ParticleSet | None


class Tracker:
    """Streaming tracker: per-link HMMs feeding the gated particle filter.

    Parameters
    ----------
    links : sequence of LinkGeometry
    cfg : TrackerConfig
    seed : int
        Seeds every random draw of the filter.
    hmm : HmmModel, optional
    direction : int, optional
        Known motion direction; inferred from the layout when omitted.
    """

    def __init__(
        self,
        links: Sequence[LinkGeometry],
        cfg: TrackerConfig = TrackerConfig(),
        seed: int = 0,
        hmm: HmmModel | None = None,
        direction: int | None = None,
    ):
        self.links = tuple(links)
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.estimators = [LinkStateEstimator(hmm) for _ in self.links]
        self.direction = direction
        self.ctrl = ControllerState()

    def step(self, measurements) -> TrackStep:
        """Process one ``(L, C)`` dB measurement vector."""
        m = np.asarray(measurements, dtype=float)
        r_mw = hmm_input(m)
        states = tuple(e.update(float(r)) for e, r in zip(self.estimators, r_mw))
        est, self.ctrl = track_step(
            self.ctrl, states, m, self.links, self.cfg, self.rng, self.direction
        )
        return TrackStep(states, est, self.ctrl.particles if self.ctrl.active else None)
