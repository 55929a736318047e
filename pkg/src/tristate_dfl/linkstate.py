"""Per-link hidden Markov model and link-line crossing analytics."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .propagation import LinkState
from .stats import STATE_DENSITIES, StateDensity, db_to_linear

# rows are source states: TRANSITION[j, i] = P(s_i at k | s_j at k-1)
DEFAULT_TRANSITION = np.array(
    [
        [0.95, 0.05, 0.0],
        [0.025, 0.95, 0.025],
        [0.0, 0.05, 0.95],
    ]
)
DEFAULT_F0 = np.array([0.7, 0.2, 0.1])


class UnderflowError(ArithmeticError):
    """Every state assigns zero likelihood to the measurement."""


@dataclass(frozen=True)
class HmmModel:
    transition: np.ndarray = field(default_factory=lambda: DEFAULT_TRANSITION.copy())
    f0: np.ndarray = field(default_factory=lambda: DEFAULT_F0.copy())
    densities: tuple[StateDensity, ...] = STATE_DENSITIES

    def __post_init__(self):
        s = np.asarray(self.transition, dtype=float)
        f0 = np.asarray(self.f0, dtype=float)
        q = len(self.densities)
        if s.shape != (q, q) or f0.shape != (q,):
            raise ValueError(f"transition must be {q}x{q} and f0 length {q}")
        if np.any(s < 0) or np.any(f0 < 0):
            raise ValueError("probabilities must be non-negative")
        if not np.allclose(s.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")
        if not math.isclose(f0.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("f0 must sum to 1")
        object.__setattr__(self, "transition", s)
        object.__setattr__(self, "f0", f0)

    @property
    def q_states(self) -> int:
        return len(self.densities)

    def log_likelihoods(self, r_mw: float) -> np.ndarray:
        return np.array([d.logpdf(r_mw) for d in self.densities])


@dataclass(frozen=True)
class ForwardState:
    """Normalised forward variables plus the log of the removed scale.

    ``exp(scale_log) * gamma`` are the unscaled forward variables, and
    ``scale_log`` is the log-likelihood of the measurements so far.
    """

    gamma: np.ndarray
    scale_log: float


def _normalise(unscaled: np.ndarray, loglik: np.ndarray, scale_log: float) -> ForwardState:
    m = np.max(loglik)
    if not np.isfinite(m):
        raise UnderflowError("all state likelihoods vanish")
    g = unscaled * np.exp(loglik - m)
    total = g.sum()
    if not total > 0:
        raise UnderflowError("forward variables vanished")
    return ForwardState(g / total, scale_log + m + math.log(total))


def forward_init(model: HmmModel, r_mw: float) -> ForwardState:
    return _normalise(model.f0, model.log_likelihoods(r_mw), 0.0)


def forward_step(state: ForwardState, model: HmmModel, r_mw: float) -> ForwardState:
    predicted = state.gamma @ model.transition
    return _normalise(predicted, model.log_likelihoods(r_mw), state.scale_log)


def map_state(state: ForwardState) -> LinkState:
    # argmax returns the first maximum, i.e. ties go to the lower state index
    return LinkState(int(np.argmax(state.gamma)))


def filter_states(model: HmmModel, r_mw: Sequence[float]):
    """Run the forward procedure over a whole stream.

    Returns ``(posteriors, states, log_likelihood)`` with posteriors of shape
    ``(K, Q)`` and MAP states of shape ``(K,)``.
    """
    r_mw = np.asarray(r_mw, dtype=float)
    post = np.empty((r_mw.size, model.q_states))
    fs = None
    for k, r in enumerate(r_mw):
        fs = forward_init(model, r) if fs is None else forward_step(fs, model, r)
        post[k] = fs.gamma
    states = np.argmax(post, axis=1).astype(np.int8)
    return post, states, (fs.scale_log if fs is not None else 0.0)


def hmm_input(r_db, channel: int | None = None):
    """Collapse per-channel dB measurements to the HMM's scalar linear input.

    ``r_db`` has channels on its last axis.  By default the channel mean in
    dB is used; ``channel`` selects a single channel instead.
    """
    r_db = np.asarray(r_db, dtype=float)
    scalar = r_db.mean(axis=-1) if channel is None else r_db[..., channel]
    return db_to_linear(scalar)


class LinkStateEstimator:
    """Streaming forward filter for one link."""

    def __init__(self, model: HmmModel | None = None):
        self.model = model or HmmModel()
        self.state: ForwardState | None = None

    def update(self, r_mw: float) -> LinkState:
        if self.state is None:
            self.state = forward_init(self.model, r_mw)
        else:
            self.state = forward_step(self.state, self.model, r_mw)
        return map_state(self.state)


# ---------------------------------------------------------------------------
# crossings


@dataclass(frozen=True)
class CrossingEvent:
    t_cross: float
    direction: int
    link_id: int
    t_start: float
    t_end: float


def _shadow_runs(times, states):
    times = np.asarray(times, dtype=float)
    shadow = np.asarray(states) == LinkState.SHADOWING
    edges = np.diff(np.concatenate([[0], shadow.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return [(float(times[s]), float(times[e])) for s, e in zip(starts, ends)]


def detect_crossings(
    state_sequences,
    link_order: Sequence[int] | None = None,
) -> list[CrossingEvent]:
    """Link-line crossings from MAP state timelines.

    Parameters
    ----------
    state_sequences : mapping or sequence
        ``{link_id: [(time, state), ...]}``, or a single ``[(time, state)]``
        list which is treated as link 0.
    link_order : sequence of int, optional
        Link ids ordered by increasing x.  When given, each event's
        direction is ``+1`` if the next link along +x is shadowed after it
        (or the previous one before it), ``-1`` for the reverse order and
        ``0`` when no neighbouring crossing pairs with it.

    Every maximal run of shadowing yields one event at the run midpoint.
    """
    if not isinstance(state_sequences, Mapping):
        state_sequences = {0: state_sequences}
    events = []
    for link_id, seq in state_sequences.items():
        if len(seq) == 0:
            continue
        times, states = zip(*seq)
        for t0, t1 in _shadow_runs(times, states):
            events.append(CrossingEvent(0.5 * (t0 + t1), 0, link_id, float(t0), float(t1)))
    events.sort(key=lambda e: e.t_cross)
    if link_order is None or len(link_order) < 2:
        return events

    rank = {lid: i for i, lid in enumerate(link_order)}
    out = []
    for i, ev in enumerate(events):
        direction = 0
        # nearest event in time on an adjacent link decides the order
        best = None
        for j, other in enumerate(events):
            if j == i or abs(rank.get(other.link_id, 0) - rank.get(ev.link_id, 0)) != 1:
                continue
            dt = other.t_cross - ev.t_cross
            if best is None or abs(dt) < abs(best[0]):
                best = (dt, rank[other.link_id] - rank[ev.link_id])
        if best is not None and best[0] != 0:
            direction = int(np.sign(best[0]) * best[1])
        out.append(CrossingEvent(ev.t_cross, direction, ev.link_id, ev.t_start, ev.t_end))
    return out


def estimate_velocity(first: CrossingEvent, second: CrossingEvent, link_spacing: float) -> float:
    """Velocity along +x from crossings of two parallel links.

    ``first`` is on the link with the smaller x, ``second`` on the link
    ``link_spacing`` meters further along +x.  Moving toward -x yields a
    negative velocity.
    """
    dt = second.t_cross - first.t_cross
    if dt == 0:
        raise ZeroDivisionError("crossing times coincide")
    return link_spacing / dt
