"""Deterministic RSS gain models.

The three-state model maps a person's position to a mean-removed channel
gain in dB: zero when the link is not faded, a single-bounce reflection
model near the LoS and a line-integral shadowing model when the person
obstructs it.  Two empirical excess-path-length models serve as benchmarks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import (
    HumanEllipse,
    LinkGeometry,
    excess_path_length,
    fresnel_radius,
    reflection_point,
    reflection_points,
)

__all__ = [
    "HumanEllipse",
    "LinkState",
    "BenchmarkParams",
    "EXPONENTIAL",
    "EXPONENTIAL_RAYLEIGH",
    "OutOfSegmentError",
    "fresnel_reflection_coeff",
    "amplitude_ratio",
    "reflection_model_db",
    "reflection_gain",
    "ellipse_projection",
    "shadowing_gain",
    "three_state_gain",
    "exponential_gain",
    "exponential_rayleigh_gain",
    "geometric_states",
    "three_state_gains",
    "model_gains",
    "MODELS",
]

MODELS = ("three-state", "exponential", "exponential-rayleigh")


class OutOfSegmentError(ValueError):
    """The person's projection does not fall inside the LoS segment."""


class LinkState(enum.IntEnum):
    """Temporal state of a link; the value doubles as the HMM state index."""

    NON_FADING = 0
    REFLECTION = 1
    SHADOWING = 2

    @property
    def label(self) -> str:
        return f"s{self.value + 1}"


@dataclass(frozen=True)
class BenchmarkParams:
    """Constants of ``phi1 exp(-d/lam1) + phi2 d exp(-d^2/lam2)``."""

    kind: str
    phi1: float
    lam1: float
    phi2: float | None = None
    lam2: float | None = None

    def __post_init__(self):
        if self.kind not in ("exponential", "exponential-rayleigh"):
            raise ValueError(f"unknown benchmark kind {self.kind!r}")
        if not self.lam1 > 0:
            raise ValueError("decay constants must be positive")
        if self.kind == "exponential-rayleigh":
            if self.phi2 is None or self.lam2 is None or not self.lam2 > 0:
                raise ValueError("exponential-rayleigh needs phi2 and a positive lam2")


EXPONENTIAL = BenchmarkParams("exponential", -16.77, 0.026)
EXPONENTIAL_RAYLEIGH = BenchmarkParams("exponential-rayleigh", -15.77, 0.065, 142.71, 0.010)


def fresnel_reflection_coeff(theta_i, eps_r):
    """Perpendicular-polarisation Fresnel coefficient at grazing angle ``theta_i``."""
    s = np.sin(theta_i)
    root = np.sqrt(eps_r - np.cos(theta_i) ** 2)
    return (s - root) / (s + root)


def amplitude_ratio(psi0, psi_perp, d_los, delta_r, eta):
    """Reflected-to-LoS amplitude ratio, signed as ``psi0 * psi_perp``."""
    return psi0 * psi_perp * (d_los / (d_los + delta_r)) ** (eta / 2.0)


def reflection_model_db(psi, phi):
    """``10 log10(psi^2 + 2 psi cos(phi) + 1)``."""
    return 10.0 * np.log10(psi * psi + 2.0 * psi * np.cos(phi) + 1.0)


def _reflection_db(psi_signed, delta_r, lambda_c):
    # a negative ratio is folded into the phase so the magnitude stays in [0, 1)
    phase = 2.0 * np.pi * delta_r / lambda_c + np.where(psi_signed < 0, np.pi, 0.0)
    return reflection_model_db(np.abs(psi_signed), phase)


def reflection_gain(link: LinkGeometry, ellipse: HumanEllipse, lambda_c: float) -> float:
    sol = reflection_point(link, ellipse)
    psi_perp = fresnel_reflection_coeff(sol.theta_i, ellipse.eps_r)
    psi = amplitude_ratio(ellipse.psi0, psi_perp, link.d_los, sol.delta_r, ellipse.eta)
    return float(_reflection_db(psi, sol.delta_r, lambda_c))


def ellipse_projection(a, b, rho, omega, x_prime):
    """Line integral of a uniform elliptic attenuation field.

    ``a`` and ``b`` are the semi-axes, ``omega`` the projection angle and
    ``x_prime`` the signed offset of the integration line.
    """
    a2 = a * a * np.cos(omega) ** 2 + b * b * np.sin(omega) ** 2
    x2 = np.asarray(x_prime, dtype=float) ** 2
    inside = x2 <= a2
    value = np.where(inside, 2.0 * rho * a * b / a2 * np.sqrt(np.where(inside, a2 - x2, 0.0)), 0.0)
    return float(value) if value.ndim == 0 else value


def shadowing_gain(link: LinkGeometry, ellipse: HumanEllipse, lambda_c: float) -> float:
    """Shadowing loss of a person whose center projects inside the LoS segment."""
    along, across = link.to_frame(ellipse.center.as_array())
    if not 0.0 < along < link.d_los:
        raise OutOfSegmentError(
            f"projection at {along:.6g} m is outside the (0, {link.d_los:.6g}) m segment"
        )
    return float(_shadowing_db(link, ellipse, lambda_c, along, across))


def _shadowing_db(link, ellipse, lambda_c, along, across):
    width = ellipse.shadow_a
    kappa = width / fresnel_radius(1, lambda_c, along, link.d_los - along)
    return -kappa * ellipse_projection(width, ellipse.b_semi_major, ellipse.rho, 0.0, across)


def three_state_gain(
    link: LinkGeometry, ellipse: HumanEllipse, lambda_c: float, state: LinkState
) -> float:
    state = LinkState(state)
    if state is LinkState.NON_FADING:
        return 0.0
    if state is LinkState.REFLECTION:
        return reflection_gain(link, ellipse, lambda_c)
    return shadowing_gain(link, ellipse, lambda_c)


def _check_delta(delta):
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("excess path length must be non-negative")
    return delta


def exponential_gain(delta, params: BenchmarkParams = EXPONENTIAL):
    delta = _check_delta(delta)
    g = params.phi1 * np.exp(-delta / params.lam1)
    return float(g) if g.ndim == 0 else g


def exponential_rayleigh_gain(delta, params: BenchmarkParams = EXPONENTIAL_RAYLEIGH):
    delta = _check_delta(delta)
    g = params.phi1 * np.exp(-delta / params.lam1) + params.phi2 * delta * np.exp(
        -delta * delta / params.lam2
    )
    return float(g) if g.ndim == 0 else g


# ---------------------------------------------------------------------------
# batch evaluation used by the simulator and the tracker


def geometric_states(
    link: LinkGeometry,
    centers,
    shadow_half_width: float,
    delta_threshold: float | None = None,
) -> np.ndarray:
    """Link state implied by position alone.

    Shadowing when the perpendicular offset is within ``shadow_half_width``
    and its foot lies inside the segment.  Otherwise reflection, or
    non-fading once the excess path length exceeds ``delta_threshold``.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    along, across = link.to_frame(centers)
    shadow = (np.abs(across) <= shadow_half_width) & (along > 0) & (along < link.d_los)
    states = np.where(shadow, LinkState.SHADOWING, LinkState.REFLECTION)
    if delta_threshold is not None:
        far = excess_path_length(link, centers) > delta_threshold
        states = np.where(~shadow & far, LinkState.NON_FADING, states)
    return states.astype(np.int8)


def three_state_gains(
    link: LinkGeometry,
    centers,
    ellipse: HumanEllipse,
    states=None,
    *,
    n_grid: int = 256,
    method: str = "golden",
    delta_threshold: float | None = None,
) -> np.ndarray:
    """Gain in dB on every channel of ``link`` for each center.

    ``states`` defaults to :func:`geometric_states` with the given
    sensitivity threshold.  Returns an array of shape ``(N, C)``.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    lam = link.wavelengths[None, :]
    if states is None:
        states = geometric_states(link, centers, ellipse.shadow_a, delta_threshold)
    states = np.asarray(states)
    out = np.zeros((len(centers), lam.shape[1]))

    refl = states == LinkState.REFLECTION
    if np.any(refl):
        _, theta, delta = reflection_points(
            link,
            centers[refl],
            ellipse.a_semi_minor,
            ellipse.b_semi_major,
            ellipse.orientation,
            n_grid=n_grid,
            method=method,
            strict=False,
        )
        psi = amplitude_ratio(
            ellipse.psi0,
            fresnel_reflection_coeff(theta, ellipse.eps_r),
            link.d_los,
            delta,
            ellipse.eta,
        )
        out[refl] = _reflection_db(psi[:, None], delta[:, None], lam)

    shad = states == LinkState.SHADOWING
    if np.any(shad):
        along, across = link.to_frame(centers[shad])
        along = np.clip(along, 1e-9, link.d_los - 1e-9)[:, None]
        out[shad] = _shadowing_db(link, ellipse, lam, along, across[:, None])
    return out


def model_gains(
    model: str,
    link: LinkGeometry,
    centers,
    ellipse: HumanEllipse,
    *,
    n_grid: int = 256,
    method: str = "golden",
    delta_threshold: float | None = None,
) -> np.ndarray:
    """Observation model ``model`` evaluated for each center, shape ``(N, C)``.

    ``delta_threshold`` only affects the three-state model, where it marks
    the edge of the sensitivity region.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if model == "three-state":
        return three_state_gains(
            link, centers, ellipse, n_grid=n_grid, method=method, delta_threshold=delta_threshold
        )
    delta = excess_path_length(link, centers)
    if model == "exponential":
        g = exponential_gain(delta)
    elif model == "exponential-rayleigh":
        g = exponential_rayleigh_gain(delta)
    else:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return np.repeat(g[:, None], link.n_channels, axis=1)
