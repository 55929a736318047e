"""Tracking and model-fit metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Sequence

import numpy as np

from .geometry import HumanEllipse


def _paired(truth, est):
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {est.shape}")
    if truth.size == 0:
        raise ValueError("need at least one sample")
    return truth, est


def mae(truth, estimates) -> tuple[float, float]:
    """Coordinate-wise mean absolute error of ``(K, 2)`` position sequences."""
    truth, est = _paired(truth, estimates)
    e = np.mean(np.abs(est - truth).reshape(-1, 2), axis=0)
    return float(e[0]), float(e[1])


def error_std(truth, estimates) -> tuple[float, float]:
    """Coordinate-wise standard deviation of the absolute error."""
    truth, est = _paired(truth, estimates)
    e = np.std(np.abs(est - truth).reshape(-1, 2), axis=0)
    return float(e[0]), float(e[1])


def inside_count(particles, ellipse: HumanEllipse) -> int:
    return int(np.count_nonzero(ellipse.contains(np.asarray(particles, dtype=float))))


def particle_ratio(particle_history: Sequence, ellipse_history: Sequence[HumanEllipse]) -> float:
    """Percentage of particles inside the person's ellipse, pooled over steps."""
    if len(particle_history) != len(ellipse_history):
        raise ValueError("particle and ellipse histories must align")
    if not particle_history:
        raise ValueError("need at least one step")
    inside = total = 0
    for p, e in zip(particle_history, ellipse_history):
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        inside += inside_count(p, e)
        total += len(p)
    return 100.0 * inside / total


def enhancement(ratios):
    """Relative gain of each ratio over the smallest one, in percent.

    Accepts a sequence or a mapping and returns the same kind.
    """
    keys = list(ratios) if isinstance(ratios, Mapping) else None
    vals = np.asarray([ratios[k] for k in keys] if keys else list(ratios), dtype=float)
    if vals.size == 0:
        raise ValueError("need at least one ratio")
    lo = vals.min()
    if lo < 0:
        raise ValueError("ratios must be non-negative")
    # a zero baseline makes every better model infinitely better
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (vals - lo) / lo * 100.0
    out[vals == lo] = 0.0
    return dict(zip(keys, out.tolist())) if keys else out.tolist()


def residual_sigma(measurements, model_gains) -> float:
    """Root-mean-square residual about zero, in dB."""
    r, g = _paired(measurements, model_gains)
    return float(np.sqrt(np.mean((r - g) ** 2)))


def sensitivity_area(d_los: float, delta_threshold: float) -> float:
    """Area of the region whose excess path length stays below ``delta_threshold``."""
    if not d_los > 0 or not delta_threshold > 0:
        raise ValueError("d_los and delta_threshold must be positive")
    a = (d_los + delta_threshold) / 2.0
    c = d_los / 2.0
    return math.pi * a * math.sqrt(a * a - c * c)


# sensitivity thresholds of each observation model
SENSITIVITY_DELTA = {"exponential": 0.06, "exponential-rayleigh": 0.15, "three-state": 0.50}


@dataclass(frozen=True)
class TrackReport:
    """Summary of one tracking run or the mean of a campaign."""

    eps_x: float
    eps_y: float
    sigma_x: float
    sigma_y: float
    eps_pct: float
    eps_r: float = 0.0
    sensitivity_area: float = 0.0
    n_steps: int = 0
    diverged: int = 0
    model: str = ""

    def __post_init__(self):
        for f in ("eps_x", "eps_y", "sigma_x", "sigma_y", "eps_pct", "sensitivity_area"):
            v = getattr(self, f)
            if not (v >= 0 or math.isnan(v)):
                raise ValueError(f"{f} must be >= 0, got {v}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrackReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrackReport":
        return cls.from_dict(json.loads(text))


_COLUMNS = (
    ("Model", "model", "{}"),
    ("eps_x [cm]", "eps_x", "{:.2f}"),
    ("eps_y [cm]", "eps_y", "{:.2f}"),
    ("eps_% [%]", "eps_pct", "{:.2f}"),
    ("eps_R [%]", "eps_r", "{:.2f}"),
    ("Sens. region [m2]", "sensitivity_area", "{:.2f}"),
)


def format_table(reports: Sequence[TrackReport], spreads: Sequence[TrackReport] | None = None) -> str:
    """Aligned text table: errors in cm, ratios in percent.

    With ``spreads``, the error and ratio cells read ``mean +/- std``.
    """
    rows = []
    for i, rep in enumerate(reports):
        row = []
        for _, attr, fmt in _COLUMNS:
            v = getattr(rep, attr)
            scale = 100.0 if attr in ("eps_x", "eps_y") else 1.0
            cell = fmt.format(v * scale) if attr != "model" else str(v)
            if spreads is not None and attr in ("eps_x", "eps_y", "eps_pct"):
                cell += " +/- " + fmt.format(getattr(spreads[i], attr) * scale)
            row.append(cell)
        rows.append(row)
    header = [c[0] for c in _COLUMNS]
    widths = [max(len(h), *(len(r[j]) for r in rows)) for j, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"
