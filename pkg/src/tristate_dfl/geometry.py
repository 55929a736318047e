"""Planar geometry shared by the propagation models.

Distances, excess path lengths, Fresnel radii, the link-aligned frame and
the search for the single-bounce reflection point on a human ellipse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateGeometryError(ValueError):
    """The ellipse center lies on the line of sight."""


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def channel_plan(n_channels: int = 16) -> tuple[tuple[int, float], ...]:
    """IEEE 802.15.4 channels in the 2.4 GHz band as ``(index, wavelength)``.

    Channel ``c`` (1-based) sits at ``2405 + 5 (c - 1)`` MHz.
    """
    if not 1 <= n_channels <= 16:
        raise ValueError(f"n_channels must be in [1, 16], got {n_channels}")
    return tuple(
        (c, SPEED_OF_LIGHT / ((2405.0 + 5.0 * (c - 1)) * 1e6))
        for c in range(1, n_channels + 1)
    )


def _as_point(p) -> Point2D:
    if isinstance(p, Point2D):
        return p
    x, y = p
    return Point2D(float(x), float(y))


@dataclass(frozen=True)
class LinkGeometry:
    """A TX-RX pair and the carriers it measures on."""

    p_tx: Point2D
    p_rx: Point2D
    channels: tuple[tuple[int, float], ...] = field(default_factory=channel_plan)
    link_id: int = 0
    d_los: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p_tx", _as_point(self.p_tx))
        object.__setattr__(self, "p_rx", _as_point(self.p_rx))
        channels = tuple((int(c), float(lam)) for c, lam in self.channels)
        object.__setattr__(self, "channels", channels)
        d = math.hypot(self.p_rx.x - self.p_tx.x, self.p_rx.y - self.p_tx.y)
        if not d > 0:
            raise DegenerateGeometryError("TX and RX coincide")
        if any(lam <= 0 for _, lam in channels):
            raise ValueError("carrier wavelengths must be positive")
        if len({c for c, _ in channels}) != len(channels):
            raise ValueError("channel indices must be unique")
        object.__setattr__(self, "d_los", d)

    @classmethod
    def from_coords(cls, tx, rx, n_channels: int = 16, link_id: int = 0):
        return cls(_as_point(tx), _as_point(rx), channel_plan(n_channels), link_id)

    @property
    def wavelengths(self) -> np.ndarray:
        return np.array([lam for _, lam in self.channels])

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def direction(self) -> np.ndarray:
        """Unit vector from TX to RX."""
        return (self.p_rx.as_array() - self.p_tx.as_array()) / self.d_los

    @property
    def normal(self) -> np.ndarray:
        """Unit normal, the direction rotated by +90 degrees."""
        u = self.direction
        return np.array([-u[1], u[0]])

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p_tx.as_array() + self.p_rx.as_array())

    def to_frame(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Link-frame coordinates of ``points``.

        Returns ``(along, across)``: the distance of the perpendicular foot
        from the TX measured toward the RX, and the signed perpendicular
        offset from the LoS line (positive on the side of :attr:`normal`).
        """
        rel = np.asarray(points, dtype=float) - self.p_tx.as_array()
        return rel @ self.direction, rel @ self.normal

    def with_channels(self, n_channels: int) -> "LinkGeometry":
        return replace(self, channels=channel_plan(n_channels))


def excess_path_length(link: LinkGeometry, p) -> float | np.ndarray:
    """``|p_tx - p| + |p_rx - p| - d_los`` for a point or an ``(..., 2)`` array."""
    if isinstance(p, Point2D):
        p = p.as_array()
    p = np.asarray(p, dtype=float)
    tx, rx = link.p_tx.as_array(), link.p_rx.as_array()
    if p.ndim == 1:
        d = math.hypot(p[0] - tx[0], p[1] - tx[1]) + math.hypot(p[0] - rx[0], p[1] - rx[1])
        return max(d - link.d_los, 0.0)
    d = np.hypot(p[..., 0] - tx[0], p[..., 1] - tx[1]) + np.hypot(
        p[..., 0] - rx[0], p[..., 1] - rx[1]
    )
    # triangle inequality; rounding can dip a few ulp below zero
    return np.maximum(d - link.d_los, 0.0)


def fresnel_radius(n, lambda_c, d_tx, d_rx):
    """Radius of the ``n``-th Fresnel zone at distances ``d_tx``/``d_rx``."""
    args = [np.asarray(v, dtype=float) for v in (n, lambda_c, d_tx, d_rx)]
    if any(np.any(~(a > 0)) for a in args):
        raise ValueError("fresnel_radius arguments must all be positive")
    n, lambda_c, d_tx, d_rx = args
    r = np.sqrt(n * lambda_c * d_tx * d_rx / (d_tx + d_rx))
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class HumanEllipse:
    """Elliptic cross-section of a person with uniform electrical properties.

    ``a_semi_minor`` lies along the ellipse's local x axis, which coincides
    with the world x axis unless ``orientation`` rotates it.  ``shadow_a`` is
    the width used by the shadowing model; it is deliberately independent of
    ``a_semi_minor``.  Defaults are the tracking parameters of the reference
    deployment.
    """

    center: Point2D = Point2D(0.0, 0.0)
    a_semi_minor: float = 0.11
    b_semi_major: float = 0.20
    psi0: float = 0.5
    eps_r: float = 1.5
    eta: float = 2.0
    rho: float = 53.0
    orientation: float = 0.0
    shadow_a: float = 0.20

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if not 0 < self.a_semi_minor <= self.b_semi_major:
            raise ValueError("need 0 < a_semi_minor <= b_semi_major")
        if not 0 <= self.psi0 <= 1:
            raise ValueError("psi0 must lie in [0, 1]")
        if self.eps_r < 1:
            raise ValueError("eps_r must be >= 1")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.shadow_a > 0:
            raise ValueError("shadow_a must be positive")

    def at(self, center) -> "HumanEllipse":
        return replace(self, center=_as_point(center))

    def contains(self, points, centers=None) -> np.ndarray:
        """Interior test of ``points`` (``(..., 2)``) against the rotated ellipse.

        ``centers`` broadcasts against ``points`` and defaults to
        :attr:`center`.
        """
        points = np.asarray(points, dtype=float)
        c = self.center.as_array() if centers is None else np.asarray(centers, float)
        rel = points - c
        cos, sin = math.cos(self.orientation), math.sin(self.orientation)
        u = rel[..., 0] * cos + rel[..., 1] * sin
        v = -rel[..., 0] * sin + rel[..., 1] * cos
        return (u / self.a_semi_minor) ** 2 + (v / self.b_semi_major) ** 2 <= 1.0


@dataclass(frozen=True)
class ReflectionSolution:
    p_r: Point2D
    theta_i: float
    delta_r: float


def reflection_points(
    link: LinkGeometry,
    centers,
    a: float,
    b: float,
    orientation: float = 0.0,
    *,
    n_grid: int = 256,
    tol: float = 1e-9,
    method: str = "golden",
    strict: bool = True,
):
    """Vectorised reflection-point search for many ellipse centers.

    The boundary ``c + R(orientation) (a cos t, b sin t)`` is sampled on
    ``n_grid`` angles, points on the far side of the LoS line are discarded,
    and the best sample is refined inside its neighbouring grid cells until
    the step falls below ``tol`` meters of arc.

    Parameters
    ----------
    centers : array_like, shape (N, 2)
    method : {"golden", "newton"}
        Refinement scheme. ``"golden"`` is the robust reference;
        ``"newton"`` is a bracketed Newton iteration on the derivative of
        the path length, an order of magnitude cheaper for large batches.
    strict : bool
        Raise :class:`DegenerateGeometryError` for centers on the LoS line.
        Otherwise such centers are treated as lying on the normal side.

    Returns
    -------
    p_r : ndarray, shape (N, 2)
    theta_i : ndarray, shape (N,)
        Grazing angle in ``[0, pi/2]``.
    delta_r : ndarray, shape (N,)
    """
    if method not in ("golden", "newton"):
        raise ValueError(f"unknown method {method!r}")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    tx, rx = link.p_tx.as_array(), link.p_rx.as_array()
    nrm = link.normal
    cos_o, sin_o = math.cos(orientation), math.sin(orientation)

    offset = (centers - tx) @ nrm
    if strict and np.any(np.abs(offset) <= 1e-12 * max(1.0, link.d_los)):
        raise DegenerateGeometryError("ellipse center lies on the LoS line")
    side = np.where(offset < 0, -1.0, 1.0)[:, None]
    cxy = centers[:, :, None]

    # t has shape (M, k); idx selects the M centers it belongs to
    def boundary(t, idx):
        u, v = a * np.cos(t), b * np.sin(t)
        return (
            cxy[idx, 0] + u * cos_o - v * sin_o,
            cxy[idx, 1] + u * sin_o + v * cos_o,
        )

    def cost(t, idx):
        x, y = boundary(t, idx)
        d = np.hypot(x - tx[0], y - tx[1]) + np.hypot(x - rx[0], y - rx[1])
        s = ((x - tx[0]) * nrm[0] + (y - tx[1]) * nrm[1]) * side[idx]
        return np.where(s >= -1e-12, d, np.inf)

    every = np.arange(len(centers))
    if method == "golden":
        grid = np.linspace(0.0, 2.0 * math.pi, n_grid, endpoint=False)[None, :]
        t0 = grid[0, np.argmin(cost(grid, every), axis=1)][:, None]
        t = _golden(lambda t: cost(t, every), t0, 2.0 * math.pi / n_grid, tol / b)
    else:
        t = _newton_kernel(
            centers, side[:, 0], a, b, cos_o, sin_o, *tx, *rx, *nrm, n_grid, tol / b
        )

    px, py = boundary(t[:, None], every)
    px, py = px[:, 0], py[:, 0]
    delta = np.maximum(
        np.hypot(px - tx[0], py - tx[1]) + np.hypot(px - rx[0], py - rx[1]) - link.d_los,
        0.0,
    )

    # tangent of the rotated ellipse at t; grazing angle is measured from it
    tu, tv = -a * np.sin(t), b * np.cos(t)
    tan_x, tan_y = tu * cos_o - tv * sin_o, tu * sin_o + tv * cos_o
    inc_x, inc_y = px - tx[0], py - tx[1]
    cross = np.abs(inc_x * tan_y - inc_y * tan_x)
    dot = np.abs(inc_x * tan_x + inc_y * tan_y)
    theta = np.arctan2(cross, dot)
    return np.column_stack([px, py]), theta, delta


def _golden(cost, t0, h, tol):
    lo, hi = t0 - h, t0 + h
    n_iter = max(1, math.ceil(math.log(tol / (2 * h)) / math.log(_GOLDEN)))
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = cost(x1), cost(x2)
    for _ in range(n_iter):
        left = f1 <= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x2n = np.where(left, x1, lo + _GOLDEN * (hi - lo))
        x1n = np.where(left, hi - _GOLDEN * (hi - lo), x2)
        fnew = cost(np.where(left, x1n, x2n))
        f1, f2 = np.where(left, fnew, f2), np.where(left, f1, fnew)
        x1, x2 = x1n, x2n
    t = np.where(f1 <= f2, x1, x2)
    # the interior probes never touch the grid sample itself; keep it if better
    return np.where(np.minimum(f1, f2) <= cost(t0), t, t0)[:, 0]


@numba.njit(cache=True)
def _path_and_derivs(t, cx, cy, a, b, cos_o, sin_o, tx, ty, rx, ry):
    ca, sa = math.cos(t), math.sin(t)
    u, v = a * ca, b * sa
    x = cx + u * cos_o - v * sin_o
    y = cy + u * sin_o + v * cos_o
    du, dv = -a * sa, b * ca
    dx, dy = du * cos_o - dv * sin_o, du * sin_o + dv * cos_o
    ddx, ddy = cx - x, cy - y
    speed2 = dx * dx + dy * dy
    f = 0.0
    g = 0.0
    gg = 0.0
    for fx, fy in ((tx, ty), (rx, ry)):
        ux, uy = x - fx, y - fy
        r = math.sqrt(ux * ux + uy * uy)
        f += r
        if r > 0.0:
            ux /= r
            uy /= r
            proj = ux * dx + uy * dy
            g += proj
            gg += (speed2 - proj * proj) / r + ux * ddx + uy * ddy
    return f, g, gg


@numba.njit(cache=True)
def _newton_kernel(centers, side, a, b, cos_o, sin_o, tx, ty, rx, ry, nx, ny, n_grid, tol):
    n = centers.shape[0]
    out = np.empty(n)
    h = 2.0 * math.pi / n_grid
    cos_t = np.cos(np.arange(n_grid) * h)
    sin_t = np.sin(np.arange(n_grid) * h)
    for i in range(n):
        cx, cy = centers[i, 0], centers[i, 1]
        best_f = np.inf
        t0 = 0.0
        for k in range(n_grid):
            u, v = a * cos_t[k], b * sin_t[k]
            px = cx + u * cos_o - v * sin_o
            py = cy + u * sin_o + v * cos_o
            if ((px - tx) * nx + (py - ty) * ny) * side[i] < -1e-12:
                continue
            f = math.sqrt((px - tx) ** 2 + (py - ty) ** 2) + math.sqrt(
                (px - rx) ** 2 + (py - ry) ** 2
            )
            if f < best_f:
                best_f = f
                t0 = k * h
        lo, hi = t0 - h, t0 + h
        _, g_lo, _ = _path_and_derivs(lo, cx, cy, a, b, cos_o, sin_o, tx, ty, rx, ry)
        _, g_hi, _ = _path_and_derivs(hi, cx, cy, a, b, cos_o, sin_o, tx, ty, rx, ry)
        if not (g_lo < 0.0 and g_hi > 0.0):
            out[i] = t0
            continue
        t = t0
        for _ in range(200):
            _, g, gg = _path_and_derivs(t, cx, cy, a, b, cos_o, sin_o, tx, ty, rx, ry)
            if g < 0.0:
                lo = t
            else:
                hi = t
            t_new = t - g / gg if gg > 0.0 else 0.5 * (lo + hi)
            if not (lo < t_new < hi):
                t_new = 0.5 * (lo + hi)
            if abs(t_new - t) < tol:
                t = t_new
                break
            t = t_new
        # the root may sit on the far side of the LoS line; clamp to the visible grid sample
        ca, sa = math.cos(t), math.sin(t)
        px = cx + a * ca * cos_o - b * sa * sin_o
        py = cy + a * ca * sin_o + b * sa * cos_o
        if ((px - tx) * nx + (py - ty) * ny) * side[i] < -1e-12:
            t = t0
        out[i] = t
    return out


def reflection_point(link: LinkGeometry, ellipse: HumanEllipse) -> ReflectionSolution:
    """Point on the ellipse boundary minimising the reflected excess path."""
    p, theta, delta = reflection_points(
        link,
        ellipse.center.as_array()[None, :],
        ellipse.a_semi_minor,
        ellipse.b_semi_major,
        ellipse.orientation,
    )
    return ReflectionSolution(
        Point2D(float(p[0, 0]), float(p[0, 1])), float(theta[0]), float(delta[0])
    )
