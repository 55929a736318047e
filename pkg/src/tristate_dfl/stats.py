"""Conditional densities of linear-scale RSS, ML fitting and the K-S test.

Non-fading samples are log-normal, reflection samples Weibull and
shadowing samples gamma.  Weibull and gamma use ``a`` for scale and ``b``
for shape throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

FAMILIES = ("lognormal", "weibull", "gamma")


class DegenerateFitError(ValueError):
    """Samples carry no spread to estimate a scale from."""


class ConvergenceError(ArithmeticError):
    def __init__(self, message, iterates):
        super().__init__(f"{message}; last iterates {iterates[-5:]}")
        self.iterates = list(iterates)


def db_to_linear(r_db):
    """Convert dB to a linear power ratio."""
    r = np.power(10.0, np.asarray(r_db, dtype=float) / 10.0)
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class StateDensity:
    """One of the three state-conditional densities.

    ``p1``/``p2`` are ``(mu, sigma)`` for the log-normal and
    ``(scale a, shape b)`` for Weibull and gamma.
    """

    family: str
    p1: float
    p2: float

    def __post_init__(self):
        object.__setattr__(self, "p1", float(self.p1))
        object.__setattr__(self, "p2", float(self.p2))
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.p2 > 0 or (self.family != "lognormal" and not self.p1 > 0):
            raise ValueError(f"invalid parameters for {self.family}: {self.p1}, {self.p2}")

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "StateDensity":
        return cls("lognormal", mu, sigma)

    @classmethod
    def weibull(cls, scale: float, shape: float) -> "StateDensity":
        return cls("weibull", scale, shape)

    @classmethod
    def gamma(cls, scale: float, shape: float) -> "StateDensity":
        return cls("gamma", scale, shape)

    def logpdf(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(~(r > 0)):
            raise ValueError("densities are defined for r > 0 only")
        lr = np.log(r)
        if self.family == "lognormal":
            mu, sigma = self.p1, self.p2
            out = -lr - math.log(sigma * math.sqrt(2 * math.pi)) - (lr - mu) ** 2 / (2 * sigma**2)
        elif self.family == "weibull":
            a, b = self.p1, self.p2
            out = math.log(b / a) + (b - 1) * (lr - math.log(a)) - np.exp(b * (lr - math.log(a)))
        else:
            a, b = self.p1, self.p2
            out = (b - 1) * lr - b * math.log(a) - special.gammaln(b) - r / a
        return float(out) if out.ndim == 0 else out

    def pdf(self, r):
        out = np.exp(self.logpdf(r))
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        pos = np.maximum(r, np.finfo(float).tiny)
        if self.family == "lognormal":
            out = 0.5 * special.erfc(-(np.log(pos) - self.p1) / (self.p2 * math.sqrt(2)))
        elif self.family == "weibull":
            out = -np.expm1(-((pos / self.p1) ** self.p2))
        else:
            out = special.gammainc(self.p2, pos / self.p1)
        out = np.where(r > 0, out, 0.0)
        return float(out) if out.ndim == 0 else out

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.family == "lognormal":
            out = np.exp(self.p1 + self.p2 * math.sqrt(2) * special.erfinv(2 * q - 1))
        elif self.family == "weibull":
            out = self.p1 * (-np.log1p(-q)) ** (1.0 / self.p2)
        else:
            out = self.p1 * special.gammaincinv(self.p2, q)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "lognormal":
            return rng.lognormal(self.p1, self.p2, size)
        if self.family == "weibull":
            return self.p1 * rng.weibull(self.p2, size)
        return rng.gamma(self.p2, self.p1, size)


NON_FADING = StateDensity.lognormal(0.0, 0.088)
REFLECTION = StateDensity.weibull(1.242, 2.630)
SHADOWING = StateDensity.gamma(0.919, 0.127)
STATE_DENSITIES = (NON_FADING, REFLECTION, SHADOWING)


def density(d: StateDensity, r):
    return d.pdf(r)


def _check_samples(samples, minimum):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise ValueError(f"need at least {minimum} samples, got {x.size}")
    if np.any(~(x > 0)):
        raise ValueError("samples must be strictly positive")
    return x


def _newton(step, x0, *, tol=1e-10, max_iter=200, positive=True):
    x = x0
    iterates = [x]
    for _ in range(max_iter):
        dx = step(x)
        x_new = x - dx
        if positive and x_new <= 0:
            x_new = x / 2
        iterates.append(x_new)
        if abs(x_new - x) <= tol * max(1.0, abs(x_new)):
            return x_new
        x = x_new
    raise ConvergenceError("Newton iteration did not converge", iterates)


def fit_mle(family: str, samples) -> StateDensity:
    """Maximum-likelihood parameters of ``family`` for positive ``samples``."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    x = _check_samples(samples, 30)
    lx = np.log(x)
    if np.ptp(lx) == 0:
        raise DegenerateFitError("all samples are equal")

    if family == "lognormal":
        mu = lx.mean()
        return StateDensity.lognormal(float(mu), float(np.sqrt(np.mean((lx - mu) ** 2))))

    if family == "weibull":
        # profile likelihood in the shape; work with x / max(x) to keep x**b finite
        z = lx - lx.max()
        mean_z = z.mean()

        def step(b):
            w = np.exp(b * z)
            s0, s1, s2 = w.sum(), (w * z).sum(), (w * z * z).sum()
            g = 1.0 / b + mean_z - s1 / s0
            dg = -1.0 / b**2 - (s2 * s0 - s1 * s1) / s0**2
            return g / dg

        b0 = 1.2 / np.std(lx)
        b = _newton(step, float(b0))
        a = math.exp(lx.max() + math.log(np.mean(np.exp(b * z))) / b)
        return StateDensity.weibull(a, b)

    s = math.log(x.mean()) - lx.mean()
    # Newton in log(k) on  log k - digamma(k) = s
    def step(u):
        k = math.exp(u)
        g = u - special.digamma(k) - s
        dg = 1.0 - k * special.polygamma(1, k)
        return g / dg

    k0 = (3 - s + math.sqrt((s - 3) ** 2 + 24 * s)) / (12 * s)
    k = math.exp(_newton(step, math.log(k0), positive=False))
    return StateDensity.gamma(x.mean() / k, k)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    reject_h0: bool


def kolmogorov_sf(x: float, terms: int = 100) -> float:
    """Survival function of the asymptotic Kolmogorov distribution."""
    if x <= 0:
        return 1.0
    j = np.arange(1, terms + 1)
    if x < 1.0:
        # theta-function form converges fast for small arguments
        cdf = math.sqrt(2 * math.pi) / x * np.exp(-((2 * j - 1) ** 2) * math.pi**2 / (8 * x * x)).sum()
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    sf = 2.0 * np.sum((-1.0) ** (j - 1) * np.exp(-2.0 * j * j * x * x))
    return float(min(1.0, max(0.0, sf)))


def ks_statistic(samples, d: StateDensity) -> float:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    f = d.cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_test(samples, d: StateDensity, alpha: float = 0.05) -> KsResult:
    """One-sample Kolmogorov-Smirnov test of ``samples`` against ``d``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 10:
        raise ValueError(f"need at least 10 samples, got {x.size}")
    stat = ks_statistic(x, d)
    p = kolmogorov_sf(math.sqrt(x.size) * stat)
    return KsResult(stat, p, p < alpha)
