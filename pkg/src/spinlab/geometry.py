"""Overlaps, bands around inner-sphere points, and band volumes.

The marginal of t = <sigma/sqrt(N), n> for sigma uniform on the sphere of
radius sqrt(N) has density proportional to (1 - t^2)^((N-3)/2) on [-1, 1];
band volumes are integrals of that density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln, logsumexp

SPHERE_TOL = 1e-8
DELTA_EXPONENT = 0.25


def default_delta(N: int, exponent: float = DELTA_EXPONENT) -> float:
    """Band half-width N^{-exponent}."""
    return float(N) ** (-exponent)


@dataclass(frozen=True)
class BandSpec:
    center: np.ndarray
    width: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)
        q = self.q
        if not 0.0 < q < 1.0:
            raise ValueError(f"band center must have radius_sq in (0,1), got {q}")
        if not 0.0 < self.width <= 1.0:
            raise ValueError(f"band width must lie in (0,1], got {self.width}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def q(self) -> float:
        return float(self.center @ self.center) / self.center.shape[0]

    @property
    def direction(self) -> np.ndarray:
        return self.center / np.linalg.norm(self.center)

    @property
    def interval(self) -> tuple[float, float]:
        """Range of t = <sigma/sqrt(N), direction> admitted by the band."""
        r = math.sqrt(self.q)
        return max(-1.0, r - self.width), min(1.0, r + self.width)

    def projection(self, sigma) -> np.ndarray:
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return sigma @ self.direction / math.sqrt(self.dim)


def radius_sq(sigma) -> float:
    sigma = np.asarray(sigma, dtype=float)
    return float(sigma @ sigma) / sigma.shape[-1]


def overlap(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("overlap of a zero vector is undefined")
    return float(np.clip(x @ y / (nx * ny), -1.0, 1.0))


def in_band(sigma, band: BandSpec, tol: float = SPHERE_TOL) -> bool:
    sigma = np.asarray(sigma, dtype=float)
    if abs(radius_sq(sigma) - 1.0) > tol:
        raise ValueError("configuration is not on the outer sphere")
    t = float(band.projection(sigma)[0])
    return abs(t - math.sqrt(band.q)) <= band.width


def band_mask(points: np.ndarray, band: BandSpec) -> np.ndarray:
    t = band.projection(points)
    return np.abs(t - math.sqrt(band.q)) <= band.width


# -- marginal density of the projection ---------------------------------------

def _log_density(t, N: int):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return 0.5 * (N - 3) * np.log1p(-t * t)


def _log_norm(N: int) -> float:
    # int_{-1}^{1} (1-t^2)^{(N-3)/2} dt = B(1/2, (N-1)/2)
    return float(gammaln(0.5) + gammaln((N - 1) / 2) - gammaln(N / 2))


def _peak(a: float, b: float) -> float:
    if a <= 0.0 <= b:
        return 0.0
    return a if abs(a) < abs(b) else b


def log_interval_mass(a: float, b: float, N: int, tol: float = 1e-10) -> float:
    """log of the unnormalized integral of (1-t^2)^((N-3)/2) over [a, b]."""
    a = max(a, -1.0)
    b = min(b, 1.0)
    if not b > a:
        raise ValueError(f"empty integration interval [{a}, {b}]")
    if N == 3:
        return math.log(b - a)
    t0 = _peak(a, b)
    f0 = float(_log_density(t0, N))
    # width of the peak: curvature at 0, slope elsewhere
    if t0 == 0.0:
        w = 1.0 / math.sqrt(N - 3)
    else:
        slope = (N - 3) * abs(t0) / (1.0 - t0 * t0)
        w = 1.0 / slope
    breaks = sorted({x for k in (1, 4, 16, 64, 256) for x in (t0 - k * w, t0 + k * w) if a < x < b})

    def g(t):
        return math.exp(float(_log_density(t, N)) - f0)

    pts = [a, *breaks, b]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(g, lo, hi, epsabs=tol * 1e-3, epsrel=1e-12, limit=200)
        total += val
    return f0 + math.log(total)


def band_log_volume(q: float, delta: float, N: int) -> float:
    """(1/N) log of the normalized Haar volume of a band of half-width delta."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0,1)")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if N < 3:
        raise ValueError("N must be >= 3")
    r = math.sqrt(q)
    a, b = max(-1.0, r - delta), min(1.0, r + delta)
    if a <= -1.0 and b >= 1.0:
        return 0.0
    return (log_interval_mass(a, b, N) - _log_norm(N)) / N


def band_complement_log_volume(q: float, delta: float, N: int) -> float:
    r = math.sqrt(q)
    a, b = r - delta, r + delta
    parts = []
    if a > -1.0:
        parts.append(log_interval_mass(-1.0, a, N))
    if b < 1.0:
        parts.append(log_interval_mass(b, 1.0, N))
    if not parts:
        return -math.inf
    return (float(logsumexp(parts)) - _log_norm(N)) / N


def projection_mean(a: float, b: float, N: int) -> float:
    """Mean of t under the marginal density restricted to [a, b]."""
    lz = log_interval_mass(a, b, N)
    t0 = _peak(a, b)
    f0 = float(_log_density(t0, N))

    def g(t):
        return t * math.exp(float(_log_density(t, N)) - f0)

    val, _ = integrate.quad(g, a, b, epsabs=0, epsrel=1e-12, limit=400, points=[t0] if a < t0 < b else None)
    return val * math.exp(f0 - lz)


class _ProjectionSampler:
    """Inverse-CDF sampler of t on [a, b] built on a fine grid."""

    def __init__(self, a: float, b: float, N: int, grid: int = 8193):
        a = max(a, -1.0)
        b = min(b, 1.0)
        if not b > a:
            raise ValueError(f"degenerate band interval [{a}, {b}]")
        t0 = _peak(a, b)
        if t0 == 0.0:
            w = 1.0 / math.sqrt(max(N - 3, 1))
        else:
            w = (1.0 - t0 * t0) / max((N - 3) * abs(t0), 1e-300)
        offs = np.geomspace(w * 1e-4, max(b - a, w), grid // 2)
        ts = np.concatenate([np.linspace(a, b, grid), t0 + offs, t0 - offs, [a, b, t0]])
        ts = np.unique(ts[(ts >= a) & (ts <= b)])
        logf = _log_density(ts, N)
        f = np.exp(logf - logf.max())
        # trapezoid in t of the normalized density
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(ts))])
        self.t = ts
        self.cdf = cdf / cdf[-1]

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self.cdf, self.t)


def sample_uniform_band(band: BandSpec, seed, count: int) -> np.ndarray:
    """i.i.d. uniform points of the band (surface measure on the outer sphere)."""
    rng = np.random.default_rng(seed)
    N = band.dim
    a, b = band.interval
    sampler = _ProjectionSampler(a, b, N)
    t = sampler(rng.random(count))
    n = band.direction
    g = rng.standard_normal((count, N))
    g -= np.outer(g @ n, n)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = t[:, None] * n[None, :] + np.sqrt(np.clip(1.0 - t * t, 0.0, None))[:, None] * g
    pts *= math.sqrt(N)
    # the band test is the contract for returned points; clamp interpolation round-off
    tt = band.projection(pts)
    r = math.sqrt(band.q)
    bad = np.abs(tt - r) > band.width
    if bad.any():
        tt = np.clip(tt, a, b)
        pts[bad] = _rebuild(pts[bad], n, tt[bad], N)
    return pts


def _rebuild(pts, n, t, N):
    perp = pts / math.sqrt(N) - np.outer(pts @ n / math.sqrt(N), n)
    perp /= np.linalg.norm(perp, axis=1, keepdims=True)
    return math.sqrt(N) * (t[:, None] * n[None, :] + np.sqrt(1.0 - t * t)[:, None] * perp)
