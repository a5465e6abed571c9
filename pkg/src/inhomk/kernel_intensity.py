"""
Intensity models and kernel intensity estimation.

The smoothing kernel is a separable Gaussian truncated to ``[-kσ, kσ]²`` and
renormalised, so edge weights on rectangles factor into 1-D CDF differences.
Every intensity model exposes ``evaluate(x)`` and ``product_evaluate(u, v)``,
the latter being what the γ integrand substitutes for ``ρ(u)ρ(v)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import _accel
from .geometry import Window
from .pattern import PointPattern

__all__ = [
    "Kernel2D",
    "Kernel1D",
    "IntensityModel",
    "KnownIntensity",
    "ParametricIntensity",
    "KernelIntensity",
    "edge_weight",
    "rho_hat",
    "rho_bar",
    "rho_parametric",
    "profile_integral",
    "intensity_at_points",
    "default_bandwidth_grid",
    "bandwidth_cvl",
    "bandwidth_lcv",
    "cvl_criterion",
    "lcv_criterion",
    "BandwidthSelectionError",
]


class BandwidthSelectionError(ValueError):
    pass


def _trunc_mass(k):
    return math.erf(k / math.sqrt(2.0))


@dataclass(frozen=True)
class Kernel1D:
    """Standard normal density truncated to ``[-k, k]``, scaled by bandwidth ``b``."""

    b: float
    k: float = 3.0

    def __post_init__(self):
        if not (self.b > 0 and self.k > 0):
            raise ValueError("bandwidth and truncation must be positive")

    @property
    def sigma(self):
        return self.b

    @property
    def support(self):
        return self.k * self.b

    @property
    def peak(self):
        return 1.0 / (math.sqrt(2.0 * math.pi) * _trunc_mass(self.k) * self.b)

    def __call__(self, t):
        t = np.asarray(t, dtype=float) / self.b
        out = np.where(np.abs(t) <= self.k, np.exp(-0.5 * t * t), 0.0) * self.peak
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        """Distribution function of the truncated, scaled density."""
        t = np.clip(np.asarray(t, dtype=float) / self.b, -self.k, self.k)
        return (ndtr(t) - ndtr(-self.k)) / _trunc_mass(self.k)


@dataclass(frozen=True)
class Kernel2D:
    """
    Separable truncated Gaussian ``κ_σ(h) = κ₁(h/σ)/σ²`` on ``[-kσ, kσ]²``.
    """

    sigma: float
    k: float = 3.0

    def __post_init__(self):
        if not (self.sigma > 0 and self.k > 0):
            raise ValueError("bandwidth and truncation must be positive")

    @property
    def support(self):
        """Half-width ``kσ`` of the square support."""
        return self.k * self.sigma

    @property
    def peak(self):
        """``κ_σ(0)``."""
        return 1.0 / (2.0 * math.pi * self.sigma**2 * _trunc_mass(self.k) ** 2)

    @property
    def marginal(self):
        return Kernel1D(self.sigma, self.k)

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        hx, hy = h[..., 0] / self.sigma, h[..., 1] / self.sigma
        inside = (np.abs(hx) <= self.k) & (np.abs(hy) <= self.k)
        out = np.where(inside, np.exp(-0.5 * (hx * hx + hy * hy)), 0.0) * self.peak
        return float(out) if out.ndim == 0 else out


def edge_weight(window, x, kernel):
    """
    Diggle edge weight ``w_W(x) = ∫_W κ_σ(u - x) du``.

    Computed as a product of two truncated-normal CDF differences.
    """
    x = np.asarray(x, dtype=float)
    m = kernel.marginal
    wx = m.cdf(window.x1 - x[..., 0]) - m.cdf(window.x0 - x[..., 0])
    wy = m.cdf(window.y1 - x[..., 1]) - m.cdf(window.y0 - x[..., 1])
    out = wx * wy
    return float(out) if np.ndim(out) == 0 else out


def _cells(points, window, kernel):
    return _accel.CellList(points, window.bounds, max(kernel.support, 1e-12), ring=2)


def _raw_sums(cells, kernel, q):
    q = np.ascontiguousarray(np.asarray(q, dtype=float).reshape(-1, 2))
    s = _accel.gauss_sums(
        np.ascontiguousarray(q[:, 0]),
        np.ascontiguousarray(q[:, 1]),
        *cells.grid,
        kernel.support,
        0.5 / kernel.sigma**2,
    )
    return s * kernel.peak


def rho_hat(pattern, kernel, x):
    """
    Kernel intensity estimate ``Σ_y κ_σ(y - x) / w_W(x)`` at one or many locations.
    """
    x = np.asarray(x, dtype=float)
    if pattern.n == 0:
        out = np.zeros(x.shape[:-1])
        return float(out) if out.ndim == 0 else out
    cells = _cells(pattern.points, pattern.window, kernel)
    flat = x.reshape(-1, 2)
    out = (_raw_sums(cells, kernel, flat) / edge_weight(pattern.window, flat, kernel)).reshape(x.shape[:-1])
    return float(out) if out.ndim == 0 else out


def rho_bar(pattern, kernel, x, exclude):
    """
    Leave-one-out kernel estimate: ``rho_hat`` with pattern point ``exclude`` omitted.
    """
    if not 0 <= exclude < pattern.n:
        raise IndexError(f"exclude={exclude} out of range for pattern of {pattern.n} points")
    x = np.asarray(x, dtype=float)
    own = kernel(pattern.points[exclude] - x) / edge_weight(pattern.window, x, kernel)
    return rho_hat(pattern, kernel, x) - own


def profile_integral(profile, window, m=512):
    """``∫_W p`` by ``m x m`` midpoint quadrature."""
    gx = window.x0 + (np.arange(m) + 0.5) * window.width / m
    gy = window.y0 + (np.arange(m) + 0.5) * window.height / m
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    vals = np.asarray(profile(np.stack([xx, yy], axis=-1)), dtype=float)
    return float(vals.mean() * window.area)


def rho_parametric(profile, pattern, x, integral=None):
    """``N p(x) / ∫_W p``; the intensity integrates to the observed count."""
    if integral is None:
        integral = profile_integral(profile, pattern.window)
    if not integral > 0:
        raise ValueError("profile integrates to zero over the window")
    return pattern.n * np.asarray(profile(np.asarray(x, dtype=float)), dtype=float) / integral


class IntensityModel:
    """
    Base for intensity specifications.

    Subclasses implement ``evaluate`` and may override ``product_evaluate``.
    """

    #: descriptor used in curve metadata
    label = "intensity"
    #: bandwidth of the underlying kernel estimate, if any
    sigma = None

    def evaluate(self, x):
        raise NotImplementedError

    def product_evaluate(self, u, v):
        return self.evaluate(u) * self.evaluate(v)

    def at_points(self, pattern):
        """Intensity used for the pattern's own points in local estimators."""
        return np.asarray(self.evaluate(pattern.points), dtype=float)


class KnownIntensity(IntensityModel):
    """
    Intensity given as a function of location.

    Parameters
    ----------
    func : callable or float
        Vectorised ``func(xy) -> values`` for ``xy`` of shape ``(..., 2)``, or
        a constant.
    """

    label = "known"

    def __init__(self, func, name=None):
        if np.isscalar(func):
            c = float(func)
            if c < 0:
                raise ValueError("intensity must be non-negative")
            self.constant = c
            self._func = lambda xy: np.full(np.shape(xy)[:-1], c)
        else:
            self.constant = None
            self._func = func
        self.name = name

    def evaluate(self, x):
        return np.asarray(self._func(np.asarray(x, dtype=float)), dtype=float)


class ParametricIntensity(IntensityModel):
    """
    Known retention profile with the overall level fitted from the count,
    ``ρ̂_p(x) = N p(x) / ∫_W p``.
    """

    label = "parametric"

    def __init__(self, profile, n_points, window, integral=None):
        self.profile = profile
        self.n_points = int(n_points)
        self.window = window
        self.integral = profile_integral(profile, window) if integral is None else float(integral)
        if not self.integral > 0:
            raise ValueError("profile integrates to zero over the window")

    @property
    def scale(self):
        return self.n_points / self.integral

    def evaluate(self, x):
        return self.scale * np.asarray(self.profile(np.asarray(x, dtype=float)), dtype=float)


class KernelIntensity(IntensityModel):
    """
    Kernel estimate built from ``pattern``.

    With ``leave_out=True`` the pattern's own points use the leave-one-out
    estimate and ``product_evaluate`` omits the diagonal ``u = v`` terms of
    the double sum ``ρ̂(u)ρ̂(v)``.
    """

    def __init__(self, pattern, kernel, leave_out=False):
        self.pattern = pattern
        self.kernel = kernel
        self.leave_out = bool(leave_out)
        self.window = pattern.window
        self._cells = _cells(pattern.points, pattern.window, kernel) if pattern.n else None

    @property
    def label(self):
        return "kernel-leaveout" if self.leave_out else "kernel"

    @property
    def sigma(self):
        return self.kernel.sigma

    def _sums(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        if self._cells is None:
            return np.zeros(len(x))
        return _raw_sums(self._cells, self.kernel, x)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        out = self._sums(flat) / edge_weight(self.window, flat, self.kernel)
        return out.reshape(x.shape[:-1])

    def product_evaluate(self, u, v):
        u = np.ascontiguousarray(np.asarray(u, dtype=float).reshape(-1, 2))
        v = np.ascontiguousarray(np.asarray(v, dtype=float).reshape(-1, 2))
        if self._cells is None:
            return np.zeros(len(u))
        su, sv, diag = _accel.gauss_pair_sums(
            np.ascontiguousarray(u[:, 0]),
            np.ascontiguousarray(u[:, 1]),
            np.ascontiguousarray(v[:, 0]),
            np.ascontiguousarray(v[:, 1]),
            *self._cells.grid,
            self.kernel.support,
            0.5 / self.kernel.sigma**2,
        )
        num = su * sv
        if self.leave_out:
            num = np.maximum(num - diag, 0.0)
        w = edge_weight(self.window, u, self.kernel) * edge_weight(self.window, v, self.kernel)
        return num * self.kernel.peak**2 / w

    def at_points(self, pattern=None):
        pattern = self.pattern if pattern is None else pattern
        vals = self.evaluate(pattern.points)
        if self.leave_out and pattern is self.pattern:
            own = self.kernel.peak / edge_weight(self.window, pattern.points, self.kernel)
            vals = np.maximum(vals - own, 0.0)
        return vals


def intensity_at_points(model, pattern):
    return np.asarray(model.at_points(pattern), dtype=float)


# ------------------------------------------------------------------ bandwidths


def default_bandwidth_grid(window, n=32):
    """``n`` log-spaced bandwidths in ``[0.01, 0.7] * diameter / √2``."""
    scale = window.diameter / math.sqrt(2.0)
    return np.geomspace(0.01 * scale, 0.7 * scale, n)


def _check_grid(pattern, grid):
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("bandwidth grid is empty")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("bandwidth grid must be positive and strictly increasing")
    if pattern.n < 2:
        raise ValueError("bandwidth selection needs at least two points")
    return grid


def _self_sums(pattern, sigma):
    kern = Kernel2D(sigma)
    s = _raw_sums(_cells(pattern.points, pattern.window, kern), kern, pattern.points)
    return kern, s, edge_weight(pattern.window, pattern.points, kern)


def cvl_criterion(pattern, sigma):
    """
    ``(Σ_x 1/ρ̂_σ(x) - |W|)²`` with the plain (non-leave-out) kernel sum at
    the data points.

    The sum is not edge corrected: with the ``1/w_W`` factor the criterion
    tends to zero as ``σ`` grows and loses its interior minimum.
    """
    _, s, _ = _self_sums(pattern, sigma)
    with np.errstate(divide="ignore"):
        inv = 1.0 / s
    return float((inv.sum() - pattern.window.area) ** 2)


def _integral_rho_hat(pattern, kern, nodes=256):
    # ∫_W κ(y-u)/w(u) du factorises per axis; midpoint rule over each point's support
    total = np.ones(pattern.n)
    m = kern.marginal
    t = (np.arange(nodes) + 0.5) / nodes
    for axis, (lo, hi) in enumerate(((pattern.window.x0, pattern.window.x1), (pattern.window.y0, pattern.window.y1))):
        c = pattern.points[:, axis]
        a = np.maximum(c - kern.support, lo)
        b = np.minimum(c + kern.support, hi)
        u = a[:, None] + (b - a)[:, None] * t[None, :]
        wu = m.cdf(hi - u) - m.cdf(lo - u)
        total *= (m(u - c[:, None]) / wu).mean(axis=1) * (b - a)
    return float(total.sum())


def lcv_criterion(pattern, sigma):
    """``Σ_x log ρ̄_σ(x) - ∫_W ρ̂_σ``; ``-inf`` if any leave-one-out value vanishes."""
    kern, s, w = _self_sums(pattern, sigma)
    loo = (s - kern.peak) / w
    if np.any(loo <= 0):
        return -math.inf
    return float(np.log(loo).sum() - _integral_rho_hat(pattern, kern))


def bandwidth_cvl(pattern, grid=None):
    """
    Bandwidth minimising the inverse-intensity calibration criterion over ``grid``.

    Ties resolve to the smaller bandwidth.
    """
    grid = _check_grid(pattern, default_bandwidth_grid(pattern.window) if grid is None else grid)
    crit = np.array([cvl_criterion(pattern, s) for s in grid])
    if not np.any(np.isfinite(crit)):
        raise BandwidthSelectionError("CVL criterion non-finite for every bandwidth")
    crit[~np.isfinite(crit)] = np.inf
    return float(grid[int(np.argmin(crit))])


def bandwidth_lcv(pattern, grid=None):
    """
    Bandwidth maximising the leave-one-out Poisson likelihood over ``grid``.

    Ties resolve to the smaller bandwidth.
    """
    grid = _check_grid(pattern, default_bandwidth_grid(pattern.window) if grid is None else grid)
    crit = np.array([lcv_criterion(pattern, s) for s in grid])
    if not np.any(np.isfinite(crit)):
        raise BandwidthSelectionError("LCV criterion is -inf for every bandwidth")
    crit[~np.isfinite(crit)] = -np.inf
    return float(grid[int(np.argmax(crit))])
