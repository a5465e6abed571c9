"""
Planar geometry for axis-aligned rectangular observation windows.

Provides the translate-overlap area ``|W ∩ W_{-h}|`` and its angular average
``a_W(r)``, which serve as edge-correction factors throughout the package.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Window",
    "UNIT_SQUARE",
    "overlap_volume",
    "isotropized_edge_factor",
    "angular_overlap_integral",
    "contains",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Window:
    """Closed rectangle ``[x0, x1] x [y0, y1]``."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"window corners must be finite, got {vals}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate window {vals}: need x0 < x1 and y0 < y1")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    @property
    def diameter(self):
        return float(np.hypot(self.width, self.height))

    @property
    def bounds(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def uniform(self, rng, n):
        """Draw ``n`` points uniformly in the window using generator ``rng``."""
        u = rng.random((n, 2))
        u[:, 0] = self.x0 + self.width * u[:, 0]
        u[:, 1] = self.y0 + self.height * u[:, 1]
        return u


UNIT_SQUARE = Window(0.0, 0.0, 1.0, 1.0)


def overlap_volume(window, h):
    """
    Area of ``W ∩ W_{-h}`` for one lag or an array of lags.

    Parameters
    ----------
    window : Window
    h : array_like, shape (2,) or (n, 2)

    Returns
    -------
    float or numpy.ndarray
        ``max(0, w - |h_x|) * max(0, h - |h_y|)``.
    """
    h = np.asarray(h, dtype=float)
    ax = np.maximum(window.width - np.abs(h[..., 0]), 0.0)
    ay = np.maximum(window.height - np.abs(h[..., 1]), 0.0)
    out = ax * ay
    return float(out) if out.ndim == 0 else out


def _quarter_antiderivative(theta, w, h, r):
    # integral of (w - r cos t)(h - r sin t) dt
    s = np.sin(theta)
    return w * h * theta + w * r * np.cos(theta) - h * r * s + 0.5 * r * r * s * s


def isotropized_edge_factor(window, r):
    """
    Angular average of the overlap area at distance ``r``.

    ``a_W(r) = (1 / 2π) ∫ |W ∩ W_{-r s(θ)}| dθ``, evaluated in closed form
    for every ``r >= 0`` (including ``r`` beyond the shorter side, where the
    admissible angle range shrinks). ``a_W(0) = |W|``.

    Parameters
    ----------
    window : Window
    r : float or array_like
        Non-negative distances.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("distance r must be non-negative")
    w, h = window.width, window.height
    # By symmetry, 4 identical quarter-turns; restrict theta to [0, pi/2]
    # where both factors are positive.
    with np.errstate(invalid="ignore", divide="ignore"):
        lo = np.where(r_arr > w, np.arccos(np.minimum(w / np.where(r_arr > 0, r_arr, 1.0), 1.0)), 0.0)
        hi = np.where(r_arr > h, np.arcsin(np.minimum(h / np.where(r_arr > 0, r_arr, 1.0), 1.0)), 0.5 * np.pi)
    val = _quarter_antiderivative(hi, w, h, r_arr) - _quarter_antiderivative(lo, w, h, r_arr)
    out = np.where(hi > lo, (2.0 / np.pi) * val, 0.0)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def angular_overlap_integral(window, r):
    """``∫_{S^1} |W ∩ W_{-rs}| dν(s) = 2π a_W(r)``."""
    return TWO_PI * isotropized_edge_factor(window, r)


def contains(window, p):
    """Closed-rectangle membership for one point or an ``(n, 2)`` array."""
    p = np.asarray(p, dtype=float)
    x, y = p[..., 0], p[..., 1]
    out = (x >= window.x0) & (x <= window.x1) & (y >= window.y0) & (y <= window.y1)
    return bool(out) if out.ndim == 0 else out
