"""
Kernel estimators of the pair correlation function and the cross pair
correlation function.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .estimators_k import CurveEstimate, EstimatorError, _check_bivariate, _check_rho, _meta, _require_kind
from .gamma import DEFAULT_ALPHA, GammaRangeError, _bank_for, _run
from .gamma import CrossProduct
from .geometry import overlap_volume
from .kernel_intensity import IntensityModel, Kernel1D, Kernel2D, KnownIntensity, intensity_at_points
from .pattern import cross_pairs, pair_iteration

__all__ = [
    "SurfaceEstimate",
    "default_pcf_bandwidth",
    "default_r_grid",
    "default_h_axis",
    "g_global",
    "g_local",
    "g_global_iso",
    "g_local_iso",
    "c_global",
    "c_global_iso",
    "c_local",
    "c_local_iso",
    "c_partial",
]

TWO_PI = 2.0 * np.pi


@dataclass
class SurfaceEstimate:
    """Estimate on the lattice ``hx x hy``; ``values[a, b]`` is at ``(hx[a], hy[b])``."""

    hx: np.ndarray
    hy: np.ndarray
    values: np.ndarray
    estimator: str
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        lines = [f"# estimator={self.estimator}"]
        lines += [f"# {k}={v}" for k, v in sorted(self.meta.items())]
        lines.append("hx,hy,value")
        for a, x in enumerate(self.hx):
            for b, y in enumerate(self.hy):
                lines.append(f"{x:.17g},{y:.17g},{self.values[a, b]:.17g}")
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def default_pcf_bandwidth(n_expected):
    """``0.15 / sqrt(N)`` clipped to ``[0.005, 0.05]``."""
    n = max(float(n_expected), 1.0)
    return float(np.clip(0.15 / np.sqrt(n), 0.005, 0.05))


def default_r_grid(n=128, r_min=0.005, r_max=0.125):
    return np.linspace(r_min, r_max, n)


def default_h_axis(n=41, h_max=0.125):
    return np.linspace(-h_max, h_max, n)


def _kernel1d(kernel, n):
    if kernel is None:
        return Kernel1D(default_pcf_bandwidth(n))
    if np.isscalar(kernel):
        return Kernel1D(float(kernel))
    return kernel


def _kernel2d(kernel, n):
    if kernel is None:
        return Kernel2D(default_pcf_bandwidth(n))
    if np.isscalar(kernel):
        return Kernel2D(float(kernel))
    return kernel


def _axes(h):
    if h is None:
        ax = default_h_axis()
        return ax, ax
    if isinstance(h, tuple) and len(h) == 2:
        return np.asarray(h[0], dtype=float), np.asarray(h[1], dtype=float)
    ax = np.asarray(h, dtype=float)
    return ax, ax


def _r_grid(r):
    r = default_r_grid() if r is None else np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("pcf distances must be positive")
    return r


def _smooth_surface(lags, w, hx, hy, kernel):
    """``Σ_pairs w κ_b(h - lag)`` at every lattice node."""
    nodes = np.stack(np.meshgrid(hx, hy, indexing="ij"), axis=-1).reshape(-1, 2)
    out = np.zeros(len(nodes))
    if len(lags):
        sp = cKDTree(nodes).sparse_distance_matrix(cKDTree(lags), kernel.support, p=np.inf, output_type="ndarray")
        a = sp["i"].astype(np.int64)
        b = sp["j"].astype(np.int64)
        order = np.lexsort((b, a))
        a, b = a[order], b[order]
        contrib = w[b] * kernel(nodes[a] - lags[b])
        out = np.bincount(a, weights=contrib, minlength=len(nodes))
    return out.reshape(len(hx), len(hy))


def _smooth_curve(d, w, r, kernel):
    """``Σ_pairs w κ̃_b(r - d)`` at every grid distance."""
    order = np.argsort(d, kind="stable")
    d, w = d[order], w[order]
    out = np.zeros(len(r))
    lo = np.searchsorted(d, r - kernel.support, side="left")
    hi = np.searchsorted(d, r + kernel.support, side="right")
    for k in range(len(r)):
        s = slice(lo[k], hi[k])
        out[k] = np.sum(w[s] * kernel(r[k] - d[s]))
    return out


def _divide_nodes(num, den, what):
    den = np.asarray(den, dtype=float)
    bad = ~(np.isfinite(den) & (den > 0))
    if np.any(bad):
        k = int(np.flatnonzero(bad.ravel())[0])
        raise EstimatorError(f"{what} is {den.ravel()[k]:g} at grid node {k}")
    return num / den


def _gamma_at(gamma, q):
    try:
        return np.asarray(gamma(q), dtype=float)
    except GammaRangeError as exc:
        raise EstimatorError(f"γ unavailable on the estimation grid: {exc}") from exc


def _reach(hx, hy, kernel):
    return float(np.hypot(np.abs(hx).max(), np.abs(hy).max()) + np.sqrt(2.0) * kernel.support)


def _upairs(pattern, t_max):
    i, j, d = pair_iteration(pattern, t_max)
    return i, j, d


# ---------------------------------------------------------------- one process


def g_global(pattern, gamma, kernel=None, h=None):
    """``Σ≠ κ_b(h - (y-x)) / γ(h)`` on a lattice of lags."""
    _require_kind(gamma, False)
    kernel = _kernel2d(kernel, pattern.n)
    hx, hy = _axes(h)
    i, j, _ = _upairs(pattern, _reach(hx, hy, kernel))
    pts = pattern.points
    num = _smooth_surface(pts[j] - pts[i], np.ones(len(i)), hx, hy, kernel)
    nodes = np.stack(np.meshgrid(hx, hy, indexing="ij"), axis=-1)
    vals = _divide_nodes(num, _gamma_at(gamma, nodes), "γ(h)")
    return SurfaceEstimate(hx, hy, vals, "g_global", _meta(gamma=gamma, b=kernel.sigma))


def g_local(pattern, model, kernel=None, h=None):
    """``Σ≠ κ_b(h - (y-x)) / (ρ(x)ρ(y)|W ∩ W_{x-y}|)``."""
    kernel = _kernel2d(kernel, pattern.n)
    hx, hy = _axes(h)
    i, j, _ = _upairs(pattern, _reach(hx, hy, kernel))
    pts = pattern.points
    lags = pts[j] - pts[i]
    w = np.empty(0)
    if len(i):
        rho = intensity_at_points(model, pattern)
        _check_rho(rho, i, j)
        w = 1.0 / _pos(rho[i] * rho[j] * overlap_volume(pattern.window, lags), i, j)
    vals = _smooth_surface(lags, w, hx, hy, kernel)
    return SurfaceEstimate(hx, hy, vals, "g_local", _meta(model, b=kernel.sigma))


def _pos(den, i, j):
    bad = ~(den > 0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise EstimatorError(f"zero denominator for pair ({i[k]}, {j[k]})")
    return den


def g_global_iso(pattern, gamma, kernel=None, r=None):
    """``Σ≠ κ̃_b(r - |x-y|) / (2π r γ^iso(r))``."""
    _require_kind(gamma, True)
    kernel = _kernel1d(kernel, pattern.n)
    r = _r_grid(r)
    _, _, d = _upairs(pattern, float(r.max() + kernel.support))
    num = _smooth_curve(d, np.ones(len(d)), r, kernel)
    vals = _divide_nodes(num, TWO_PI * r * _gamma_at(gamma, r), "γ^iso(r)")
    return CurveEstimate(r, vals, "g_global_iso", _meta(gamma=gamma, b=kernel.sigma))


def g_local_iso(pattern, model, kernel=None, r=None, form="hat"):
    """
    Local isotropic pcf estimators with translation edge correction.

    ``form='hat'`` divides the kernel sum by ``2π r``; ``form='tilde'``
    divides each pair's term by ``2π |y-x|`` instead.
    """
    if form not in ("hat", "tilde"):
        raise ValueError("form must be 'hat' or 'tilde'")
    kernel = _kernel1d(kernel, pattern.n)
    r = _r_grid(r)
    i, j, d = _upairs(pattern, float(r.max() + kernel.support))
    w = np.empty(0)
    if len(i):
        rho = intensity_at_points(model, pattern)
        _check_rho(rho, i, j)
        pts = pattern.points
        den = rho[i] * rho[j] * overlap_volume(pattern.window, pts[i] - pts[j])
        if form == "tilde":
            den = den * TWO_PI * d
        w = 1.0 / _pos(den, i, j)
    num = _smooth_curve(d, w, r, kernel)
    vals = num / (TWO_PI * r) if form == "hat" else num
    name = "g_local_iso" if form == "hat" else "g_local_iso_tilde"
    return CurveEstimate(r, vals, name, _meta(model, b=kernel.sigma))


# ---------------------------------------------------------------- two processes


def _xlags(bivariate, t_max):
    i, j, d = cross_pairs(bivariate.pattern1, bivariate.pattern2, t_max)
    lags = bivariate.pattern2.points[j] - bivariate.pattern1.points[i]
    return i, j, d, lags


def c_global(bivariate, gamma12, kernel=None, h=None):
    """``Σ_{x∈X1, y∈X2} κ_b(h - (y-x)) / γ₁₂(h)``."""
    _check_bivariate(bivariate)
    _require_kind(gamma12, False)
    kernel = _kernel2d(kernel, bivariate.pattern1.n)
    hx, hy = _axes(h)
    _, _, _, lags = _xlags(bivariate, _reach(hx, hy, kernel))
    num = _smooth_surface(lags, np.ones(len(lags)), hx, hy, kernel)
    nodes = np.stack(np.meshgrid(hx, hy, indexing="ij"), axis=-1)
    vals = _divide_nodes(num, _gamma_at(gamma12, nodes), "γ₁₂(h)")
    return SurfaceEstimate(hx, hy, vals, "c_global", _meta(gamma=gamma12, b=kernel.sigma))


def c_global_iso(bivariate, gamma12, kernel=None, r=None):
    """``Σ κ̃_b(r - |y-x|) / (2π r γ₁₂^iso(r))``."""
    _check_bivariate(bivariate)
    _require_kind(gamma12, True)
    kernel = _kernel1d(kernel, bivariate.pattern1.n)
    r = _r_grid(r)
    _, _, d, _ = _xlags(bivariate, float(r.max() + kernel.support))
    num = _smooth_curve(d, np.ones(len(d)), r, kernel)
    vals = _divide_nodes(num, TWO_PI * r * _gamma_at(gamma12, r), "γ₁₂^iso(r)")
    return CurveEstimate(r, vals, "c_global_iso", _meta(gamma=gamma12, b=kernel.sigma))


def _cross_weights(bivariate, model1, model2, i, j, lags):
    r1 = intensity_at_points(model1, bivariate.pattern1)
    r2 = intensity_at_points(model2, bivariate.pattern2)
    _check_rho(r1, i, j, r2)
    return r1[i] * r2[j] * overlap_volume(bivariate.window, -lags)


def c_local(bivariate, model1, model2, kernel=None, h=None):
    """``Σ κ_b(h - (y-x)) / (ρ₁(x)ρ₂(y)|W ∩ W_{x-y}|)``."""
    _check_bivariate(bivariate)
    kernel = _kernel2d(kernel, bivariate.pattern1.n)
    hx, hy = _axes(h)
    i, j, _, lags = _xlags(bivariate, _reach(hx, hy, kernel))
    w = np.empty(0)
    if len(i):
        w = 1.0 / _pos(_cross_weights(bivariate, model1, model2, i, j, lags), i, j)
    vals = _smooth_surface(lags, w, hx, hy, kernel)
    return SurfaceEstimate(hx, hy, vals, "c_local", _meta(model1, b=kernel.sigma))


def c_local_iso(bivariate, model1, model2, kernel=None, r=None):
    """``Σ κ̃_b(r - |y-x|) / (2π r ρ₁(x)ρ₂(y)|W ∩ W_{x-y}|)``."""
    _check_bivariate(bivariate)
    kernel = _kernel1d(kernel, bivariate.pattern1.n)
    r = _r_grid(r)
    i, j, d, lags = _xlags(bivariate, float(r.max() + kernel.support))
    w = np.empty(0)
    if len(i):
        w = 1.0 / _pos(_cross_weights(bivariate, model1, model2, i, j, lags), i, j)
    vals = _smooth_curve(d, w, r, kernel) / (TWO_PI * r)
    return CurveEstimate(r, vals, "c_local_iso", _meta(model1, b=kernel.sigma))


def partial_integral(model1, window, h, alpha=DEFAULT_ALPHA, bank=None, seed=None):
    """``∫_{W ∩ W_{-h}} ρ₁`` at each lag in ``h`` (shape ``(..., 2)``) by Monte Carlo."""
    h = np.asarray(h, dtype=float)
    flat = h.reshape(-1, 2)
    if isinstance(model1, KnownIntensity) and model1.constant is not None:
        vals = model1.constant * overlap_volume(window, flat)
    else:
        bank = _bank_for(window, bank, seed)
        vals, *_ = _run(CrossProduct(model1, KnownIntensity(1.0)), window, list(flat), False, alpha, bank)
    return vals.reshape(h.shape[:-1])


def c_partial(bivariate, model2, integral1, kernel=None, h=None, alpha=DEFAULT_ALPHA, bank=None):
    """
    Partially reweighted cross pcf,
    ``Σ κ_b(h - (y-x)) / (ρ₂(y) ∫_{W ∩ W_{-h}} ρ₁)``.

    Parameters
    ----------
    integral1 : IntensityModel or callable
        Either the first process's intensity (the integral is then computed by
        Monte Carlo at every node) or a callable ``h -> ∫_{W ∩ W_{-h}} ρ₁``.
    """
    _check_bivariate(bivariate)
    kernel = _kernel2d(kernel, bivariate.pattern1.n)
    hx, hy = _axes(h)
    i, j, _, lags = _xlags(bivariate, _reach(hx, hy, kernel))
    w = np.empty(0)
    if len(i):
        r2 = intensity_at_points(model2, bivariate.pattern2)
        bad = ~(r2[j] > 0)
        if np.any(bad):
            raise EstimatorError(f"intensity at point {int(j[np.flatnonzero(bad)[0]])} of the second pattern is zero")
        w = 1.0 / r2[j]
    num = _smooth_surface(lags, w, hx, hy, kernel)
    nodes = np.stack(np.meshgrid(hx, hy, indexing="ij"), axis=-1)
    if isinstance(integral1, IntensityModel):
        den = partial_integral(integral1, bivariate.window, nodes, alpha, bank)
    else:
        den = np.asarray(integral1(nodes), dtype=float)
    vals = _divide_nodes(num, den, "∫_{W∩W_{-h}} ρ₁")
    return SurfaceEstimate(hx, hy, vals, "c_partial", _meta(model2, b=kernel.sigma))
