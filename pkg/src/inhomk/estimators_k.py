"""
K-function estimators: global (γ-normalised) and local (pointwise intensity)
weights, vector and isotropic edge corrections, one or two processes.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .gamma import GammaRangeError
from .geometry import isotropized_edge_factor, overlap_volume
from .kernel_intensity import intensity_at_points
from .pattern import BivariatePattern, cross_pairs, pair_iteration

__all__ = [
    "CurveEstimate",
    "EstimatorError",
    "default_t_grid",
    "k_global",
    "k_local",
    "k_global_iso",
    "k_local_iso",
    "k12_global",
    "k12_local",
    "k12_global_iso",
    "k12_local_iso",
    "l_transform",
    "ESTIMATORS",
]


class EstimatorError(ValueError):
    """A pair weight could not be formed (zero or unavailable denominator)."""


@dataclass
class CurveEstimate:
    """
    Function estimate on a distance grid.

    Attributes
    ----------
    t : numpy.ndarray
        Strictly increasing distances.
    values : numpy.ndarray
    estimator : str
        Identifier such as ``'k_global_iso'``.
    meta : dict
        Provenance: intensity descriptor, ``sigma``, ``b``, ``alpha``, ``seed``.
    """

    t: np.ndarray
    values: np.ndarray
    estimator: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.ndim != 1 or self.t.shape != self.values.shape:
            raise ValueError("t and values must be 1-D of equal length")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("grid must be strictly increasing")

    def to_csv(self, path):
        lines = [f"# estimator={self.estimator}"]
        lines += [f"# {k}={v}" for k, v in sorted(self.meta.items())]
        lines.append("t,value")
        lines += [f"{a:.17g},{b:.17g}" for a, b in zip(self.t, self.values)]
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        meta, rows = {}, []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line == "t,value":
                    continue
                if line.startswith("#"):
                    k, _, v = line[1:].strip().partition("=")
                    meta[k.strip()] = v.strip()
                else:
                    rows.append([float(x) for x in line.split(",")])
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        est = meta.pop("estimator", "")
        return cls(arr[:, 0], arr[:, 1], est, meta)


def default_t_grid(window=None, n=129, t_max=0.125):
    """Uniform grid on ``[0, t_max]``; ``t_max`` is scaled by the shorter window side."""
    if window is not None:
        t_max = t_max * min(window.width, window.height)
    return np.linspace(0.0, t_max, n)


def _grid(t, window):
    t = default_t_grid(window) if t is None else np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("distances must be non-negative")
    return t


def _cumulate(d, w, t):
    """``Σ_pairs w 1[d <= t]`` for every grid value, in a fixed summation order."""
    order = np.argsort(d, kind="stable")
    cs = np.concatenate([[0.0], np.cumsum(w[order])])
    return cs[np.searchsorted(d[order], t, side="right")]


def _pairs(pattern, t_max):
    i, j, d = pair_iteration(pattern, t_max)
    keep = d <= t_max
    return i[keep], j[keep], d[keep]


def _xpairs(bivariate, t_max):
    i, j, d = cross_pairs(bivariate.pattern1, bivariate.pattern2, t_max)
    keep = d <= t_max
    return i[keep], j[keep], d[keep]


def _safe_inverse(den, i, j, what):
    bad = ~(np.isfinite(den) & (den > 0))
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise EstimatorError(f"{what} is {den[k]:g} for pair ({i[k]}, {j[k]})")
    return 1.0 / den


def _eval_gamma(gamma, q, i, j):
    try:
        return np.asarray(gamma(q), dtype=float).reshape(len(i))
    except GammaRangeError as exc:
        raise EstimatorError(f"γ unavailable for pair ({i[0]}, {j[0]}) or later: {exc}") from exc


def _meta(model=None, gamma=None, **extra):
    meta = {}
    if model is not None:
        meta["intensity"] = getattr(model, "label", "?")
        if getattr(model, "sigma", None) is not None:
            meta["sigma"] = model.sigma
    if gamma is not None:
        meta.update({k: v for k, v in getattr(gamma, "meta", {}).items() if k in ("intensity", "sigma", "seed")})
        if getattr(gamma, "alpha", None) is not None:
            meta["alpha"] = gamma.alpha
    meta.update(extra)
    return meta


def _require_kind(gamma, isotropic):
    iso = getattr(gamma, "isotropic", None)
    if iso is not None and iso != isotropic:
        raise ValueError(f"expected {'an isotropic' if isotropic else 'a vector'} γ")


# ---------------------------------------------------------------- one process


def k_global(pattern, gamma, t=None):
    """``Σ≠ 1[|y-x| <= t] / γ(y-x)`` with a vector-lag γ."""
    _require_kind(gamma, False)
    t = _grid(t, pattern.window)
    i, j, d = _pairs(pattern, t.max())
    pts = pattern.points
    w = np.empty(0)
    if i.size:
        w = _safe_inverse(_eval_gamma(gamma, pts[j] - pts[i], i, j), i, j, "γ(y-x)")
    return CurveEstimate(t, _cumulate(d, w, t), "k_global", _meta(gamma=gamma))


def k_local(pattern, model, t=None):
    """
    ``Σ≠ 1[|y-x| <= t] / (ρ(x)ρ(y)|W ∩ W_{y-x}|)``.

    Intensities at data points come from ``model.at_points`` (leave-one-out for
    a leave-out kernel model).
    """
    t = _grid(t, pattern.window)
    i, j, d = _pairs(pattern, t.max())
    w = np.empty(0)
    if i.size:
        rho = intensity_at_points(model, pattern)
        _check_rho(rho, i, j)
        pts = pattern.points
        den = rho[i] * rho[j] * overlap_volume(pattern.window, pts[j] - pts[i])
        w = _safe_inverse(den, i, j, "ρ(x)ρ(y)|W∩W_{y-x}|")
    return CurveEstimate(t, _cumulate(d, w, t), "k_local", _meta(model))


def k_global_iso(pattern, gamma, t=None):
    """``Σ≠ 1[|y-x| <= t] / γ^iso(|y-x|)``."""
    _require_kind(gamma, True)
    t = _grid(t, pattern.window)
    i, j, d = _pairs(pattern, t.max())
    w = np.empty(0)
    if i.size:
        w = _safe_inverse(_eval_gamma(gamma, d, i, j), i, j, "γ^iso(|y-x|)")
    return CurveEstimate(t, _cumulate(d, w, t), "k_global_iso", _meta(gamma=gamma))


def k_local_iso(pattern, model, t=None):
    """``Σ≠ 1[|y-x| <= t] / (ρ(x)ρ(y) a_W(|y-x|))``."""
    t = _grid(t, pattern.window)
    i, j, d = _pairs(pattern, t.max())
    w = np.empty(0)
    if i.size:
        rho = intensity_at_points(model, pattern)
        _check_rho(rho, i, j)
        den = rho[i] * rho[j] * isotropized_edge_factor(pattern.window, d)
        w = _safe_inverse(den, i, j, "ρ(x)ρ(y)a_W(|y-x|)")
    return CurveEstimate(t, _cumulate(d, w, t), "k_local_iso", _meta(model))


def _check_rho(rho, i, j, rho2=None):
    r1 = rho[i]
    r2 = (rho if rho2 is None else rho2)[j]
    bad = ~((r1 > 0) & (r2 > 0))
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        who = int(i[k]) if not r1[k] > 0 else int(j[k])
        raise EstimatorError(f"intensity at point {who} is zero; pair ({i[k]}, {j[k]}) has no local weight")


# ---------------------------------------------------------------- two processes


def _check_bivariate(bp):
    if not isinstance(bp, BivariatePattern):
        raise TypeError("expected a BivariatePattern")


def k12_global(bivariate, gamma12, t=None):
    """``Σ_{x∈X1, y∈X2} 1[|y-x| <= t] / γ₁₂(y-x)``."""
    _check_bivariate(bivariate)
    _require_kind(gamma12, False)
    t = _grid(t, bivariate.window)
    i, j, d = _xpairs(bivariate, t.max())
    w = np.empty(0)
    if i.size:
        h = bivariate.pattern2.points[j] - bivariate.pattern1.points[i]
        w = _safe_inverse(_eval_gamma(gamma12, h, i, j), i, j, "γ₁₂(y-x)")
    return CurveEstimate(t, _cumulate(d, w, t), "k12_global", _meta(gamma=gamma12))


def k12_local(bivariate, model1, model2, t=None):
    """``Σ 1[|y-x| <= t] / (ρ₁(x)ρ₂(y)|W ∩ W_{y-x}|)``."""
    _check_bivariate(bivariate)
    t = _grid(t, bivariate.window)
    i, j, d = _xpairs(bivariate, t.max())
    w = np.empty(0)
    if i.size:
        r1 = intensity_at_points(model1, bivariate.pattern1)
        r2 = intensity_at_points(model2, bivariate.pattern2)
        _check_rho(r1, i, j, r2)
        h = bivariate.pattern2.points[j] - bivariate.pattern1.points[i]
        den = r1[i] * r2[j] * overlap_volume(bivariate.window, h)
        w = _safe_inverse(den, i, j, "ρ₁(x)ρ₂(y)|W∩W_{y-x}|")
    return CurveEstimate(t, _cumulate(d, w, t), "k12_local", _meta(model1))


def k12_global_iso(bivariate, gamma12, t=None):
    """``Σ 1[|y-x| <= t] / γ₁₂^iso(|y-x|)``."""
    _check_bivariate(bivariate)
    _require_kind(gamma12, True)
    t = _grid(t, bivariate.window)
    i, j, d = _xpairs(bivariate, t.max())
    w = np.empty(0)
    if i.size:
        w = _safe_inverse(_eval_gamma(gamma12, d, i, j), i, j, "γ₁₂^iso(|y-x|)")
    return CurveEstimate(t, _cumulate(d, w, t), "k12_global_iso", _meta(gamma=gamma12))


def k12_local_iso(bivariate, model1, model2, t=None):
    """``Σ 1[|y-x| <= t] / (ρ₁(x)ρ₂(y) a_W(|y-x|))``."""
    _check_bivariate(bivariate)
    t = _grid(t, bivariate.window)
    i, j, d = _xpairs(bivariate, t.max())
    w = np.empty(0)
    if i.size:
        r1 = intensity_at_points(model1, bivariate.pattern1)
        r2 = intensity_at_points(model2, bivariate.pattern2)
        _check_rho(r1, i, j, r2)
        den = r1[i] * r2[j] * isotropized_edge_factor(bivariate.window, d)
        w = _safe_inverse(den, i, j, "ρ₁(x)ρ₂(y)a_W(|y-x|)")
    return CurveEstimate(t, _cumulate(d, w, t), "k12_local_iso", _meta(model1))


def l_transform(curve):
    """``L(r) - r = sqrt(K(r)/π) - r``; metadata is preserved."""
    if np.any(curve.values < 0):
        raise ValueError("K values must be non-negative for the L-transform")
    vals = np.sqrt(curve.values / np.pi) - curve.t
    return replace(curve, values=vals, estimator=f"l_{curve.estimator}", meta=dict(curve.meta))


ESTIMATORS = {
    "k_global": k_global,
    "k_local": k_local,
    "k_global_iso": k_global_iso,
    "k_local_iso": k_local_iso,
    "k12_global": k12_global,
    "k12_local": k12_local,
    "k12_global_iso": k12_global_iso,
    "k12_local_iso": k12_local_iso,
}
