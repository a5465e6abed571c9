"""
Point-process generators for the simulation study: Poisson processes,
independent thinning with retention profiles, Gaussian random fields and
(bivariate) log-Gaussian Cox processes, plus analytic reference curves.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import _rng
from .estimators_k import CurveEstimate
from .geometry import UNIT_SQUARE, Window
from .kernel_intensity import profile_integral
from .pattern import BivariatePattern, PointPattern

__all__ = [
    "RetentionProfile",
    "GaussianFieldSpec",
    "GridField",
    "BivariateLgcpSpec",
    "FieldSimulationError",
    "simulate_poisson",
    "thin",
    "simulate_grf",
    "simulate_lgcp",
    "simulate_bivariate_lgcp",
    "simulate_independent_pair",
    "lgf_profile",
    "reference_curves",
    "reference_pcf",
    "true_k_from_pcf",
    "PROFILES",
]


class FieldSimulationError(RuntimeError):
    """Covariance embedding and dense fallback both failed."""


# ---------------------------------------------------------------- fields


@dataclass(frozen=True)
class GaussianFieldSpec:
    """
    Zero-mean Gaussian field with covariance ``variance * exp(-r / scale)``,
    sampled on a ``(resolution+1)²`` node lattice covering the window.
    """

    variance: float = 1.0
    scale: float = 0.05
    resolution: int = 256

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.resolution < 64:
            raise ValueError("resolution must be at least 64")

    def covariance(self, r):
        return self.variance * np.exp(-np.asarray(r, dtype=float) / self.scale)


class GridField:
    """Node values on a regular lattice over a window, with bilinear evaluation."""

    def __init__(self, values, window):
        self.values = np.asarray(values, dtype=float)
        self.window = window
        self.nx, self.ny = self.values.shape
        self.dx = window.width / (self.nx - 1)
        self.dy = window.height / (self.ny - 1)

    def __call__(self, xy):
        xy = np.asarray(xy, dtype=float)
        fx = np.clip((xy[..., 0] - self.window.x0) / self.dx, 0.0, self.nx - 1)
        fy = np.clip((xy[..., 1] - self.window.y0) / self.dy, 0.0, self.ny - 1)
        i = np.minimum(fx.astype(np.int64), self.nx - 2)
        j = np.minimum(fy.astype(np.int64), self.ny - 2)
        tx, ty = fx - i, fy - j
        v = self.values
        out = (
            v[i, j] * (1 - tx) * (1 - ty)
            + v[i + 1, j] * tx * (1 - ty)
            + v[i, j + 1] * (1 - tx) * ty
            + v[i + 1, j + 1] * tx * ty
        )
        return float(out) if out.ndim == 0 else out

    def map(self, func):
        return GridField(func(self.values), self.window)

    @property
    def max(self):
        return float(self.values.max())


def _embedding_eigenvalues(spec, window, pad):
    n = spec.resolution + 1
    mx, my = pad * spec.resolution, pad * spec.resolution
    dx, dy = window.width / spec.resolution, window.height / spec.resolution
    ix = np.minimum(np.arange(mx), mx - np.arange(mx)) * dx
    iy = np.minimum(np.arange(my), my - np.arange(my)) * dy
    cov = spec.covariance(np.hypot(ix[:, None], iy[None, :]))
    lam = np.fft.fft2(cov).real
    return lam, n, (mx, my)


_EMBED_CACHE = {}


def _embedding(spec, window):
    key = (spec, window)
    if key in _EMBED_CACHE:
        return _EMBED_CACHE[key]
    result = None
    for pad in (2, 4, 8):
        lam, n, shape = _embedding_eigenvalues(spec, window, pad)
        if lam.min() >= -1e-10 * lam.max():
            result = ("fft", np.sqrt(np.maximum(lam, 0.0) / lam.size), n, shape)
            break
    if result is None:
        result = _dense_factor(spec, window)
    if len(_EMBED_CACHE) > 16:
        _EMBED_CACHE.clear()
    _EMBED_CACHE[key] = result
    return result


def _dense_factor(spec, window, coarse=64):
    n = coarse + 1
    gx = np.linspace(window.x0, window.x1, n)
    gy = np.linspace(window.y0, window.y1, n)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    w, v = np.linalg.eigh(spec.covariance(d))
    if w.min() < -1e-8 * w.max():
        raise FieldSimulationError("covariance matrix is not positive semi-definite")
    return ("dense", v * np.sqrt(np.maximum(w, 0.0)), n, None)


def simulate_grf(spec, window=UNIT_SQUARE, seed=None):
    """
    One realisation of the field on the node lattice.

    Circulant embedding on a periodic grid twice the window size; eigenvalues
    above ``-1e-10`` (relative) are clipped to zero. Larger paddings are tried
    before falling back to a dense eigendecomposition on a coarser lattice,
    which is then bilinearly refined.
    """
    rng = _rng.as_generator(seed)
    method, factor, n, shape = _embedding(spec, window)
    if method == "fft":
        xi = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        z = np.fft.fft2(factor * xi).real[:n, :n]
        return GridField(z, window)
    coarse = GridField((factor @ rng.standard_normal(factor.shape[1])).reshape(n, n), window)
    m = spec.resolution + 1
    gx = np.linspace(window.x0, window.x1, m)
    gy = np.linspace(window.y0, window.y1, m)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    return GridField(coarse(np.stack([xx, yy], axis=-1)), window)


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class RetentionProfile:
    """
    Retention probability ``p(x)`` used for independent thinning.

    ``kind`` is one of ``constant`` (``value``), ``hole``, ``waves``,
    ``deep_waves`` or ``lgf`` (``field`` holds the realised ``λ`` lattice).
    """

    kind: str = "constant"
    value: float = 1.0
    field: GridField = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in PROFILES:
            raise ValueError(f"unknown profile {self.kind!r}; choose from {sorted(PROFILES)}")
        if self.kind == "constant" and not 0 <= self.value <= 1:
            raise ValueError("constant retention must lie in [0, 1]")
        if self.kind == "lgf" and self.field is None:
            raise ValueError("lgf profile needs a realised field; use lgf_profile()")

    def __call__(self, xy):
        xy = np.asarray(xy, dtype=float)
        x, y = xy[..., 0], xy[..., 1]
        if self.kind == "constant":
            out = np.full(x.shape, float(self.value))
        elif self.kind == "hole":
            out = 1.0 - 0.5 * np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / 0.18)
        elif self.kind == "waves":
            out = 1.0 - 0.5 * np.cos(5.0 * x) ** 2
        elif self.kind == "deep_waves":
            out = 1.0 - 0.9 * np.cos(5.0 * x) ** 2
        else:
            out = np.asarray(self.field(xy)) / self.field.max
        return float(out) if np.ndim(out) == 0 else out

    @property
    def sup(self):
        """Upper bound of ``p`` on the window."""
        return float(self.value) if self.kind == "constant" else 1.0


PROFILES = ("constant", "hole", "waves", "deep_waves", "lgf")


def lgf_profile(window=UNIT_SQUARE, seed=None, variance=0.1, scale=0.3, resolution=256):
    """``p = λ / sup λ`` with ``log λ`` a Gaussian field (variance .1, scale .3 by default)."""
    z = simulate_grf(GaussianFieldSpec(variance, scale, resolution), window, seed)
    return RetentionProfile("lgf", field=z.map(np.exp))


def _profile(profile):
    if profile is None:
        return RetentionProfile()
    if isinstance(profile, str):
        return RetentionProfile(profile)
    return profile


# ---------------------------------------------------------------- processes


def _grid_sup(func, window, m=513):
    gx = np.linspace(window.x0, window.x1, m)
    gy = np.linspace(window.y0, window.y1, m)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    return float(np.max(func(np.stack([xx, yy], axis=-1))))


def simulate_poisson(window=UNIT_SQUARE, intensity=400.0, seed=None, bound=None):
    """
    Poisson process with constant or location-dependent intensity.

    A function intensity is simulated by thinning a homogeneous process at
    rate ``bound``; without ``bound`` the supremum is taken over a 513² lattice
    and inflated by 5%.
    """
    rng = _rng.as_generator(seed)
    if callable(intensity):
        lam = bound if bound is not None else 1.05 * _grid_sup(intensity, window)
        if lam < 0:
            raise ValueError("intensity must be non-negative")
        n = rng.poisson(lam * window.area)
        pts = window.uniform(rng, n)
        vals = np.asarray(intensity(pts), dtype=float)
        if np.any(vals < 0):
            raise ValueError("intensity must be non-negative")
        if np.any(vals > lam * (1 + 1e-12)):
            raise ValueError("intensity exceeds the dominating bound")
        keep = rng.random(n) * lam < vals
        pts = pts[keep]
    else:
        lam = float(intensity)
        if lam < 0:
            raise ValueError("intensity must be non-negative")
        pts = window.uniform(rng, rng.poisson(lam * window.area))
    return PointPattern(pts, window)


def thin(pattern, profile, seed=None):
    """Keep each point independently with probability ``profile(x)``."""
    rng = _rng.as_generator(seed)
    profile = _profile(profile)
    if pattern.n == 0:
        return pattern
    p = np.asarray(profile(pattern.points), dtype=float)
    keep = rng.random(pattern.n) < p
    return PointPattern(pattern.points[keep], pattern.window, dict(pattern.metadata))


def _cox_points(window, rng, scale, efield, profile):
    """Inhomogeneous Poisson draw with intensity ``scale * efield(u) * p(u)``."""
    lam = scale * efield.max * profile.sup
    n = rng.poisson(lam * window.area)
    pts = window.uniform(rng, n)
    val = scale * efield(pts) * np.asarray(profile(pts), dtype=float)
    keep = rng.random(n) * lam < val
    return pts[keep]


def _mu_for(target, variance, window, profile):
    integral = profile_integral(profile, window) if profile.kind != "constant" else profile.value * window.area
    if not integral > 0:
        raise ValueError("retention profile integrates to zero")
    return math.log(target) - 0.5 * variance - math.log(integral)


def simulate_lgcp(
    window=UNIT_SQUARE,
    n_expected=400.0,
    spec=GaussianFieldSpec(),
    profile=None,
    seed=None,
    mu=None,
    loading=1.0,
):
    """
    Log-Gaussian Cox process ``Λ(u) = p(u) exp{μ + Y(u)}``, optionally thinned.

    The field enters as ``loading * Y``; ``loading = 0`` gives a Poisson process.
    ``μ`` solves ``E N = e^{μ + v/2} ∫_W p = n_expected`` unless given. The
    intensity between lattice nodes is the bilinear interpolation of
    ``exp(Y)``, whose mean is exactly ``e^{v/2}`` everywhere.
    """
    if not n_expected > 0:
        raise ValueError("n_expected must be positive")
    rng = _rng.as_generator(seed)
    profile = _profile(profile)
    v = loading * loading * spec.variance
    if mu is None:
        mu = _mu_for(n_expected, v, window, profile)
    if loading == 0:
        efield = GridField(np.ones((2, 2)), window)
    else:
        efield = simulate_grf(spec, window, rng).map(lambda z: np.exp(loading * z))
    pts = _cox_points(window, rng, math.exp(mu), efield, profile)
    return PointPattern(pts, window, {"mu": mu})


@dataclass(frozen=True)
class BivariateLgcpSpec:
    """
    ``Λ_i(u) = p(u) exp{μ_i + α_i Y(u) + sqrt(β) U_i(u)}`` with independent
    unit-variance exponential fields ``Y`` (scale ``phi``) and ``U_i``
    (scales ``psi1``, ``psi2``).

    The private fields enter with loading ``sqrt(β)`` so the pair correlation
    of component ``i`` is ``exp{α_i² e^{-r/φ} + β e^{-r/ψ_i}}``.
    """

    alpha1: float = 1.0
    alpha2: float = -1.0
    beta: float = 0.25
    phi: float = 0.03
    psi1: float = 0.02
    psi2: float = 0.01
    n_expected1: float = 400.0
    n_expected2: float = 400.0
    profile: RetentionProfile = field(default_factory=RetentionProfile)
    resolution: int = 256

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not (self.n_expected1 > 0 and self.n_expected2 > 0):
            raise ValueError("target counts must be positive")

    @classmethod
    def segregated(cls, **kw):
        return cls(alpha1=1.0, alpha2=-1.0, **kw)

    @classmethod
    def co_clustered(cls, **kw):
        return cls(alpha1=1.0, alpha2=1.0, **kw)

    def pcf(self, i, r):
        a, psi = (self.alpha1, self.psi1) if i == 1 else (self.alpha2, self.psi2)
        r = np.asarray(r, dtype=float)
        return np.exp(a * a * np.exp(-r / self.phi) + self.beta * np.exp(-r / psi))

    def cross_pcf(self, r):
        return np.exp(self.alpha1 * self.alpha2 * np.exp(-np.asarray(r, dtype=float) / self.phi))


def simulate_bivariate_lgcp(spec, window=UNIT_SQUARE, seed=None):
    """Bivariate LGCP per :class:`BivariateLgcpSpec`, each component calibrated to its target count."""
    rng = _rng.as_generator(seed)
    profile = _profile(spec.profile)
    res = spec.resolution
    y = simulate_grf(GaussianFieldSpec(1.0, spec.phi, res), window, rng).values
    comps = []
    for a, psi, target in ((spec.alpha1, spec.psi1, spec.n_expected1), (spec.alpha2, spec.psi2, spec.n_expected2)):
        u = simulate_grf(GaussianFieldSpec(1.0, psi, res), window, rng).values
        efield = GridField(np.exp(a * y + math.sqrt(spec.beta) * u), window)
        mu = _mu_for(target, a * a + spec.beta, window, profile)
        comps.append(PointPattern(_cox_points(window, rng, math.exp(mu), efield, profile), window, {"mu": mu}))
    return BivariatePattern(comps[0], comps[1])


def simulate_independent_pair(window=UNIT_SQUARE, n_expected=(400.0, 400.0), profile=None, seed=None):
    """Two independent Poisson processes thinned by a common profile."""
    rng = _rng.as_generator(seed)
    profile = _profile(profile)
    integral = profile_integral(profile, window) if profile.kind != "constant" else profile.value * window.area
    pats = []
    for target in n_expected:
        base = simulate_poisson(window, target / integral, rng)
        pats.append(thin(base, profile, rng))
    return BivariatePattern(pats[0], pats[1])


# ---------------------------------------------------------------- truths

_REFERENCE = {
    "poisson": lambda r: np.ones_like(r),
    "g_lgcp": lambda r: np.exp(np.exp(-r / 0.05)),
    "g_dpp": lambda r: 1.0 - np.exp(-2.0 * (r / 0.02) ** 2),
    "c_segr": lambda r: np.exp(-np.exp(-r / 0.03)),
    "c_cluster": lambda r: np.exp(np.exp(-r / 0.03)),
}


def reference_pcf(name):
    """Analytic isotropic pair correlation function by name."""
    try:
        return _REFERENCE[name]
    except KeyError:
        raise ValueError(f"unknown reference curve {name!r}; choose from {sorted(_REFERENCE)}") from None


def reference_curves(name, r):
    """Evaluate a named analytic (cross) pair correlation function on ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distances must be non-negative")
    return CurveEstimate(r, reference_pcf(name)(r), name)


def true_k_from_pcf(g, t):
    """
    ``K(t) = 2π ∫_0^t g(r) r dr`` by adaptive quadrature between grid points.

    ``g`` is a name accepted by :func:`reference_pcf`, a callable, or a
    :class:`CurveEstimate` from :func:`reference_curves`.
    """
    if isinstance(g, CurveEstimate):
        g = reference_pcf(g.estimator)
    elif isinstance(g, str):
        g = reference_pcf(g)
    t = np.asarray(t, dtype=float)
    if np.any(np.diff(t) <= 0) or np.any(t < 0):
        raise ValueError("t must be non-negative and strictly increasing")
    acc = 0.0
    prev = 0.0
    out = np.empty(len(t))
    for k, tk in enumerate(t):
        if tk > prev:
            val, _ = integrate.quad(lambda s: float(g(np.asarray(s))) * s, prev, tk, epsabs=0.0, epsrel=1e-12, limit=200)
            acc += val
        out[k] = 2.0 * np.pi * acc
        prev = tk
    name = getattr(g, "__name__", "pcf")
    return CurveEstimate(t, out, "k_true", {"pcf": name})
