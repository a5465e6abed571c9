"""
Monte Carlo estimation of the global normalisation factors.

``γ(h) = ∫_{W∩W_{-h}} ρ(u)ρ(u+h) du`` and its angular average ``γ^iso(r)``,
plus the cross versions with two intensities. Estimates use uniform samples
drawn from a shared :class:`SampleBank`; for every lag the accepted samples
form an ordered subsequence of the bank, so evaluations at nearby lags share
random numbers and the resulting curves are smooth enough to interpolate.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _rng
from .geometry import Window, contains, isotropized_edge_factor, overlap_volume
from .kernel_intensity import IntensityModel, KernelIntensity, KnownIntensity

__all__ = [
    "SampleBank",
    "GammaResult",
    "GammaFunction",
    "AnalyticGamma",
    "GammaError",
    "GammaRangeError",
    "GammaPrecisionWarning",
    "CrossProduct",
    "gamma_mc",
    "gamma_iso_mc",
    "gamma12_mc",
    "gamma12_iso_mc",
    "build_interpolated_gamma",
    "direct_gamma",
    "save_gamma_csv",
    "load_gamma_csv",
    "DEFAULT_ALPHA",
    "N_START",
    "N_CAP",
]

DEFAULT_ALPHA = 0.005
N_START = 1024
N_CAP = 2**22
_TINY_OVERLAP = 1e-12

KINDS = ("vector", "isotropic", "cross-vector", "cross-isotropic")


class GammaError(RuntimeError):
    """Degenerate γ integrand (zero intensity over the integration region)."""


class GammaRangeError(ValueError):
    """Query outside the interpolation grid."""


class GammaPrecisionWarning(UserWarning):
    """Sample cap reached before the requested coefficient of variation."""


class SampleBank:
    """
    Deterministic, extendable sequences of uniform points ``V_j`` on ``W`` and
    uniform directions ``t_j`` on the unit circle.

    Entries are generated in fixed-size blocks, each from its own counter-based
    stream keyed by ``(seed, block)``, so growing the bank never alters
    existing entries.
    """

    def __init__(self, window, seed=0, block=65536):
        self.window = window
        self.seed = int(seed)
        self.block = int(block)
        self._pts = np.empty((0, 2))
        self._dirs = np.empty((0, 2))

    def __len__(self):
        return self._pts.shape[0]

    def ensure(self, m):
        blocks = []
        b = len(self) // self.block
        while len(self) + len(blocks) * self.block < m:
            rng = _rng.stream(self.seed, 7, b + len(blocks))
            pts = self.window.uniform(rng, self.block)
            ang = 2.0 * np.pi * rng.random(self.block)
            blocks.append((pts, np.stack([np.cos(ang), np.sin(ang)], axis=1)))
            if len(blocks) > 4096:
                raise MemoryError("sample bank request too large")
        if blocks:
            self._pts = np.concatenate([self._pts] + [p for p, _ in blocks])
            self._dirs = np.concatenate([self._dirs] + [d for _, d in blocks])

    def points(self, m):
        self.ensure(m)
        return self._pts[:m]

    def directions(self, m):
        self.ensure(m)
        return self._dirs[:m]


@dataclass(frozen=True)
class GammaResult:
    value: float
    cv: float
    n: int
    converged: bool = True

    def __iter__(self):
        return iter((self.value, self.cv, self.n))


class CrossProduct(IntensityModel):
    """Integrand ``ρ₁(u) ρ₂(v)`` for the two-process factors (no leave-out)."""

    label = "cross"

    def __init__(self, model1, model2):
        self.model1 = model1
        self.model2 = model2

    @property
    def sigma(self):
        s = [m.sigma for m in (self.model1, self.model2) if m.sigma is not None]
        return min(s) if s else None

    def evaluate(self, x):
        raise TypeError("CrossProduct only supports product evaluation")

    def product_evaluate(self, u, v):
        return _first(self.model1, u) * _first(self.model2, v)


def _first(model, x):
    if isinstance(model, KernelIntensity) and model.leave_out:
        # cross products carry no diagonal terms: use the plain estimate
        return KernelIntensity.evaluate(model, x)
    return np.asarray(model.evaluate(x), dtype=float)


# ---------------------------------------------------------------- MC engine


class _Integrand:
    """
    Per-sample integrand values for a bank-indexed set of ``u`` samples.

    The factor depending only on ``u`` is cached over the bank prefix, since
    all lags reuse the same ``V_j``.
    """

    def __init__(self, model, bank):
        self.model = model
        self.bank = bank
        self._cache = np.empty((0,))
        self._cache_w = np.empty((0,))
        if isinstance(model, CrossProduct):
            self.mode = "cross"
        elif isinstance(model, KernelIntensity):
            self.mode = "kernel"
        else:
            self.mode = "generic"

    def _first(self, m):
        if self.mode == "generic":
            return None
        if self._cache.shape[0] < m:
            start = self._cache.shape[0]
            u = self.bank.points(m)[start:]
            if self.mode == "cross":
                extra = _first(self.model.model1, u)
                self._cache = np.concatenate([self._cache, extra])
            else:
                mdl = self.model
                from .kernel_intensity import edge_weight

                w = edge_weight(mdl.window, u, mdl.kernel)
                raw = mdl._sums(u) / mdl.kernel.peak
                self._cache = np.concatenate([self._cache, raw])
                self._cache_w = np.concatenate([self._cache_w, w])
        return self._cache

    def values(self, idx, v):
        u = self.bank.points(int(idx.max()) + 1 if idx.size else 0)[idx]
        if idx.size == 0:
            return np.empty(0)
        if self.mode == "generic":
            return np.asarray(self.model.product_evaluate(u, v), dtype=float)
        first = self._first(int(idx.max()) + 1)
        if self.mode == "cross":
            return first[idx] * _first(self.model.model2, v)
        mdl = self.model
        if mdl._cells is None:
            return np.zeros(idx.size)
        from . import _accel
        from .kernel_intensity import edge_weight

        v = np.ascontiguousarray(v)
        sv, diag = _accel.gauss_second_sums(
            np.ascontiguousarray(u[:, 0]),
            np.ascontiguousarray(u[:, 1]),
            np.ascontiguousarray(v[:, 0]),
            np.ascontiguousarray(v[:, 1]),
            *mdl._cells.grid,
            mdl.kernel.support,
            0.5 / mdl.kernel.sigma**2,
        )
        num = first[idx] * sv
        if mdl.leave_out:
            num = np.maximum(num - diag, 0.0)
        w = self._cache_w[idx] * edge_weight(mdl.window, v, mdl.kernel)
        return num * (mdl.kernel.peak**2) / w


class _Node:
    """Accepted-sample bookkeeping and running moments for one lag."""

    __slots__ = ("lag", "iso", "scale", "scanned", "accepted", "n", "mean", "m2")

    def __init__(self, lag, iso, scale):
        self.lag = lag
        self.iso = iso
        self.scale = scale
        self.scanned = 0
        self.accepted = np.empty(0, dtype=np.int64)
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def partner(self, bank, idx):
        u = bank.points(int(idx.max()) + 1)[idx]
        if self.iso:
            return u + self.lag * bank.directions(int(idx.max()) + 1)[idx]
        return u + self.lag

    def take(self, bank, window, count):
        """Indices of the next ``count`` accepted bank entries."""
        need = self.n + count
        while self.accepted.size < need:
            lo = self.scanned
            hi = max(lo + 2 * (need - self.accepted.size) + 1024, lo + bank.block // 4)
            bank.ensure(hi)
            u = bank.points(hi)[lo:hi]
            if self.iso:
                v = u + self.lag * bank.directions(hi)[lo:hi]
            else:
                v = u + self.lag
            ok = np.flatnonzero(contains(window, v)) + lo
            self.accepted = np.concatenate([self.accepted, ok])
            self.scanned = hi
        return self.accepted[self.n : need]

    def update(self, vals):
        k = vals.size
        if k == 0:
            return
        bm = float(vals.mean())
        bm2 = float(((vals - bm) ** 2).sum())
        tot = self.n + k
        delta = bm - self.mean
        self.mean += delta * k / tot
        self.m2 += bm2 + delta * delta * self.n * k / tot
        self.n = tot

    @property
    def cv(self):
        if self.n < 2:
            return math.inf
        sd = math.sqrt(self.m2 / (self.n - 1))
        if self.mean <= 0:
            return 0.0 if sd == 0 and self.mean == 0 else math.inf
        return sd / (math.sqrt(self.n) * self.mean)

    def required(self, alpha):
        """Sample size the current moments predict for ``cv < alpha``."""
        if self.n < 2 or self.mean <= 0:
            return math.inf
        sd = math.sqrt(self.m2 / (self.n - 1))
        return (sd / (alpha * self.mean)) ** 2


def _run(model, window, lags, iso, alpha, bank, n=None, cap=N_CAP, n0=N_START):
    """
    Estimate γ at every lag with a shared sample size.

    All lags advance together: the sample size starts at ``n0`` and grows
    (at most doubling, otherwise to just past the size the running variance
    predicts) until every lag has ``cv < alpha`` or ``cap`` is reached.
    With ``n`` given, exactly ``n`` samples are used per lag.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    integrand = _Integrand(model, bank)
    symmetric = not isinstance(model, CrossProduct)
    nodes = []
    for lag in lags:
        if iso:
            scale = float(isotropized_edge_factor(window, lag))
        else:
            scale = float(overlap_volume(window, lag))
        if not iso:
            lag = np.asarray(lag, dtype=float)
            if symmetric and (lag[0] < 0 or (lag[0] == 0 and lag[1] < 0)):
                # γ(h) = γ(-h) for symmetric integrands: evaluate one canonical half-plane
                lag = -lag
        nodes.append(_Node(lag, iso, scale))
    live = [nd for nd in nodes if nd.scale >= _TINY_OVERLAP]
    target = n0 if n is None else int(n)
    converged = True
    while live:
        for nd in live:
            idx = nd.take(bank, window, target - nd.n)
            nd.update(integrand.values(idx, nd.partner(bank, idx)))
        if n is not None:
            break
        worst = max(nd.cv for nd in live)
        if worst < alpha:
            break
        if target >= cap:
            converged = False
            break
        need = max(nd.required(alpha) for nd in live)
        step = target + n0 if not math.isfinite(need) else max(target + n0, math.ceil(1.05 * need / n0) * n0)
        target = int(min(2 * target, step, cap))
    values = np.zeros(len(nodes))
    cvs = np.zeros(len(nodes))
    ns = np.zeros(len(nodes), dtype=np.int64)
    for i, nd in enumerate(nodes):
        if nd.scale < _TINY_OVERLAP:
            continue
        if nd.mean <= 0:
            raise GammaError(
                f"sample mean of the γ integrand is {nd.mean:g} at lag {nd.lag}: zero-intensity region"
            )
        values[i] = nd.scale * nd.mean
        cvs[i] = nd.cv
        ns[i] = nd.n
    if not converged:
        warnings.warn(
            f"γ Monte Carlo reached the cap of {cap} samples with cv {cvs.max():.2e} >= alpha {alpha:g}",
            GammaPrecisionWarning,
            stacklevel=3,
        )
    return values, cvs, ns, converged


def _bank_for(window, bank, seed):
    if bank is None:
        return SampleBank(window, seed=0 if seed is None else seed)
    if bank.window != window:
        raise ValueError("sample bank window differs from the estimation window")
    return bank


def gamma_mc(model, window, h, alpha=DEFAULT_ALPHA, bank=None, n=None, seed=None, cap=N_CAP):
    """
    Monte Carlo estimate of ``γ(h)``.

    ``|W ∩ W_{-h}|`` times the sample mean of ``model.product_evaluate(U, U+h)``
    over the bank subsequence with ``U + h ∈ W``; the sample size grows until
    the coefficient of variation drops below ``alpha``.

    Returns
    -------
    GammaResult
        ``(value, cv, n)``; exact 0 with ``n = 0`` for disjoint translates.
    """
    bank = _bank_for(window, bank, seed)
    vals, cvs, ns, ok = _run(model, window, [np.asarray(h, dtype=float)], False, alpha, bank, n=n, cap=cap)
    return GammaResult(float(vals[0]), float(cvs[0]), int(ns[0]), ok)


def gamma_iso_mc(model, window, r, alpha=DEFAULT_ALPHA, bank=None, n=None, seed=None, cap=N_CAP):
    """
    Monte Carlo estimate of ``γ^iso(r)``.

    Pairs ``(V_j, t_j)`` are accepted when ``V_j + r t_j ∈ W``; accepted pairs
    are uniform on ``{(u, s): u + rs ∈ W}``, whose measure ``2π a_W(r)`` is
    folded in exactly.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    bank = _bank_for(window, bank, seed)
    vals, cvs, ns, ok = _run(model, window, [float(r)], True, alpha, bank, n=n, cap=cap)
    return GammaResult(float(vals[0]), float(cvs[0]), int(ns[0]), ok)


def gamma12_mc(model1, model2, window, h, alpha=DEFAULT_ALPHA, bank=None, n=None, seed=None, cap=N_CAP):
    """``γ₁₂(h) = ∫_{W∩W_{-h}} ρ₁(u) ρ₂(u+h) du`` by Monte Carlo."""
    return gamma_mc(CrossProduct(model1, model2), window, h, alpha, bank, n, seed, cap)


def gamma12_iso_mc(model1, model2, window, r, alpha=DEFAULT_ALPHA, bank=None, n=None, seed=None, cap=N_CAP):
    """Angular average of ``γ₁₂`` at distance ``r`` by Monte Carlo."""
    return gamma_iso_mc(CrossProduct(model1, model2), window, r, alpha, bank, n, seed, cap)


# ------------------------------------------------------------ γ as a function


@dataclass
class GammaFunction:
    """
    Evaluable γ: interpolated from a grid, or direct Monte Carlo per query.

    Isotropic kinds interpolate linearly on ``grid`` (distances); vector kinds
    interpolate bilinearly on the square lattice ``grid x grid``.
    """

    kind: str
    alpha: float
    grid: np.ndarray
    values: np.ndarray
    cv: np.ndarray
    n: np.ndarray
    mode: str = "interpolated"
    converged: bool = True
    meta: dict = field(default_factory=dict)
    _direct: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown γ kind {self.kind!r}")
        if self.mode == "interpolated" and not self.isotropic:
            self._interp = RegularGridInterpolator(
                (self.grid, self.grid), self.values, method="linear", bounds_error=True
            )

    @property
    def isotropic(self):
        return self.kind.endswith("isotropic")

    @property
    def spacing(self):
        return float(self.grid[1] - self.grid[0]) if len(self.grid) > 1 else math.inf

    def scaled(self, factor):
        """Copy with values multiplied by ``factor`` (exact for a rescaled intensity)."""
        return GammaFunction(
            self.kind, self.alpha, self.grid, self.values * factor, self.cv, self.n,
            self.mode, self.converged, dict(self.meta), self._direct,
        )

    def __call__(self, q):
        if self.mode == "direct":
            return self._call_direct(q)
        q = np.asarray(q, dtype=float)
        if self.isotropic:
            lo, hi = self.grid[0], self.grid[-1]
            if q.size and (q.min() < lo or q.max() > hi):
                raise GammaRangeError(f"distance outside interpolation range [{lo}, {hi}]")
            out = np.interp(q, self.grid, self.values)
        else:
            lo, hi = self.grid[0], self.grid[-1]
            if q.size and (q.min() < lo or q.max() > hi):
                raise GammaRangeError(f"lag outside interpolation box [{lo}, {hi}]^2")
            out = self._interp(q.reshape(-1, 2)).reshape(q.shape[:-1])
        return float(out) if np.ndim(out) == 0 else out

    def _call_direct(self, q):
        model, window, bank = self._direct
        q = np.asarray(q, dtype=float)
        if self.isotropic:
            flat = q.reshape(-1)
            uniq, inv = np.unique(flat, return_inverse=True)
            vals, *_ = _run(model, window, list(uniq), True, self.alpha, bank)
            out = vals[inv].reshape(q.shape)
        else:
            flat = q.reshape(-1, 2)
            uniq, inv = np.unique(flat, axis=0, return_inverse=True)
            vals, *_ = _run(model, window, list(uniq), False, self.alpha, bank)
            out = vals[np.ravel(inv)].reshape(q.shape[:-1])
        return float(out) if np.ndim(out) == 0 else out


class AnalyticGamma:
    """
    Exact γ for constant intensities: ``ρ₁ρ₂ |W ∩ W_{-h}|`` (vector kinds) or
    ``ρ₁ρ₂ a_W(r)`` (isotropic kinds).
    """

    def __init__(self, window, rho1, rho2=None, kind="isotropic"):
        if kind not in KINDS:
            raise ValueError(f"unknown γ kind {kind!r}")
        self.window = window
        self.kind = kind
        self.c = float(rho1) * float(rho1 if rho2 is None else rho2)

    @property
    def isotropic(self):
        return self.kind.endswith("isotropic")

    def __call__(self, q):
        if self.isotropic:
            return self.c * isotropized_edge_factor(self.window, q)
        return self.c * overlap_volume(self.window, q)


def _kernel_sigma(model):
    return getattr(model, "sigma", None)


def _default_spacing(sigma, extent):
    base = extent / 25.0
    return base if sigma is None else min(sigma / 10.0, base)


def build_interpolated_gamma(
    model,
    window,
    kind="isotropic",
    r_max=0.125,
    spacing=None,
    alpha=DEFAULT_ALPHA,
    bank=None,
    model2=None,
    seed=None,
):
    """
    Tabulate γ on a uniform grid for later interpolation.

    Parameters
    ----------
    model : IntensityModel
        Intensity for γ, or the first process for the cross kinds.
    kind : {'isotropic', 'vector', 'cross-isotropic', 'cross-vector'}
    r_max : float
        Isotropic kinds cover ``[0, r_max]``; vector kinds cover
        ``[-r_max, r_max]²``. The grid end is rounded up to a whole spacing.
    spacing : float, optional
        Node spacing; defaults to ``min(σ/10, r_max/25)``. Kernel models
        require ``spacing <= σ/10``.
    alpha : float
        Coefficient-of-variation threshold shared by all nodes.
    model2 : IntensityModel, optional
        Second process for the cross kinds.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown γ kind {kind!r}")
    cross = kind.startswith("cross")
    if cross != (model2 is not None):
        raise ValueError("cross kinds need model2; univariate kinds must not pass it")
    integrand = CrossProduct(model, model2) if cross else model
    sig = _kernel_sigma(integrand)
    if spacing is None:
        spacing = _default_spacing(sig, r_max)
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if sig is not None and spacing > sig / 10.0 * (1 + 1e-9):
        raise ValueError(f"spacing {spacing:g} exceeds σ/10 = {sig / 10:g} for a kernel-based intensity")
    m = int(math.ceil(r_max / spacing - 1e-9))
    bank = _bank_for(window, bank, seed)
    meta = {"intensity": getattr(model, "label", "?"), "sigma": sig, "seed": bank.seed}
    if kind.endswith("isotropic"):
        grid = np.arange(m + 1) * spacing
        vals, cvs, ns, ok = _run(integrand, window, list(grid), True, alpha, bank)
        return GammaFunction(kind, alpha, grid, vals, cvs, ns, "interpolated", ok, meta)
    axis = np.arange(-m, m + 1) * spacing
    hx, hy = np.meshgrid(axis, axis, indexing="ij")
    # evaluate one half-plane and mirror: γ(h) = γ(-h)
    half = (hx > 0) | ((hx == 0) & (hy >= 0))
    lags = np.stack([hx[half], hy[half]], axis=1)
    vals_h, cvs_h, ns_h, ok = _run(integrand, window, list(lags), False, alpha, bank)
    vals = np.zeros(hx.shape)
    cvs = np.zeros(hx.shape)
    ns = np.zeros(hx.shape, dtype=np.int64)
    vals[half], cvs[half], ns[half] = vals_h, cvs_h, ns_h
    mirror = ~half
    vals[mirror] = vals[::-1, ::-1][mirror]
    cvs[mirror] = cvs[::-1, ::-1][mirror]
    ns[mirror] = ns[::-1, ::-1][mirror]
    return GammaFunction(kind, alpha, axis, vals, cvs, ns, "interpolated", ok, meta)


def direct_gamma(model, window, kind="isotropic", alpha=DEFAULT_ALPHA, bank=None, model2=None, seed=None):
    """γ evaluated by fresh Monte Carlo at every distinct query (no interpolation)."""
    cross = kind.startswith("cross")
    integrand = CrossProduct(model, model2) if cross else model
    bank = _bank_for(window, bank, seed)
    empty = np.empty(0)
    return GammaFunction(
        kind, alpha, empty, empty, empty, np.empty(0, dtype=np.int64), mode="direct",
        meta={"intensity": getattr(model, "label", "?")}, _direct=(integrand, window, bank),
    )


def save_gamma_csv(gamma, path):
    """Write an isotropic grid as ``r,gamma,cv`` with ``#`` metadata lines."""
    if not gamma.isotropic or gamma.mode != "interpolated":
        raise ValueError("only interpolated isotropic γ grids can be cached")
    lines = [
        f"# kind={gamma.kind}",
        f"# alpha={gamma.alpha!r}",
        f"# n={int(np.max(gamma.n)) if len(gamma.n) else 0}",
    ]
    for k, v in sorted(gamma.meta.items()):
        lines.append(f"# {k}={v}")
    lines.append("r,gamma,cv")
    lines.extend(f"{r:.17g},{g:.17g},{c:.17g}" for r, g, c in zip(gamma.grid, gamma.values, gamma.cv))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gamma_csv(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
                continue
            if line == "r,gamma,cv":
                continue
            rows.append([float(x) for x in line.split(",")])
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    kind = meta.pop("kind", "isotropic")
    alpha = float(meta.pop("alpha", "nan"))
    n = int(meta.pop("n", "0"))
    return GammaFunction(
        kind, alpha, arr[:, 0], arr[:, 1], arr[:, 2], np.full(len(arr), n, dtype=np.int64), meta=meta
    )
