"""
Replication experiments: simulate patterns, select bandwidths, build γ,
estimate curves, and aggregate means, pointwise envelopes and RIMSE.
"""

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import _rng
from .estimators_k import ESTIMATORS as K_ESTIMATORS
from .estimators_k import CurveEstimate, EstimatorError, default_t_grid
from .estimators_pcf import c_global_iso, c_local_iso, default_pcf_bandwidth, g_global_iso, g_local_iso
from .gamma import AnalyticGamma, GammaError, build_interpolated_gamma
from .geometry import UNIT_SQUARE, Window
from .kernel_intensity import (
    BandwidthSelectionError,
    Kernel1D,
    Kernel2D,
    KernelIntensity,
    KnownIntensity,
    ParametricIntensity,
    bandwidth_cvl,
    bandwidth_lcv,
    profile_integral,
)
from .simulate import (
    BivariateLgcpSpec,
    PROFILES,
    GaussianFieldSpec,
    RetentionProfile,
    lgf_profile,
    simulate_bivariate_lgcp,
    simulate_independent_pair,
    simulate_lgcp,
    simulate_poisson,
    thin,
    true_k_from_pcf,
    reference_pcf,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentSummary",
    "ExperimentAborted",
    "EstimatorSpec",
    "run_experiment",
    "write_summary",
    "rimse",
    "pointwise_envelope",
    "load_config",
    "PROCESSES",
    "INTENSITIES",
]

PROCESSES = ("poisson", "lgcp", "independent", "segregated", "co_clustered")
BIVARIATE = ("independent", "segregated", "co_clustered")
INTENSITIES = ("known", "parametric", "kernel", "kernel-leaveout")
PCF_ESTIMATORS = ("g_global_iso", "g_local_iso", "g_local_iso_tilde", "c_global_iso", "c_local_iso")
GLOBAL = ("k_global", "k_global_iso", "k12_global", "k12_global_iso", "g_global_iso", "c_global_iso")
VECTOR = ("k_global", "k12_global")
FAILURE_LIMIT = 0.05


class ExperimentAborted(RuntimeError):
    """More than 5% of the replicates failed for some estimator."""

    def __init__(self, message, failures):
        super().__init__(message)
        self.failures = failures


# ---------------------------------------------------------------- statistics


def _as_array(curves):
    if len(curves) and isinstance(curves[0], CurveEstimate):
        t0 = curves[0].t
        for c in curves[1:]:
            if c.t.shape != t0.shape or np.any(c.t != t0):
                raise ValueError("curves are not on a common grid")
        return t0, np.stack([c.values for c in curves])
    return None, np.atleast_2d(np.asarray(curves, dtype=float))


def rimse(curves, truth, r_max=0.125, t=None):
    """
    Root integrated mean squared error
    ``sqrt( (1/S) Σ_s ∫_{t_0}^{r_max} (K̂_s - K)² dr )`` by the trapezoid rule.

    ``curves`` is a list of :class:`CurveEstimate` on one grid (or an
    ``S x T`` array with the grid passed as ``t``); ``truth`` is a
    :class:`CurveEstimate` or array on the same grid. If ``r_max`` falls
    between nodes the squared error is linearly interpolated there.
    """
    grid, arr = _as_array(curves)
    if isinstance(truth, CurveEstimate):
        if grid is not None and (truth.t.shape != grid.shape or np.any(truth.t != grid)):
            raise ValueError("truth and estimates are on different grids")
        grid = truth.t if grid is None else grid
        truth = truth.values
    if grid is None:
        grid = np.asarray(t, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if arr.shape[1] != grid.size or truth.shape != grid.shape:
        raise ValueError("grid mismatch between curves, truth and t")
    if r_max > grid[-1] + 1e-12 or r_max < grid[0]:
        raise ValueError(f"r_max={r_max} outside the grid [{grid[0]}, {grid[-1]}]")
    sq = np.mean((arr - truth) ** 2, axis=0)
    keep = grid <= r_max + 1e-12
    x, y = grid[keep], sq[keep]
    if x[-1] < r_max - 1e-12:
        x = np.append(x, r_max)
        y = np.append(y, np.interp(r_max, grid, sq))
    return float(np.sqrt(np.trapezoid(y, x) if hasattr(np, "trapezoid") else np.trapz(y, x)))


def pointwise_envelope(curves, level=0.95):
    """
    Empirical ``(1-level)/2`` and ``(1+level)/2`` quantiles at every grid node
    (linear interpolation between order statistics).
    """
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    _, arr = _as_array(curves)
    if arr.shape[0] < 40 and level < 1:
        warnings.warn(f"only {arr.shape[0]} curves for a {level:.0%} envelope", stacklevel=2)
    q = (1.0 - level) / 2.0
    lo, hi = np.quantile(arr, [q, 1.0 - q], axis=0)
    return lo, hi


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator run: estimator name, intensity model and bandwidth method."""

    name: str
    intensity: str = "kernel-leaveout"
    bandwidth: str = "cvl"

    def __post_init__(self):
        if self.name not in K_ESTIMATORS and self.name not in PCF_ESTIMATORS:
            raise ValueError(f"unknown estimator {self.name!r}")
        if self.intensity not in INTENSITIES:
            raise ValueError(f"unknown intensity {self.intensity!r}; choose from {INTENSITIES}")
        if self.kernel_based:
            _parse_bandwidth(self.bandwidth)

    @property
    def kernel_based(self):
        return self.intensity.startswith("kernel")

    @property
    def bivariate(self):
        return self.name.startswith(("k12", "c_"))

    @property
    def method(self):
        return self.bandwidth if self.kernel_based else "none"

    @property
    def ident(self):
        return f"{self.name}-{self.intensity}-{self.method}".replace(":", "-")

    @classmethod
    def parse(cls, text, intensity="kernel-leaveout", bandwidth="cvl"):
        parts = text.strip().split(":", 2)
        name = parts[0]
        inten = parts[1] if len(parts) > 1 and parts[1] else intensity
        bw = parts[2] if len(parts) > 2 and parts[2] else bandwidth
        return cls(name, inten, bw)


def _parse_bandwidth(text):
    if text in ("cvl", "lcv"):
        return text, None
    if text.startswith("fixed:"):
        v = float(text.split(":", 1)[1])
        if not v > 0:
            raise ValueError("fixed bandwidth must be positive")
        return "fixed", v
    raise ValueError(f"bandwidth must be cvl, lcv or fixed:<value>, got {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Simulation-study settings.

    The text form is one ``key = value`` per line (``#`` starts a comment);
    ``estimators`` is a comma-separated list of
    ``name[:intensity[:bandwidth]]`` entries whose missing parts default to
    the ``intensity`` and ``bandwidth`` keys.
    """

    process: str = "poisson"
    profile: str = "waves"
    n_expected: float = 400.0
    replicates: int = 100
    estimators: tuple = ()
    intensity: str = "kernel-leaveout"
    bandwidth: str = "cvl"
    alpha: float = 0.001
    t_max: float = 0.125
    n_t: int = 129
    r_min: float = 0.005
    n_r: int = 128
    r_max: float = 0.125
    pcf_bandwidth: float = 0.0
    seed: int = 1
    outdir: str = "experiment_out"
    workers: int = 1

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ValueError(f"unknown process {self.process!r}; choose from {PROCESSES}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; choose from {PROFILES}")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.n_expected > 0:
            raise ValueError("n_expected must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.r_max <= self.t_max + 1e-12:
            raise ValueError("r_max must lie in (0, t_max]")
        specs = tuple(
            s if isinstance(s, EstimatorSpec) else EstimatorSpec.parse(s, self.intensity, self.bandwidth)
            for s in self.estimators
        )
        if not specs:
            raise ValueError("at least one estimator is required")
        for s in specs:
            if s.bivariate != (self.process in BIVARIATE):
                raise ValueError(f"estimator {s.name} does not match process {self.process}")
        if len({s.ident for s in specs}) != len(specs):
            raise ValueError("duplicate estimator entries")
        object.__setattr__(self, "estimators", specs)

    @property
    def window(self):
        return UNIT_SQUARE

    @property
    def t_grid(self):
        return default_t_grid(None, self.n_t, self.t_max)

    @property
    def r_grid(self):
        return np.linspace(self.r_min, self.r_max, self.n_r)

    @property
    def b(self):
        return self.pcf_bandwidth if self.pcf_bandwidth > 0 else default_pcf_bandwidth(self.n_expected)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "estimators":
                v = ", ".join(f"{s.name}:{s.intensity}:{s.bandwidth}" for s in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def load_config(path_or_text, **overrides):
    """Parse a ``key = value`` configuration file (or its text)."""
    text = path_or_text
    if os.path.exists(str(path_or_text)):
        with open(path_or_text) as fh:
            text = fh.read()
    kw = {}
    for lineno, raw in enumerate(str(text).splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or key not in _TYPES:
            raise ValueError(f"line {lineno}: expected 'key = value' with a known key, got {raw!r}")
        kw[key] = val
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return _build_config(kw)


def _build_config(kw):
    conv = {}
    for k, v in kw.items():
        if k == "estimators":
            conv[k] = tuple(x for x in (v.split(",") if isinstance(v, str) else v) if str(x).strip())
        elif k in ("replicates", "n_t", "n_r", "seed", "workers"):
            conv[k] = int(v)
        elif k in ("n_expected", "alpha", "t_max", "r_min", "r_max", "pcf_bandwidth"):
            conv[k] = float(v)
        else:
            conv[k] = str(v)
    return ExperimentConfig(**conv)


# ---------------------------------------------------------------- replicate


_UNIT_GAMMA_CACHE = {}


def _unit_profile_gamma(profile, cfg, r_end, cross):
    """γ^iso of the retention profile itself, cached per profile and grid."""
    kind = "cross-isotropic" if cross else "isotropic"
    key = (profile.kind, r_end, cfg.alpha, cfg.seed, kind)
    if key not in _UNIT_GAMMA_CACHE:
        m = KnownIntensity(profile)
        g = build_interpolated_gamma(
            m, cfg.window, kind, r_max=r_end, alpha=cfg.alpha,
            model2=m if cross else None, seed=_rng.stream(cfg.seed, 0xFFFF).integers(2**62),
        )
        _UNIT_GAMMA_CACHE[key] = g
    return _UNIT_GAMMA_CACHE[key]


def _simulate(cfg, rep):
    """Pattern (or bivariate pattern) and retention profile of one replicate."""
    stream = lambda *k: _rng.stream(cfg.seed, rep, *k)  # noqa: E731
    w = cfg.window
    profile = lgf_profile(w, stream(0)) if cfg.profile == "lgf" else RetentionProfile(cfg.profile)
    integral = profile_integral(profile, w) if profile.kind != "constant" else profile.value * w.area
    if cfg.process == "poisson":
        base = simulate_poisson(w, cfg.n_expected / integral, stream(1))
        data = thin(base, profile, stream(2))
    elif cfg.process == "lgcp":
        data = simulate_lgcp(w, cfg.n_expected, GaussianFieldSpec(1.0, 0.05), profile, stream(1))
    elif cfg.process == "independent":
        data = simulate_independent_pair(w, (cfg.n_expected, cfg.n_expected), profile, stream(1))
    else:
        make = BivariateLgcpSpec.segregated if cfg.process == "segregated" else BivariateLgcpSpec.co_clustered
        spec = make(n_expected1=cfg.n_expected, n_expected2=cfg.n_expected, profile=profile)
        data = simulate_bivariate_lgcp(spec, w, stream(1))
    return data, profile, integral


def _select(pattern, method, cache):
    kind, value = _parse_bandwidth(method)
    if kind == "fixed":
        return value
    if kind not in cache:
        cache[kind] = bandwidth_cvl(pattern) if kind == "cvl" else bandwidth_lcv(pattern)
    return cache[kind]


def _models(spec, data, profile, integral, cfg, sigmas):
    """Intensity model(s) for one estimator."""
    pats = (data.pattern1, data.pattern2) if spec.bivariate else (data,)
    if spec.intensity == "known":
        return [KnownIntensity(_scaled(profile, cfg.n_expected / integral)) for _ in pats]
    if spec.intensity == "parametric":
        return [ParametricIntensity(profile, p.n, cfg.window, integral) for p in pats]
    sigma = _select(pats[0], spec.bandwidth, sigmas)
    k = Kernel2D(sigma)
    return [KernelIntensity(p, k, leave_out=spec.intensity == "kernel-leaveout") for p in pats]


class _scaled:
    """``c * p(x)``; constant profiles are kept recognisable as constants."""

    def __init__(self, profile, c):
        self.profile, self.c = profile, c

    def __call__(self, xy):
        return self.c * np.asarray(self.profile(xy), dtype=float)


def _known(model):
    if isinstance(model, KnownIntensity) and isinstance(model._func, _scaled):
        f = model._func
        if f.profile.kind == "constant":
            return KnownIntensity(f.c * f.profile.value)
    return model


def _gamma(spec, models, profile, integral, cfg, rep, r_end):
    cross = spec.bivariate
    kind = ("cross-" if cross else "") + ("vector" if spec.name in VECTOR else "isotropic")
    models = [_known(m) for m in models]
    consts = [getattr(m, "constant", None) for m in models]
    if all(c is not None for c in consts):
        return AnalyticGamma(cfg.window, consts[0], consts[-1], kind)
    vector = spec.name in VECTOR
    if spec.intensity in ("known", "parametric") and profile.kind != "lgf" and not vector:
        unit = _unit_profile_gamma(profile, cfg, r_end, cross)
        scales = [
            (m.scale if isinstance(m, ParametricIntensity) else cfg.n_expected / integral) for m in models
        ]
        return unit.scaled(scales[0] * scales[-1])
    seed = int(_rng.stream(cfg.seed, rep, 9).integers(2**62))
    return build_interpolated_gamma(
        models[0], cfg.window, kind, r_max=r_end, alpha=cfg.alpha,
        model2=models[1] if cross else None, seed=seed,
    )


def _estimate(spec, data, models, gamma, cfg):
    name = spec.name
    t, r = cfg.t_grid, cfg.r_grid
    b = cfg.b
    if name in ("k_global", "k_global_iso"):
        return K_ESTIMATORS[name](data, gamma, t).values
    if name in ("k_local", "k_local_iso"):
        return K_ESTIMATORS[name](data, models[0], t).values
    if name in ("k12_global", "k12_global_iso"):
        return K_ESTIMATORS[name](data, gamma, t).values
    if name in ("k12_local", "k12_local_iso"):
        return K_ESTIMATORS[name](data, models[0], models[1], t).values
    if name == "g_global_iso":
        return g_global_iso(data, gamma, Kernel1D(b), r).values
    if name in ("g_local_iso", "g_local_iso_tilde"):
        form = "tilde" if name.endswith("tilde") else "hat"
        return g_local_iso(data, models[0], Kernel1D(b), r, form).values
    if name == "c_global_iso":
        return c_global_iso(data, gamma, Kernel1D(b), r).values
    return c_local_iso(data, models[0], models[1], Kernel1D(b), r).values


def _replicate(cfg, rep):
    """Run every estimator on replicate ``rep``; failures are returned as messages."""
    data, profile, integral = _simulate(cfg, rep)
    sigmas = {}
    out = {}
    r_end = max(cfg.t_max, cfg.r_max + 3 * cfg.b)
    for spec in cfg.estimators:
        try:
            models = _models(spec, data, profile, integral, cfg, sigmas)
            gamma = _gamma(spec, models, profile, integral, cfg, rep, r_end) if spec.name in GLOBAL else None
            out[spec.ident] = np.asarray(_estimate(spec, data, models, gamma, cfg), dtype=float)
        except (EstimatorError, GammaError, BandwidthSelectionError, ValueError, ZeroDivisionError) as exc:
            out[spec.ident] = f"{type(exc).__name__}: {exc}"
    counts = (data.pattern1.n, data.pattern2.n) if cfg.process in BIVARIATE else (data.n,)
    return {"curves": out, "sigmas": sigmas, "counts": counts}


def _replicate_star(args):
    return args[1], _replicate(*args)


# ---------------------------------------------------------------- aggregation


@dataclass
class ExperimentSummary:
    config: ExperimentConfig
    grids: dict
    curves: dict
    mean: dict
    lo: dict
    hi: dict
    truth: dict
    rimse: dict
    bandwidths: dict
    failures: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    def bandwidth_stats(self, method):
        v = np.array([s for _, s in self.bandwidths.get(method, [])])
        return (float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0) if v.size else (math.nan, math.nan)


def _truth(cfg, spec, grid):
    if cfg.process in ("poisson", "independent"):
        name = "poisson"
    elif cfg.process == "lgcp":
        name = "g_lgcp"
    else:
        name = "c_segr" if cfg.process == "segregated" else "c_cluster"
    if spec.name in PCF_ESTIMATORS:
        return reference_pcf(name)(grid)
    if name == "poisson":
        return np.pi * grid**2
    return true_k_from_pcf(name, grid).values


def run_experiment(config, workers=None):
    """
    Run all replicates and aggregate them in replicate order.

    Results are bit-identical whether replicates run serially or on a process
    pool, because every replicate draws from its own counter-based streams and
    the fold over replicates is in index order.
    """
    cfg = config
    workers = cfg.workers if workers is None else workers
    reps = range(cfg.replicates)
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rep, res in pool.map(_replicate_star, [(cfg, r) for r in reps]):
                results[rep] = res
    else:
        for r in reps:
            results[r] = _replicate(cfg, r)

    failures = []
    bandwidths = {}
    curves = {s.ident: [] for s in cfg.estimators}
    counts = []
    for rep in reps:
        res = results[rep]
        counts.append(res["counts"])
        for method in sorted(res["sigmas"]):
            bandwidths.setdefault(method, []).append((rep, res["sigmas"][method]))
        for ident, val in res["curves"].items():
            if isinstance(val, str):
                failures.append((rep, ident, cfg.seed, val))
            else:
                curves[ident].append(val)

    for s in cfg.estimators:
        nfail = sum(1 for f in failures if f[1] == s.ident)
        if nfail > FAILURE_LIMIT * cfg.replicates:
            raise ExperimentAborted(
                f"{nfail} of {cfg.replicates} replicates failed for {s.ident}; first: "
                + next(f[3] for f in failures if f[1] == s.ident),
                failures,
            )

    grids, mean, lo, hi, truth, table = {}, {}, {}, {}, {}, {}
    for s in cfg.estimators:
        grid = cfg.r_grid if s.name in PCF_ESTIMATORS else cfg.t_grid
        arr = np.stack(curves[s.ident]) if curves[s.ident] else np.full((0, grid.size), np.nan)
        grids[s.ident] = grid
        truth[s.ident] = _truth(cfg, s, grid)
        mean[s.ident] = arr.mean(axis=0) if len(arr) else np.full(grid.size, np.nan)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lo[s.ident], hi[s.ident] = pointwise_envelope(arr) if len(arr) else (mean[s.ident],) * 2
        table[s.ident] = rimse(arr, truth[s.ident], min(cfg.r_max, grid[-1]), t=grid) if len(arr) else math.nan
        curves[s.ident] = arr
    return ExperimentSummary(cfg, grids, curves, mean, lo, hi, truth, table, bandwidths, failures, counts)


def _fmt(x):
    return f"{x:.17g}"


def write_summary(summary, outdir=None):
    """
    Write ``summary_<estimator>.csv`` (``r,mean,lo,hi,truth``), ``rimse.csv``,
    ``bandwidths.csv`` (``replicate,method,sigma``), ``config.txt`` and, if
    any replicate failed, ``failures.csv``.
    """
    cfg = summary.config
    outdir = cfg.outdir if outdir is None else outdir
    os.makedirs(outdir, exist_ok=True)
    written = []

    def put(name, lines):
        path = os.path.join(outdir, name)
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        written.append(path)

    for s in cfg.estimators:
        g = summary.grids[s.ident]
        rows = ["r,mean,lo,hi,truth"]
        rows += [
            ",".join(_fmt(v) for v in row)
            for row in zip(g, summary.mean[s.ident], summary.lo[s.ident], summary.hi[s.ident], summary.truth[s.ident])
        ]
        put(f"summary_{s.ident}.csv", rows)
    put(
        "rimse.csv",
        ["estimator,bandwidth_method,rimse"]
        + [f"{s.name}-{s.intensity},{s.method},{_fmt(summary.rimse[s.ident])}" for s in cfg.estimators],
    )
    rows = ["replicate,method,sigma"]
    for method in sorted(summary.bandwidths):
        rows += [f"{rep},{method},{_fmt(sig)}" for rep, sig in summary.bandwidths[method]]
    put("bandwidths.csv", rows)
    if summary.failures:
        put("failures.csv", ["replicate,estimator,seed,error"] + [
            f'{rep},{ident},{seed},"{msg.replace(chr(34), chr(39))}"' for rep, ident, seed, msg in summary.failures
        ])
    put("config.txt", cfg.to_text().rstrip("\n").split("\n"))
    return written
