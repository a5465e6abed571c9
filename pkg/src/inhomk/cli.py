"""Command-line interface: ``simulate``, ``estimate``, ``gamma`` and ``experiment``."""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, _rng
from .estimators_k import ESTIMATORS as K_ESTIMATORS
from .estimators_k import EstimatorError, default_t_grid
from .estimators_pcf import (
    c_global_iso,
    c_local_iso,
    default_pcf_bandwidth,
    default_r_grid,
    g_global_iso,
    g_local_iso,
)
from .gamma import DEFAULT_ALPHA, AnalyticGamma, GammaError, build_interpolated_gamma, load_gamma_csv, save_gamma_csv
from .geometry import Window
from .harness import (
    BIVARIATE,
    INTENSITIES,
    PCF_ESTIMATORS,
    PROCESSES,
    ExperimentAborted,
    _parse_bandwidth,
    load_config,
    run_experiment,
    write_summary,
)
from .harness import _simulate
from .kernel_intensity import (
    BandwidthSelectionError,
    Kernel1D,
    Kernel2D,
    KernelIntensity,
    KnownIntensity,
    ParametricIntensity,
    bandwidth_cvl,
    bandwidth_lcv,
)
from .pattern import BivariatePattern, PatternFormatError, PatternValidationError, load_csv, save_csv
from .simulate import PROFILES, RetentionProfile

ALL_ESTIMATORS = tuple(K_ESTIMATORS) + PCF_ESTIMATORS


def _window(text):
    try:
        x0, y0, x1, y1 = (float(v) for v in text.split(","))
        return Window(x0, y0, x1, y1)
    except Exception as exc:
        raise argparse.ArgumentTypeError(f"window must be x0,y0,x1,y1: {exc}") from exc


def _add_intensity_args(p):
    p.add_argument("--intensity", choices=INTENSITIES, default="kernel-leaveout")
    p.add_argument("--bandwidth", default="cvl", help="cvl, lcv or fixed:<sigma>")
    p.add_argument("--rho", type=float, default=None, help="constant intensity for --intensity known")
    p.add_argument(
        "--profile", choices=[k for k in PROFILES if k != "lgf"], default="constant",
        help="retention profile for parametric (or known, scaled by --rho) intensities",
    )


def _build_parser():
    ap = argparse.ArgumentParser(prog="inhomk", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate patterns and write CSV files plus a manifest")
    s.add_argument("--process", choices=PROCESSES, default="poisson")
    s.add_argument("--profile", choices=PROFILES, default="constant")
    s.add_argument("--n-expected", type=float, default=400.0)
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--outdir", required=True)
    s.add_argument("--overwrite", action="store_true")

    e = sub.add_parser("estimate", help="estimate one curve from a pattern file")
    e.add_argument("pattern")
    e.add_argument("--estimator", choices=ALL_ESTIMATORS, default="k_global_iso")
    _add_intensity_args(e)
    e.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    e.add_argument("--t-max", type=float, default=0.125)
    e.add_argument("--n-t", type=int, default=129)
    e.add_argument("--b", type=float, default=None, help="pcf smoothing bandwidth")
    e.add_argument("--gamma-cache", default=None, help="isotropic γ grid written by the gamma command")
    e.add_argument("--window", type=_window, default=Window(0, 0, 1, 1))
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)

    g = sub.add_parser("gamma", help="tabulate an isotropic γ grid to a cache CSV")
    g.add_argument("pattern")
    _add_intensity_args(g)
    g.add_argument("--cross", action="store_true", help="γ₁₂ for a bivariate pattern")
    g.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    g.add_argument("--r-max", type=float, default=0.125)
    g.add_argument("--spacing", type=float, default=None)
    g.add_argument("--window", type=_window, default=Window(0, 0, 1, 1))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    x = sub.add_parser("experiment", help="run a replication experiment from a config file")
    x.add_argument("config")
    x.add_argument("--outdir", default=None)
    x.add_argument("--workers", type=int, default=None)
    x.add_argument("--replicates", type=int, default=None)
    x.add_argument("--seed", type=int, default=None)
    return ap


def _models(args, data, bivariate):
    pats = (data.pattern1, data.pattern2) if bivariate else (data,)
    sigma = None
    if args.intensity == "known":
        if args.rho is None:
            raise SystemExit("--intensity known needs --rho")
        prof = RetentionProfile(args.profile)
        models = [KnownIntensity(args.rho) if args.profile == "constant" else KnownIntensity(lambda xy: args.rho * prof(xy)) for _ in pats]
    elif args.intensity == "parametric":
        prof = RetentionProfile(args.profile)
        models = [ParametricIntensity(prof, p.n, p.window) for p in pats]
    else:
        kind, value = _parse_bandwidth(args.bandwidth)
        sigma = value if kind == "fixed" else (bandwidth_cvl if kind == "cvl" else bandwidth_lcv)(pats[0])
        k = Kernel2D(sigma)
        models = [KernelIntensity(p, k, leave_out=args.intensity == "kernel-leaveout") for p in pats]
    return models, sigma


def _gamma_for(args, models, window, kind, r_max, spacing=None):
    consts = [getattr(m, "constant", None) for m in models]
    if all(c is not None for c in consts):
        return AnalyticGamma(window, consts[0], consts[-1], kind)
    return build_interpolated_gamma(
        models[0], window, kind, r_max=r_max, spacing=spacing, alpha=args.alpha,
        model2=models[1] if kind.startswith("cross") else None, seed=args.seed,
    )


def _cmd_simulate(args):
    from .harness import ExperimentConfig

    bivariate = args.process in BIVARIATE
    est = "k12_global_iso" if bivariate else "k_global_iso"
    cfg = ExperimentConfig(
        process=args.process, profile=args.profile, n_expected=args.n_expected,
        replicates=args.replicates, estimators=(est,), seed=args.seed,
    )
    os.makedirs(args.outdir, exist_ok=True)
    files = []
    for rep in range(args.replicates):
        data, _, _ = _simulate(cfg, rep)
        path = os.path.join(args.outdir, f"pattern_{rep:04d}.csv")
        save_csv(data, path, overwrite=args.overwrite)
        n = [data.pattern1.n, data.pattern2.n] if bivariate else [data.n]
        files.append({"replicate": rep, "file": os.path.basename(path), "n": n})
    manifest = {
        "process": args.process,
        "profile": args.profile,
        "n_expected": args.n_expected,
        "seed": args.seed,
        "window": [0.0, 0.0, 1.0, 1.0],
        "rng": "philox keyed by (seed, replicate, stream)",
        "patterns": files,
    }
    with open(os.path.join(args.outdir, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(files)} pattern(s) to {args.outdir}")


def _cmd_estimate(args):
    data = load_csv(args.pattern, args.window)
    name = args.estimator
    bivariate = name.startswith(("k12", "c_"))
    if bivariate != isinstance(data, BivariatePattern):
        raise SystemExit(f"estimator {name} needs a {'bivariate' if bivariate else 'univariate'} pattern file")
    models, sigma = _models(args, data, bivariate)
    n = data.pattern1.n if bivariate else data.n
    b = args.b if args.b is not None else default_pcf_bandwidth(max(n, 1))
    t = default_t_grid(None, args.n_t, args.t_max)
    r = default_r_grid(r_max=args.t_max)
    gamma = None
    if "global" in name:
        kind = ("cross-" if bivariate else "") + ("isotropic" if name.endswith("iso") else "vector")
        if args.gamma_cache:
            gamma = load_gamma_csv(args.gamma_cache)
        else:
            reach = args.t_max + (3 * b if name in PCF_ESTIMATORS else 0.0)
            gamma = _gamma_for(args, models, data.window, kind, reach)
    if name in K_ESTIMATORS:
        fn = K_ESTIMATORS[name]
        if "global" in name:
            curve = fn(data, gamma, t)
        elif bivariate:
            curve = fn(data, models[0], models[1], t)
        else:
            curve = fn(data, models[0], t)
    elif name == "g_global_iso":
        curve = g_global_iso(data, gamma, Kernel1D(b), r)
    elif name in ("g_local_iso", "g_local_iso_tilde"):
        curve = g_local_iso(data, models[0], Kernel1D(b), r, "tilde" if name.endswith("tilde") else "hat")
    elif name == "c_global_iso":
        curve = c_global_iso(data, gamma, Kernel1D(b), r)
    else:
        curve = c_local_iso(data, models[0], models[1], Kernel1D(b), r)
    curve.meta.update({"intensity": args.intensity, "alpha": args.alpha, "seed": args.seed})
    if sigma is not None:
        curve.meta["sigma"] = sigma
    if name in PCF_ESTIMATORS:
        curve.meta["b"] = b
    curve.to_csv(args.out)
    print(f"wrote {name} ({len(curve.t)} values) to {args.out}")


def _cmd_gamma(args):
    data = load_csv(args.pattern, args.window)
    if args.cross != isinstance(data, BivariatePattern):
        raise SystemExit("--cross requires a bivariate pattern file (and vice versa)")
    models, sigma = _models(args, data, args.cross)
    kind = "cross-isotropic" if args.cross else "isotropic"
    consts = [getattr(m, "constant", None) for m in models]
    if all(c is not None for c in consts):
        models = [KnownIntensity(_Const(c)) for c in consts]
    g = _gamma_for(args, models, data.window, kind, args.r_max, args.spacing)
    if sigma is not None:
        g.meta["sigma"] = sigma
    save_gamma_csv(g, args.out)
    print(f"wrote γ grid ({len(g.grid)} nodes, max cv {np.max(g.cv):.2e}) to {args.out}")


class _Const:
    """Constant intensity forced through Monte Carlo so it can be cached as a grid."""

    def __init__(self, c):
        self.c = c

    def __call__(self, xy):
        return np.full(np.shape(xy)[:-1], self.c)


def _cmd_experiment(args):
    cfg = load_config(args.config, outdir=args.outdir, replicates=args.replicates, seed=args.seed)
    summary = run_experiment(cfg, workers=args.workers)
    paths = write_summary(summary)
    for s in cfg.estimators:
        print(f"{s.ident}: RIMSE {summary.rimse[s.ident]:.6g}")
    for method in sorted(summary.bandwidths):
        m, sd = summary.bandwidth_stats(method)
        print(f"sigma_{method}: {m:.4f} ({sd:.4f})")
    print(f"wrote {len(paths)} file(s) to {cfg.outdir}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handler = {
        "simulate": _cmd_simulate,
        "estimate": _cmd_estimate,
        "gamma": _cmd_gamma,
        "experiment": _cmd_experiment,
    }[args.command]
    try:
        handler(args)
    except (
        PatternFormatError, PatternValidationError, EstimatorError, GammaError,
        BandwidthSelectionError, ExperimentAborted, FileExistsError, ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
