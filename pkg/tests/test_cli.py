import json
import subprocess
import sys

import numpy as np
import pytest

from inhomk.cli import main
from inhomk.estimators_k import CurveEstimate
from inhomk.geometry import UNIT_SQUARE
from inhomk.pattern import load_csv


@pytest.fixture(scope="module")
def patterns(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--process", "poisson", "--profile", "waves", "--replicates", "2", "--seed", "3", "--outdir", str(out)]) == 0
    return out


def test_simulate_writes_manifest(patterns):
    manifest = json.loads((patterns / "manifest.json").read_text())
    assert manifest["process"] == "poisson" and manifest["seed"] == 3
    assert [p["file"] for p in manifest["patterns"]] == ["pattern_0000.csv", "pattern_0001.csv"]
    p = load_csv(patterns / "pattern_0000.csv", UNIT_SQUARE)
    assert p.n == manifest["patterns"][0]["n"][0]


def test_simulate_refuses_overwrite(patterns, capsys):
    assert main(["simulate", "--replicates", "1", "--outdir", str(patterns)]) == 2
    assert "exists" in capsys.readouterr().err


def test_simulate_bivariate(tmp_path):
    assert main(["simulate", "--process", "segregated", "--outdir", str(tmp_path)]) == 0
    bp = load_csv(tmp_path / "pattern_0000.csv", UNIT_SQUARE)
    assert bp.pattern1.n > 0 and bp.pattern2.n > 0


def test_estimate_local_and_global(patterns, tmp_path):
    pat = str(patterns / "pattern_0000.csv")
    assert main(["estimate", pat, "--estimator", "k_local_iso", "--bandwidth", "lcv", "--out", str(tmp_path / "l.csv")]) == 0
    loc = CurveEstimate.from_csv(tmp_path / "l.csv")
    assert loc.estimator == "k_local_iso" and len(loc.t) == 129 and float(loc.meta["sigma"]) > 0
    args = ["estimate", pat, "--estimator", "k_global_iso", "--bandwidth", "fixed:0.05", "--alpha", "0.02"]
    assert main(args + ["--out", str(tmp_path / "g.csv")]) == 0
    glob = CurveEstimate.from_csv(tmp_path / "g.csv")
    assert np.all(np.diff(glob.values) >= 0)
    assert main(["estimate", pat, "--estimator", "g_local_iso_tilde", "--intensity", "parametric", "--profile", "waves",
                 "--out", str(tmp_path / "p.csv")]) == 0
    assert CurveEstimate.from_csv(tmp_path / "p.csv").estimator == "g_local_iso_tilde"


def test_gamma_cache_reproduces_curve(patterns, tmp_path):
    pat = str(patterns / "pattern_0001.csv")
    common = ["--intensity", "kernel-leaveout", "--bandwidth", "fixed:0.05", "--alpha", "0.02", "--seed", "4"]
    assert main(["gamma", pat, *common, "--out", str(tmp_path / "gamma.csv")]) == 0
    assert "r,gamma,cv" in (tmp_path / "gamma.csv").read_text()
    assert main(["estimate", pat, "--estimator", "k_global_iso", *common, "--out", str(tmp_path / "a.csv")]) == 0
    assert main(["estimate", pat, "--estimator", "k_global_iso", *common, "--gamma-cache", str(tmp_path / "gamma.csv"),
                 "--out", str(tmp_path / "b.csv")]) == 0
    a, b = CurveEstimate.from_csv(tmp_path / "a.csv"), CurveEstimate.from_csv(tmp_path / "b.csv")
    assert np.array_equal(a.values, b.values)


def test_estimate_known_constant(tmp_path):
    (tmp_path / "two.csv").write_text("x,y\n0.2,0.2\n0.25,0.2\n")
    assert main(["estimate", str(tmp_path / "two.csv"), "--estimator", "k_global", "--intensity", "known", "--rho", "2",
                 "--t-max", "0.1", "--n-t", "3", "--out", str(tmp_path / "k.csv")]) == 0
    k = CurveEstimate.from_csv(tmp_path / "k.csv")
    assert k.values[-1] == pytest.approx(2 / 3.8)


def test_estimate_errors(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("x,y\n0.2,0.2\n2,0.2\n")
    assert main(["estimate", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o.csv")]) == 2
    assert "outside" in capsys.readouterr().err
    (tmp_path / "two.csv").write_text("x,y\n0.2,0.2\n0.8,0.8\n")
    with pytest.raises(SystemExit):
        main(["estimate", str(tmp_path / "two.csv"), "--estimator", "k12_local", "--out", str(tmp_path / "o.csv")])


def test_experiment_command(tmp_path, capsys):
    cfg = tmp_path / "study.txt"
    cfg.write_text("process = poisson\nprofile = waves\nreplicates = 2\nalpha = 0.02\n"
                   "estimators = k_global_iso:kernel-leaveout:cvl, k_local_iso:kernel-leaveout:lcv\n")
    assert main(["experiment", str(cfg), "--outdir", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "RIMSE" in out and "sigma_cvl" in out
    assert (tmp_path / "out" / "rimse.csv").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "inhomk", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
