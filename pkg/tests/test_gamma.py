import warnings

import numpy as np
import pytest
from scipy import integrate

from inhomk.gamma import (
    AnalyticGamma,
    GammaError,
    GammaPrecisionWarning,
    GammaRangeError,
    SampleBank,
    build_interpolated_gamma,
    direct_gamma,
    gamma12_iso_mc,
    gamma12_mc,
    gamma_iso_mc,
    gamma_mc,
    load_gamma_csv,
    save_gamma_csv,
)
from inhomk.geometry import UNIT_SQUARE, Window, isotropized_edge_factor, overlap_volume
from inhomk.kernel_intensity import Kernel2D, KernelIntensity, KnownIntensity
from inhomk.simulate import simulate_poisson

RHO_X = KnownIntensity(lambda xy: xy[..., 0])
RHO_Y = KnownIntensity(lambda xy: xy[..., 1])


def gamma_x_vector(h):
    """Exact γ(h) for ρ(x, y) = x on the unit square."""
    hx, hy = h
    lo, hi = max(0.0, -hx), min(1.0, 1.0 - hx)
    if hi <= lo or abs(hy) >= 1:
        return 0.0
    f = lambda x: x**3 / 3 + hx * x**2 / 2
    return (f(hi) - f(lo)) * (1 - abs(hy))


def gamma_x_iso(r):
    """Angular quadrature of the exact vector γ for ρ(x, y) = x."""
    val = integrate.quad(lambda t: gamma_x_vector((r * np.cos(t), r * np.sin(t))), 0, 2 * np.pi,
                         points=[np.pi / 2, np.pi, 3 * np.pi / 2], epsabs=1e-13)[0]
    return val / (2 * np.pi)


@pytest.fixture(scope="module")
def kernel_model():
    p = simulate_poisson(UNIT_SQUARE, 300, seed=11)
    return KernelIntensity(p, Kernel2D(0.05), leave_out=True)


def test_constant_examples():
    res = gamma_mc(KnownIntensity(20.0), UNIT_SQUARE, (0.5, 0), seed=1)
    assert res.value == pytest.approx(200.0, rel=1e-12)
    value, cv, n = res
    assert cv < 0.005 and n > 0
    res = gamma_mc(KnownIntensity(20.0), UNIT_SQUARE, (1.5, 0), seed=1)
    assert res.value == 0.0 and res.n == 0
    assert gamma_iso_mc(KnownIntensity(20.0), UNIT_SQUARE, 0.1).value == pytest.approx(
        400 * isotropized_edge_factor(UNIT_SQUARE, 0.1), rel=1e-12)
    assert gamma_iso_mc(KnownIntensity(20.0), UNIT_SQUARE, 0.0).value == pytest.approx(400.0)


def test_linear_intensity_at_zero_lag():
    res = gamma_mc(RHO_X, UNIT_SQUARE, (0, 0), alpha=0.002, seed=2)
    assert res.cv < 0.002
    assert res.value == pytest.approx(1 / 3, rel=3 * 0.002)


@pytest.mark.parametrize("h", [(0.2, 0.1), (-0.3, 0.05), (0.0, -0.4)])
def test_linear_intensity_vector(h):
    res = gamma_mc(RHO_X, UNIT_SQUARE, h, alpha=0.003, seed=3)
    assert res.value == pytest.approx(gamma_x_vector(h), rel=3 * 0.003)


def test_linear_intensity_isotropic():
    ref = gamma_x_iso(0.1)
    res = gamma_iso_mc(RHO_X, UNIT_SQUARE, 0.1, alpha=0.002, seed=4)
    assert res.value == pytest.approx(ref, rel=3 * 0.002)


def test_cross_examples():
    assert gamma12_mc(KnownIntensity(10.0), KnownIntensity(40.0), UNIT_SQUARE, (0.5, 0)).value == pytest.approx(200)
    res = gamma12_mc(RHO_X, RHO_Y, UNIT_SQUARE, (0, 0), alpha=0.002, seed=5)
    assert res.value == pytest.approx(0.25, rel=3 * 0.002)
    iso = gamma12_iso_mc(KnownIntensity(10.0), KnownIntensity(40.0), UNIT_SQUARE, 0.2)
    assert iso.value == pytest.approx(400 * isotropized_edge_factor(UNIT_SQUARE, 0.2))


def test_cross_swap_symmetry(kernel_model):
    other = KernelIntensity(simulate_poisson(UNIT_SQUARE, 250, seed=12), Kernel2D(0.05))
    alpha = 0.003
    for r in (0.02, 0.08):
        a = gamma12_iso_mc(kernel_model, other, UNIT_SQUARE, r, alpha=alpha, seed=6).value
        b = gamma12_iso_mc(other, kernel_model, UNIT_SQUARE, r, alpha=alpha, seed=7).value
        assert a == pytest.approx(b, rel=3 * np.sqrt(2) * alpha)


def test_unbiased_at_fixed_n():
    h = (0.2, 0.1)
    vals = np.array([
        gamma_mc(RHO_X, UNIT_SQUARE, h, bank=SampleBank(UNIT_SQUARE, seed=s, block=1024), n=64).value
        for s in range(1000)
    ])
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - gamma_x_vector(h)) < 3 * se


def test_determinism(kernel_model):
    a = gamma_iso_mc(kernel_model, UNIT_SQUARE, 0.05, seed=9)
    b = gamma_iso_mc(kernel_model, UNIT_SQUARE, 0.05, seed=9)
    assert a == b
    c = gamma_iso_mc(kernel_model, UNIT_SQUARE, 0.05, seed=10)
    assert c.value != a.value


def test_bank_extension_is_stable():
    bank = SampleBank(UNIT_SQUARE, seed=3, block=1000)
    first = bank.points(2500).copy()
    dirs = bank.directions(2500).copy()
    bank.ensure(10000)
    assert np.array_equal(bank.points(2500), first)
    assert np.array_equal(bank.directions(2500), dirs)
    assert np.allclose(np.hypot(*dirs.T), 1)
    assert np.all((first >= 0) & (first <= 1))


def test_monotone_refinement(kernel_model):
    bank = SampleBank(UNIT_SQUARE, seed=4)
    a = gamma_mc(kernel_model, UNIT_SQUARE, (0.03, 0.02), bank=bank, n=3000)
    bank.ensure(500000)
    b = gamma_mc(kernel_model, UNIT_SQUARE, (0.03, 0.02), bank=bank, n=3000)
    assert a == b


def test_vector_symmetry_is_exact(kernel_model):
    bank = SampleBank(UNIT_SQUARE, seed=5)
    for h in [(0.04, -0.01), (0.0, 0.07), (-0.02, -0.03)]:
        a = gamma_mc(kernel_model, UNIT_SQUARE, h, bank=bank)
        b = gamma_mc(kernel_model, UNIT_SQUARE, tuple(-np.asarray(h)), bank=bank)
        assert a == b
    assert overlap_volume(UNIT_SQUARE, (0.3, -0.2)) == overlap_volume(UNIT_SQUARE, (-0.3, 0.2))


def test_leave_out_dominance(kernel_model):
    plain = KernelIntensity(kernel_model.pattern, kernel_model.kernel)
    bank = SampleBank(UNIT_SQUARE, seed=6)
    for h in [(0, 0), (0.01, 0.0), (0.05, 0.05), (0.2, -0.1), (0.4, 0.3)]:
        a = gamma_mc(plain, UNIT_SQUARE, h, bank=bank, n=4096).value
        b = gamma_mc(kernel_model, UNIT_SQUARE, h, bank=bank, n=4096).value
        assert a - b >= 0
    assert a - b == 0  # beyond the kernel's reach there is no diagonal term


def test_zero_intensity_raises():
    with pytest.raises(GammaError):
        gamma_mc(KnownIntensity(0.0), UNIT_SQUARE, (0.1, 0))
    with pytest.raises(GammaError):
        gamma_iso_mc(KnownIntensity(lambda xy: np.where(xy[..., 0] < 0.5, 0.0, 0.0)), UNIT_SQUARE, 0.1)


def test_precision_warning_at_cap():
    with pytest.warns(GammaPrecisionWarning):
        res = gamma_mc(RHO_X, UNIT_SQUARE, (0.1, 0.1), alpha=1e-5, cap=4096)
    assert not res.converged and res.n == 4096 and res.cv > 1e-5


def test_alpha_must_be_positive():
    with pytest.raises(ValueError):
        gamma_mc(RHO_X, UNIT_SQUARE, (0.1, 0), alpha=0)


def test_bank_window_mismatch():
    with pytest.raises(ValueError):
        gamma_mc(RHO_X, UNIT_SQUARE, (0.1, 0), bank=SampleBank(Window(0, 0, 2, 2)))


def test_interpolated_constant():
    g = build_interpolated_gamma(KnownIntensity(20.0), UNIT_SQUARE, r_max=0.125)
    r = np.random.default_rng(0).uniform(0, 0.125, 100)
    exact = 400 * isotropized_edge_factor(UNIT_SQUARE, r)
    assert np.max(np.abs(g(r) / exact - 1)) < 1e-3
    assert g.grid[-1] == pytest.approx(0.125)
    assert np.all(np.diff(g.grid) > 0)
    assert g(g.grid[7]) == g.values[7]
    with pytest.raises(GammaRangeError):
        g(0.2)
    with pytest.raises(GammaRangeError):
        g(-0.01)


def test_interpolated_vector_and_cross():
    g = build_interpolated_gamma(RHO_X, UNIT_SQUARE, kind="vector", r_max=0.1, spacing=0.02, alpha=0.01)
    assert g.values.shape == (11, 11)
    assert np.array_equal(g.values, g.values[::-1, ::-1])
    h = np.array([[0.013, -0.07], [-0.05, 0.0]])
    assert np.allclose(g(h), g(-h))
    assert g(h[0]) == pytest.approx(gamma_x_vector(h[0]), rel=0.03)
    with pytest.raises(GammaRangeError):
        g((0.11, 0))
    c = build_interpolated_gamma(KnownIntensity(3.0), UNIT_SQUARE, kind="cross-isotropic",
                                 model2=KnownIntensity(5.0), r_max=0.1)
    assert c(0.05) == pytest.approx(15 * isotropized_edge_factor(UNIT_SQUARE, 0.05), rel=1e-4)
    with pytest.raises(ValueError):
        build_interpolated_gamma(RHO_X, UNIT_SQUARE, kind="cross-vector")
    with pytest.raises(ValueError):
        build_interpolated_gamma(RHO_X, UNIT_SQUARE, kind="sideways")


def test_kernel_spacing_enforced(kernel_model):
    with pytest.raises(ValueError, match="σ/10"):
        build_interpolated_gamma(kernel_model, UNIT_SQUARE, r_max=0.05, spacing=0.01)
    g = build_interpolated_gamma(kernel_model, UNIT_SQUARE, r_max=0.02)
    assert g.spacing <= 0.005 + 1e-15


def test_interpolation_matches_direct(kernel_model):
    bank = SampleBank(UNIT_SQUARE, seed=8)
    g = build_interpolated_gamma(kernel_model, UNIT_SQUARE, r_max=0.05, bank=bank)
    n = int(g.n.max())
    assert np.all(g.n == n) and g.converged and np.all(g.cv < 0.005)
    probes = np.random.default_rng(1).uniform(0, 0.05, 10)
    direct = np.array([gamma_iso_mc(kernel_model, UNIT_SQUARE, r, bank=bank, n=n).value for r in probes])
    assert np.max(np.abs(g(probes) / direct - 1)) < 1e-3


def test_direct_mode(kernel_model):
    d = direct_gamma(kernel_model, UNIT_SQUARE, seed=2)
    out = d(np.array([0.02, 0.04, 0.02]))
    assert out[0] == out[2]
    # queries in one call share a sample size, so single-lag runs agree to MC precision
    assert out[1] == pytest.approx(gamma_iso_mc(kernel_model, UNIT_SQUARE, 0.04, seed=2).value, rel=0.015)
    assert np.array_equal(direct_gamma(kernel_model, UNIT_SQUARE, seed=2)(np.array([0.02, 0.04, 0.02])), out)


def test_cache_round_trip(tmp_path):
    g = build_interpolated_gamma(RHO_X, UNIT_SQUARE, r_max=0.1, alpha=0.01, seed=3)
    save_gamma_csv(g, tmp_path / "g.csv")
    text = (tmp_path / "g.csv").read_text()
    assert "r,gamma,cv" in text.splitlines()
    h = load_gamma_csv(tmp_path / "g.csv")
    assert h.kind == "isotropic" and h.alpha == 0.01
    assert np.array_equal(h.grid, g.grid) and np.array_equal(h.values, g.values)
    r = np.linspace(0, 0.1, 33)
    assert np.array_equal(h(r), g(r))
    with pytest.raises(ValueError):
        save_gamma_csv(build_interpolated_gamma(RHO_X, UNIT_SQUARE, "vector", 0.05, alpha=0.05), tmp_path / "v.csv")


def test_analytic_gamma():
    a = AnalyticGamma(UNIT_SQUARE, 2.0, kind="vector")
    assert a((0.05, 0)) == pytest.approx(3.8)
    b = AnalyticGamma(UNIT_SQUARE, 2.0, 3.0)
    assert b(0.0) == 6.0 and b.isotropic
    with pytest.raises(ValueError):
        AnalyticGamma(UNIT_SQUARE, 1.0, kind="bad")
