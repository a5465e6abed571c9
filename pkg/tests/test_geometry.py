import numpy as np
import pytest

from inhomk.geometry import (
    UNIT_SQUARE,
    Window,
    angular_overlap_integral,
    contains,
    isotropized_edge_factor,
    overlap_volume,
)


def angular_average(window, r, nodes=64):
    """Gauss-Legendre angular average of the overlap area on each quadrant."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for k in range(4):
        a, b = k * np.pi / 2, (k + 1) * np.pi / 2
        th = 0.5 * (b - a) * x + 0.5 * (a + b)
        h = r * np.stack([np.cos(th), np.sin(th)], axis=1)
        total += 0.5 * (b - a) * np.sum(w * overlap_volume(window, h))
    return total / (2 * np.pi)


def midpoint_average(window, r, nodes=10**6):
    th = (np.arange(nodes) + 0.5) * (2 * np.pi / nodes)
    return np.mean(overlap_volume(window, r * np.stack([np.cos(th), np.sin(th)], axis=1)))


def test_window_validation():
    with pytest.raises(ValueError):
        Window(0, 0, 0, 1)
    with pytest.raises(ValueError):
        Window(1, 0, 0, 1)
    with pytest.raises(ValueError):
        Window(0, 0, np.inf, 1)
    w = Window(0, 0, 2, 0.5)
    assert w.area == 1.0
    assert w.width == 2 and w.height == 0.5


def test_overlap_volume_examples():
    assert overlap_volume(UNIT_SQUARE, (0, 0)) == 1.0
    assert overlap_volume(UNIT_SQUARE, (0.5, 0)) == 0.5
    assert overlap_volume(UNIT_SQUARE, (0.3, -0.4)) == pytest.approx(0.42, abs=1e-15)
    assert overlap_volume(UNIT_SQUARE, (1.5, 0)) == 0.0


def test_overlap_volume_symmetry_and_lipschitz():
    rng = np.random.default_rng(1)
    w = Window(-1, 2, 1.5, 3)
    h = rng.uniform(-3, 3, (500, 2))
    assert np.array_equal(overlap_volume(w, h), overlap_volume(w, -h))
    dx = 1e-3
    diff = np.abs(overlap_volume(w, h + [dx, 0]) - overlap_volume(w, h))
    assert np.all(diff <= w.height * dx + 1e-12)
    diff = np.abs(overlap_volume(w, h + [0, dx]) - overlap_volume(w, h))
    assert np.all(diff <= w.width * dx + 1e-12)
    assert overlap_volume(w, (0, 0)) == w.area


def test_edge_factor_examples():
    assert isotropized_edge_factor(UNIT_SQUARE, 0.0) == 1.0
    assert isotropized_edge_factor(UNIT_SQUARE, 0.1) == pytest.approx(0.8758591, abs=1e-7)
    # closed forms 1 - 0.4/π + 0.01/π and 1 - 2/π + 0.25/π
    assert isotropized_edge_factor(UNIT_SQUARE, 0.5) == pytest.approx(0.4429577, abs=1e-7)


@pytest.mark.parametrize("r", [0.1, 0.5])
def test_edge_factor_against_dense_midpoint_rule(r):
    assert isotropized_edge_factor(UNIT_SQUARE, r) == pytest.approx(midpoint_average(UNIT_SQUARE, r), abs=1e-10)


def test_edge_factor_unit_square_closed_form():
    r = np.linspace(0, 1, 201)
    assert np.allclose(isotropized_edge_factor(UNIT_SQUARE, r), 1 - 4 * r / np.pi + r**2 / np.pi, atol=1e-14)


@pytest.mark.parametrize("window", [Window(0, 0, 2, 0.5), Window(-1, -1, 0.3, 0.2), UNIT_SQUARE])
def test_edge_factor_general_rectangles(window):
    # beyond the shorter side the overlap has kinks, so use adaptive quadrature there
    from scipy import integrate

    for r in np.linspace(0, window.diameter * 1.1, 37):
        f = lambda th: overlap_volume(window, (r * np.cos(th), r * np.sin(th)))
        pts = []
        if r > 0:
            for c in (window.width / r, window.height / r):
                if c < 1:
                    pts += [np.arccos(c), np.arcsin(c)]
        ref = integrate.quad(f, 0, np.pi / 2, points=pts or None, epsabs=1e-13, limit=200)[0] * 4 / (2 * np.pi)
        assert isotropized_edge_factor(window, r) == pytest.approx(ref, abs=1e-10)


def test_edge_factor_monotone_and_errors():
    r = np.linspace(0, 2, 500)
    a = isotropized_edge_factor(Window(0, 0, 1.3, 0.7), r)
    assert np.all(np.diff(a) <= 1e-15)
    assert a[-1] == 0.0
    with pytest.raises(ValueError):
        isotropized_edge_factor(UNIT_SQUARE, -0.1)


def test_angular_overlap_integral():
    assert angular_overlap_integral(UNIT_SQUARE, 0) == pytest.approx(2 * np.pi)
    assert angular_overlap_integral(UNIT_SQUARE, 0.1) == pytest.approx(2 * np.pi * 0.8758591, abs=1e-6)
    assert angular_overlap_integral(UNIT_SQUARE, 2.0) == 0.0


def test_contains_closed():
    assert contains(UNIT_SQUARE, (0.5, 0.5))
    assert contains(UNIT_SQUARE, (1.0, 1.0))
    assert not contains(UNIT_SQUARE, (1.1, 0.5))
    assert contains(UNIT_SQUARE, np.array([[0, 0], [2, 0]])).tolist() == [True, False]
