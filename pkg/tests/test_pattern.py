import itertools

import numpy as np
import pytest

from inhomk.geometry import UNIT_SQUARE, Window
from inhomk.pattern import (
    BivariatePattern,
    PatternFormatError,
    PatternValidationError,
    PointPattern,
    cross_pairs,
    load_csv,
    pair_iteration,
    save_csv,
)


def brute_pairs(pts, t_max):
    out = set()
    for a, b in itertools.permutations(range(len(pts)), 2):
        if np.hypot(*(pts[b] - pts[a])) <= t_max:
            out.add((a, b))
    return out


def write(path, text):
    path.write_text(text)
    return path


def test_load_single_point(tmp_path):
    p = load_csv(write(tmp_path / "a.csv", "x,y\n0.5,0.5\n"), UNIT_SQUARE)
    assert isinstance(p, PointPattern)
    assert p.n == 1
    assert p.points.tolist() == [[0.5, 0.5]]


def test_load_header_only(tmp_path):
    p = load_csv(write(tmp_path / "a.csv", "x,y\n"), UNIT_SQUARE)
    assert p.n == 0


def test_load_outside_window(tmp_path):
    with pytest.raises(PatternValidationError) as err:
        load_csv(write(tmp_path / "a.csv", "x,y\n0.2,0.2\n1.5,0.5\n0.1,-1\n"), UNIT_SQUARE)
    assert err.value.indices == [1, 2]


def test_load_malformed_row_reports_line(tmp_path):
    with pytest.raises(PatternFormatError, match="line 3"):
        load_csv(write(tmp_path / "a.csv", "x,y\n0.2,0.2\n0.3,abc\n"), UNIT_SQUARE)
    with pytest.raises(PatternFormatError, match="line 2"):
        load_csv(write(tmp_path / "b.csv", "x,y\n0.2\n"), UNIT_SQUARE)
    with pytest.raises(PatternFormatError, match="line 2"):
        load_csv(write(tmp_path / "c.csv", "x,y,mark\n0.2,0.2,3\n"), UNIT_SQUARE)
    with pytest.raises(PatternFormatError, match="header"):
        load_csv(write(tmp_path / "d.csv", "a,b\n"), UNIT_SQUARE)


def test_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    p = PointPattern(rng.random((3, 2)), UNIT_SQUARE)
    save_csv(p, tmp_path / "p.csv")
    q = load_csv(tmp_path / "p.csv", UNIT_SQUARE)
    assert np.array_equal(p.points, q.points)
    raw = (tmp_path / "p.csv").read_bytes()
    assert raw.startswith(b"x,y\n") and b"\r" not in raw


def test_round_trip_bivariate(tmp_path):
    rng = np.random.default_rng(4)
    bp = BivariatePattern(PointPattern(rng.random((4, 2)), UNIT_SQUARE), PointPattern(rng.random((2, 2)), UNIT_SQUARE))
    save_csv(bp, tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == "x,y,mark"
    q = load_csv(tmp_path / "b.csv", UNIT_SQUARE)
    assert isinstance(q, BivariatePattern)
    assert np.array_equal(q.pattern1.points, bp.pattern1.points)
    assert np.array_equal(q.pattern2.points, bp.pattern2.points)


def test_save_refuses_overwrite(tmp_path):
    p = PointPattern([[0.1, 0.1]], UNIT_SQUARE)
    save_csv(p, tmp_path / "p.csv")
    with pytest.raises(FileExistsError):
        save_csv(p, tmp_path / "p.csv")
    save_csv(PointPattern([[0.2, 0.2]], UNIT_SQUARE), tmp_path / "p.csv", overwrite=True)
    assert load_csv(tmp_path / "p.csv", UNIT_SQUARE).points.tolist() == [[0.2, 0.2]]


def test_pattern_invariants():
    with pytest.raises(PatternValidationError):
        PointPattern([[0.5, 1.2]], UNIT_SQUARE)
    with pytest.warns(UserWarning, match="coincident"):
        p = PointPattern([[0.5, 0.5], [0.5, 0.5]], UNIT_SQUARE)
    assert p.has_duplicates
    with pytest.raises(ValueError):
        p.points[0, 0] = 0.1
    with pytest.raises(PatternValidationError):
        BivariatePattern(PointPattern([], UNIT_SQUARE), PointPattern([], Window(0, 0, 2, 2)))


def test_pair_iteration_examples():
    p = PointPattern([[0.2, 0.2], [0.25, 0.2]], UNIT_SQUARE)
    i, j, d = pair_iteration(p, 0.1)
    assert sorted(zip(i.tolist(), j.tolist())) == [(0, 1), (1, 0)]
    assert np.allclose(d, 0.05)
    i, j, d = pair_iteration(p, 0.01)
    assert i.size == 0
    with pytest.raises(ValueError):
        pair_iteration(p, -1)


def test_pair_iteration_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(100):
        pts = rng.random((rng.integers(0, 60), 2))
        p = PointPattern(pts, UNIT_SQUARE)
        t_max = rng.uniform(0, 0.3)
        i, j, d = pair_iteration(p, t_max)
        got = set(zip(i.tolist(), j.tolist()))
        assert len(got) == i.size
        assert got == brute_pairs(pts, t_max)
        assert np.allclose(d, np.hypot(*(pts[j] - pts[i]).T))


def test_pair_iteration_count_100_points():
    rng = np.random.default_rng(6)
    pts = rng.random((100, 2))
    i, _, _ = pair_iteration(PointPattern(pts, UNIT_SQUARE), 0.1)
    assert i.size == len(brute_pairs(pts, 0.1))


def test_pair_iteration_all_pairs_and_determinism():
    rng = np.random.default_rng(7)
    p = PointPattern(rng.random((40, 2)), UNIT_SQUARE)
    i, j, d = pair_iteration(p, UNIT_SQUARE.diameter)
    assert i.size == 40 * 39
    i2, j2, d2 = pair_iteration(p, UNIT_SQUARE.diameter)
    assert np.array_equal(i, i2) and np.array_equal(j, j2) and np.array_equal(d, d2)


def test_cross_pairs_matches_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(30):
        a, b = rng.random((rng.integers(0, 30), 2)), rng.random((rng.integers(0, 30), 2))
        i, j, d = cross_pairs(PointPattern(a, UNIT_SQUARE), PointPattern(b, UNIT_SQUARE), 0.2)
        ref = {(k, m) for k in range(len(a)) for m in range(len(b)) if np.hypot(*(b[m] - a[k])) <= 0.2}
        assert set(zip(i.tolist(), j.tolist())) == ref
