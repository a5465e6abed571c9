"""
Point patterns observed in a rectangular window, CSV ingestion and pair search.
"""

import csv
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Window, contains

__all__ = [
    "PointPattern",
    "BivariatePattern",
    "PatternFormatError",
    "PatternValidationError",
    "load_csv",
    "save_csv",
    "pair_iteration",
    "cross_pairs",
]


class PatternFormatError(ValueError):
    """Malformed CSV content."""


class PatternValidationError(ValueError):
    """Points violate the window constraint."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = list(indices)


@dataclass(frozen=True, eq=False)
class PointPattern:
    """
    Finite planar point set observed in ``window``.

    Points are stored as a read-only ``(n, 2)`` float array. Coincident points
    are allowed but set ``has_duplicates`` and emit a warning, since the
    estimators assume distinct points.
    """

    points: np.ndarray
    window: Window
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise PatternValidationError("non-finite coordinates")
        outside = np.flatnonzero(~contains(self.window, pts)) if len(pts) else np.array([], int)
        if outside.size:
            raise PatternValidationError(
                f"{outside.size} point(s) outside window {self.window.bounds}: indices {outside.tolist()}",
                outside.tolist(),
            )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.has_duplicates:
            warnings.warn("pattern contains coincident points", stacklevel=3)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def has_duplicates(self):
        if self.n < 2:
            return False
        return np.unique(self.points, axis=0).shape[0] < self.n

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]


@dataclass(frozen=True, eq=False)
class BivariatePattern:
    """Two point patterns sharing one window."""

    pattern1: PointPattern
    pattern2: PointPattern

    def __post_init__(self):
        if self.pattern1.window != self.pattern2.window:
            raise PatternValidationError("bivariate components must share the same window")

    @property
    def window(self):
        return self.pattern1.window

    def swapped(self):
        return BivariatePattern(self.pattern2, self.pattern1)


def _parse_float(text, lineno):
    try:
        return float(text)
    except ValueError:
        raise PatternFormatError(f"line {lineno}: cannot parse {text!r} as a number") from None


def load_csv(path, window):
    """
    Read a pattern from CSV.

    A header ``x,y`` yields a :class:`PointPattern`; ``x,y,mark`` with marks in
    {1, 2} yields a :class:`BivariatePattern`.

    Raises
    ------
    PatternFormatError
        Unknown header or malformed row (message carries the line number).
    PatternValidationError
        Points outside ``window``; ``indices`` lists offending rows (0-based).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PatternFormatError("line 1: missing header")
    header = [c.strip() for c in rows[0]]
    if header not in (["x", "y"], ["x", "y", "mark"]):
        raise PatternFormatError(f"line 1: unrecognised header {','.join(header)!r}")
    marked = len(header) == 3
    xy, marks = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise PatternFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        xy.append((_parse_float(row[0], lineno), _parse_float(row[1], lineno)))
        if marked:
            m = row[2].strip()
            if m not in ("1", "2"):
                raise PatternFormatError(f"line {lineno}: mark must be 1 or 2, got {m!r}")
            marks.append(int(m))
    pts = np.array(xy, dtype=float).reshape(-1, 2)
    outside = np.flatnonzero(~contains(window, pts)) if len(pts) else np.array([], int)
    if outside.size:
        raise PatternValidationError(
            f"{outside.size} point(s) outside window {window.bounds}: indices {outside.tolist()}",
            outside.tolist(),
        )
    meta = {"source": os.fspath(path)}
    if not marked:
        return PointPattern(pts, window, meta)
    marks = np.array(marks, dtype=int)
    return BivariatePattern(
        PointPattern(pts[marks == 1], window, dict(meta)),
        PointPattern(pts[marks == 2], window, dict(meta)),
    )


def save_csv(pattern, path, overwrite=False):
    """
    Write a pattern with 17 significant digits, LF line endings.

    Refuses to replace an existing file unless ``overwrite`` is true.
    """
    if os.path.exists(path) and not overwrite:
        raise FileExistsError(f"{path} exists; pass overwrite=True to replace it")
    lines = []
    if isinstance(pattern, BivariatePattern):
        lines.append("x,y,mark")
        for mark, pp in ((1, pattern.pattern1), (2, pattern.pattern2)):
            lines.extend(f"{x:.17g},{y:.17g},{mark}" for x, y in pp.points)
    else:
        lines.append("x,y")
        lines.extend(f"{x:.17g},{y:.17g}" for x, y in pattern.points)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def pair_iteration(pattern, t_max):
    """
    All ordered pairs of distinct indices within distance ``t_max``.

    Returns
    -------
    i, j : numpy.ndarray of int
        Index arrays sorted lexicographically by ``(i, j)``; every unordered
        pair appears once in each orientation.
    d : numpy.ndarray
        ``|x_j - x_i|``.
    """
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    pts = pattern.points if isinstance(pattern, PointPattern) else np.asarray(pattern, float)
    if len(pts) < 2:
        empty = np.array([], dtype=np.int64)
        return empty, empty.copy(), np.array([], dtype=float)
    tree = cKDTree(pts)
    pairs = tree.query_pairs(t_max, output_type="ndarray").astype(np.int64)
    i = np.concatenate([pairs[:, 0], pairs[:, 1]])
    j = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((j, i))
    i, j = i[order], j[order]
    d = np.hypot(pts[j, 0] - pts[i, 0], pts[j, 1] - pts[i, 1])
    return i, j, d


def cross_pairs(pattern1, pattern2, t_max):
    """
    All pairs ``(x in pattern1, y in pattern2)`` with ``|y - x| <= t_max``.

    Returns ``(i, j, d)`` sorted by ``(i, j)``, indices into the two patterns.
    """
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    p1 = pattern1.points if isinstance(pattern1, PointPattern) else np.asarray(pattern1, float)
    p2 = pattern2.points if isinstance(pattern2, PointPattern) else np.asarray(pattern2, float)
    if len(p1) == 0 or len(p2) == 0:
        empty = np.array([], dtype=np.int64)
        return empty, empty.copy(), np.array([], dtype=float)
    t1, t2 = cKDTree(p1), cKDTree(p2)
    sp = t1.sparse_distance_matrix(t2, t_max, output_type="ndarray")
    i = sp["i"].astype(np.int64)
    j = sp["j"].astype(np.int64)
    order = np.lexsort((j, i))
    i, j = i[order], j[order]
    d = np.hypot(p2[j, 0] - p1[i, 0], p2[j, 1] - p1[i, 1])
    return i, j, d
