"""Compiled kernel sums over a cell list (hot path of the γ Monte Carlo)."""

import math

import numba
import numpy as np


class CellList:
    """Points bucketed on a regular grid of square cells of side ``cell``."""

    def __init__(self, points, bounds, cell, ring=1):
        x0, y0, x1, y1 = bounds
        self.ring = int(ring)
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        self.cell = float(cell) / self.ring
        self.x0, self.y0 = float(x0), float(y0)
        self.ncx = max(1, int(math.ceil((x1 - x0) / self.cell)))
        self.ncy = max(1, int(math.ceil((y1 - y0) / self.cell)))
        ix = np.clip(((pts[:, 0] - x0) / self.cell).astype(np.int64), 0, self.ncx - 1)
        iy = np.clip(((pts[:, 1] - y0) / self.cell).astype(np.int64), 0, self.ncy - 1)
        cid = ix * self.ncy + iy
        order = np.argsort(cid, kind="stable")
        self.order = order
        self.px = np.ascontiguousarray(pts[order, 0])
        self.py = np.ascontiguousarray(pts[order, 1])
        counts = np.bincount(cid, minlength=self.ncx * self.ncy)
        self.start = np.zeros(self.ncx * self.ncy + 1, dtype=np.int64)
        np.cumsum(counts, out=self.start[1:])

    @property
    def grid(self):
        return (self.px, self.py, self.start, self.ncx, self.ncy, self.x0, self.y0, self.cell, self.ring)


@numba.njit(cache=True, nogil=True, fastmath=True, error_model="numpy")
def _cell_of(q, origin, cell, nc):
    i = int((q - origin) / cell)
    if i < 0:
        return 0
    if i >= nc:
        return nc - 1
    return i


@numba.njit(cache=True, nogil=True, fastmath=True, error_model="numpy")
def gauss_sums(qx, qy, px, py, start, ncx, ncy, x0, y0, cell, ring, cut, inv2s2):
    """Unnormalized sums ``Σ_z exp(-|q-z|²/2σ²)`` over the truncated box support."""
    n = qx.shape[0]
    out = np.zeros(n)
    for m in range(n):
        ux = qx[m]
        uy = qy[m]
        ci = _cell_of(ux, x0, cell, ncx)
        cj = _cell_of(uy, y0, cell, ncy)
        s = 0.0
        for i in range(max(ci - ring, 0), min(ci + ring + 1, ncx)):
            for j in range(max(cj - ring, 0), min(cj + ring + 1, ncy)):
                c = i * ncy + j
                for p in range(start[c], start[c + 1]):
                    dx = ux - px[p]
                    if dx > cut or dx < -cut:
                        continue
                    dy = uy - py[p]
                    if dy > cut or dy < -cut:
                        continue
                    s += math.exp(-(dx * dx + dy * dy) * inv2s2)
        out[m] = s
    return out


@numba.njit(cache=True, nogil=True, fastmath=True, error_model="numpy")
def gauss_pair_sums(ux, uy, vx, vy, px, py, start, ncx, ncy, x0, y0, cell, ring, cut, inv2s2):
    """
    For each sample pair (u, v) return the unnormalized sums at u and at v and
    the diagonal ``Σ_z k(u-z) k(v-z)``.
    """
    n = ux.shape[0]
    su = np.zeros(n)
    sv = np.zeros(n)
    diag = np.zeros(n)
    for m in range(n):
        ax = ux[m]
        ay = uy[m]
        bx = vx[m]
        by = vy[m]
        ci = _cell_of(ax, x0, cell, ncx)
        cj = _cell_of(ay, y0, cell, ncy)
        s = 0.0
        for i in range(max(ci - ring, 0), min(ci + ring + 1, ncx)):
            for j in range(max(cj - ring, 0), min(cj + ring + 1, ncy)):
                c = i * ncy + j
                for p in range(start[c], start[c + 1]):
                    dx = ax - px[p]
                    if dx > cut or dx < -cut:
                        continue
                    dy = ay - py[p]
                    if dy > cut or dy < -cut:
                        continue
                    s += math.exp(-(dx * dx + dy * dy) * inv2s2)
        su[m] = s
        ci = _cell_of(bx, x0, cell, ncx)
        cj = _cell_of(by, y0, cell, ncy)
        s = 0.0
        d = 0.0
        for i in range(max(ci - ring, 0), min(ci + ring + 1, ncx)):
            for j in range(max(cj - ring, 0), min(cj + ring + 1, ncy)):
                c = i * ncy + j
                for p in range(start[c], start[c + 1]):
                    dx = bx - px[p]
                    if dx > cut or dx < -cut:
                        continue
                    dy = by - py[p]
                    if dy > cut or dy < -cut:
                        continue
                    b = math.exp(-(dx * dx + dy * dy) * inv2s2)
                    s += b
                    ex = ax - px[p]
                    if ex > cut or ex < -cut:
                        continue
                    ey = ay - py[p]
                    if ey > cut or ey < -cut:
                        continue
                    d += b * math.exp(-(ex * ex + ey * ey) * inv2s2)
        sv[m] = s
        diag[m] = d
    return su, sv, diag


@numba.njit(cache=True, nogil=True, fastmath=True, error_model="numpy")
def gauss_second_sums(ux, uy, vx, vy, px, py, start, ncx, ncy, x0, y0, cell, ring, cut, inv2s2):
    """Unnormalized sums at v and the diagonal ``Σ_z k(u-z) k(v-z)``."""
    n = ux.shape[0]
    sv = np.zeros(n)
    diag = np.zeros(n)
    for m in range(n):
        ax = ux[m]
        ay = uy[m]
        bx = vx[m]
        by = vy[m]
        ci = _cell_of(bx, x0, cell, ncx)
        cj = _cell_of(by, y0, cell, ncy)
        s = 0.0
        d = 0.0
        for i in range(max(ci - ring, 0), min(ci + ring + 1, ncx)):
            for j in range(max(cj - ring, 0), min(cj + ring + 1, ncy)):
                c = i * ncy + j
                for p in range(start[c], start[c + 1]):
                    dx = bx - px[p]
                    if dx > cut or dx < -cut:
                        continue
                    dy = by - py[p]
                    if dy > cut or dy < -cut:
                        continue
                    b = math.exp(-(dx * dx + dy * dy) * inv2s2)
                    s += b
                    ex = ax - px[p]
                    if ex > cut or ex < -cut:
                        continue
                    ey = ay - py[p]
                    if ey > cut or ey < -cut:
                        continue
                    d += b * math.exp(-(ex * ex + ey * ey) * inv2s2)
        sv[m] = s
        diag[m] = d
    return sv, diag
