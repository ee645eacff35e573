"""2D primitives: swept segment intersection, specular reflection, region membership."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

# Relative tolerance below which two directions count as parallel.
PARALLEL_TOL = 1e-12


class Vec2(NamedTuple):
    x: float
    y: float


class Hit(NamedTuple):
    point: Vec2
    t: float


def segment_intersection(a0, a1, b0, b1) -> Hit | None:
    """Intersect the motion segment a0->a1 with the boundary segment b0->b1.

    Returns the crossing point and its parameter ``t`` along a0->a1, or None
    when the segments miss, are parallel or collinear, or meet only at t == 0.
    """
    rx, ry = a1[0] - a0[0], a1[1] - a0[1]
    ex, ey = b1[0] - b0[0], b1[1] - b0[1]
    denom = rx * ey - ry * ex
    if abs(denom) <= PARALLEL_TOL * math.hypot(rx, ry) * math.hypot(ex, ey):
        return None
    qx, qy = b0[0] - a0[0], b0[1] - a0[1]
    t = (qx * ey - qy * ex) / denom
    u = (qx * ry - qy * rx) / denom
    if not (0.0 < t <= 1.0 and 0.0 <= u <= 1.0):
        return None
    return Hit(Vec2(a0[0] + t * rx, a0[1] + t * ry), t)


def reflect_velocity(v, boundary_dir) -> Vec2:
    """Mirror ``v`` across a line running along ``boundary_dir``."""
    dx, dy = boundary_dir
    norm = math.hypot(dx, dy)
    nx, ny = -dy / norm, dx / norm
    dot = v[0] * nx + v[1] * ny
    return Vec2(v[0] - 2.0 * dot * nx, v[1] - 2.0 * dot * ny)


def nearest_region(p, centers: Sequence) -> int:
    """Index of the center closest to ``p``; ties go to the lowest index."""
    best, best_d2 = 0, math.inf
    for i, c in enumerate(centers):
        c = getattr(c, "center", c)
        d2 = (p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2
        if d2 < best_d2:
            best, best_d2 = i, d2
    return best


def nearest_regions(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Vectorized :func:`nearest_region` over an (n, 2) array of points."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    dx = points[:, 0, None] - centers[None, :, 0]
    dy = points[:, 1, None] - centers[None, :, 1]
    d2 = dx * dx + dy * dy
    # argmin returns the first minimum, which is the lowest index on ties
    return d2.argmin(axis=1)


class RegionLocator:
    """Cached :func:`nearest_regions` over a fixed set of centers.

    A square grid covering the centers records, per cell, the center that is
    strictly nearest to every point of the cell (or -1 when the cell straddles
    a bisector). Points in owned cells are resolved by lookup; the rest fall
    back to the exact scan, so results always equal :func:`nearest_regions`.
    """

    def __init__(self, centers, cells: int = 128, pad: float = 0.0):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self._grid = None
        if len(self.centers) < 2:
            return
        lo = self.centers.min(axis=0) - pad
        hi = self.centers.max(axis=0) + pad
        size = float((hi - lo).max()) / cells
        if size <= 0:
            return
        shape = np.maximum(np.ceil((hi - lo) / size).astype(np.int64), 1)
        ii, jj = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
        corner = lo + np.column_stack([ii.ravel(), jj.ravel()]) * size
        owner = nearest_regions(corner + 0.5 * size, self.centers)
        # closer to i than j over the whole cell iff the linear form
        # 2 p.(ci - cj) + |cj|^2 - |ci|^2 is positive at all four corners
        ci = self.centers[owner]
        sq = (self.centers ** 2).sum(axis=1)
        scale = max(1.0, float(np.abs(self.centers).max()) + size) ** 2
        ok = np.ones(len(owner), dtype=bool)
        for ox in (0.0, size):
            for oy in (0.0, size):
                px = corner[:, 0, None] + ox
                py = corner[:, 1, None] + oy
                f = (2.0 * (px * (ci[:, 0, None] - self.centers[None, :, 0])
                            + py * (ci[:, 1, None] - self.centers[None, :, 1]))
                     + sq[None, :] - sq[owner, None])
                f[np.arange(len(owner)), owner] = np.inf
                ok &= (f > 1e-9 * scale).all(axis=1)
        table = np.where(ok, owner, -1)
        self._grid = (lo, size, shape, np.append(table, -1))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if self._grid is None:
            return nearest_regions(points, self.centers)
        lo, size, shape, table = self._grid
        cell = np.floor((points - lo) / size).astype(np.int64)
        inside = (cell[:, 0] >= 0) & (cell[:, 0] < shape[0]) & (cell[:, 1] >= 0) & (cell[:, 1] < shape[1])
        out = table[np.where(inside, cell[:, 0] * shape[1] + cell[:, 1], len(table) - 1)]
        miss = np.flatnonzero(out < 0)
        if len(miss):
            out[miss] = nearest_regions(points[miss], self.centers)
        return out
