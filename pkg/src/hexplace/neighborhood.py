"""Fixed-radius neighbor search over agent positions.

A uniform grid with cell size equal to the query radius, so every query only
inspects the 3x3 block of cells around the query point. ``naive_radius_oracle``
is the brute-force reference the grid is tested against.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

_OFFSETS = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=np.int64)


class NeighborIndex:
    """Immutable cell-list index; build with :func:`build_index`."""

    def __init__(self, ids: np.ndarray, positions: np.ndarray, cell_size: float):
        if not cell_size > 0:
            raise ValueError("cell_size must be > 0")
        self.cell_size = float(cell_size)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        cells = np.floor(self.positions / self.cell_size).astype(np.int64)
        self.cells = cells
        if len(cells):
            self._lo = cells.min(axis=0) - 1
            span = cells.max(axis=0) - self._lo + 2
        else:
            self._lo = np.zeros(2, dtype=np.int64)
            span = np.ones(2, dtype=np.int64)
        self._width = int(span[1]) + 1
        self._span = span
        keys = self._key(cells)
        # stable sort keeps insertion order inside each bucket
        self._order = np.argsort(keys, kind="stable")
        self._sorted_keys = keys[self._order]

    def _key(self, cells: np.ndarray) -> np.ndarray:
        rel = cells - self._lo
        return rel[..., 0] * self._width + rel[..., 1]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def buckets(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = {}
        for agent_id, (cx, cy) in zip(self.ids.tolist(), self.cells.tolist()):
            out.setdefault((cx, cy), []).append(agent_id)
        return out

    def pairs_within(self, centers: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
        """All (query row, member row) pairs with distance <= r.

        Rows index ``centers`` and this index's ``positions`` respectively.
        Output is sorted by member row, then query row.
        """
        if r > self.cell_size * (1 + 1e-12):
            raise ValueError("query radius exceeds cell size")
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        empty = np.zeros(0, dtype=np.int64)
        if len(centers) == 0 or len(self.ids) == 0:
            return empty, empty
        qcells = np.floor(centers / self.cell_size).astype(np.int64)
        ncells = qcells[:, None, :] + _OFFSETS[None, :, :]  # (q, 9, 2)
        rel = ncells - self._lo
        rx, ry = rel[..., 0], rel[..., 1]
        inside = (rx >= 0) & (ry >= 0) & (rx < self._span[0]) & (ry < self._span[1])
        keys = np.where(inside, rx * self._width + ry, -1).ravel()
        left = np.searchsorted(self._sorted_keys, keys, side="left")
        right = np.searchsorted(self._sorted_keys, keys, side="right")
        counts = np.where(keys >= 0, right - left, 0)
        total = int(counts.sum())
        if total == 0:
            return empty, empty
        starts = np.repeat(left, counts)
        within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        members = self._order[starts + within]
        queries = np.repeat(np.arange(len(centers)), 9)
        queries = np.repeat(queries, counts)
        dx = self.positions[members, 0] - centers[queries, 0]
        dy = self.positions[members, 1] - centers[queries, 1]
        keep = dx * dx + dy * dy <= r * r
        members, queries = members[keep], queries[keep]
        order = np.argsort(members * len(centers) + queries, kind="stable")
        return queries[order], members[order]


def build_index(agents: Iterable, cell_size: float) -> NeighborIndex:
    """Index ``(id, (x, y))`` pairs into square cells of side ``cell_size``."""
    agents = list(agents)
    ids = np.array([a[0] for a in agents], dtype=np.int64)
    pos = np.array([a[1] for a in agents], dtype=float).reshape(-1, 2)
    return NeighborIndex(ids, pos, cell_size)


def query_radius(index: NeighborIndex, center, r: float) -> list[int]:
    """Ids within distance ``r`` (inclusive) of ``center``, ascending."""
    _, members = index.pairs_within(np.array([center], dtype=float), r)
    return sorted(index.ids[members].tolist())


def naive_radius_oracle(agents: Iterable, center, r: float) -> list[int]:
    cx, cy = center
    found = []
    for agent_id, (x, y) in agents:
        if (x - cx) ** 2 + (y - cy) ** 2 <= r * r:
            found.append(agent_id)
    return sorted(found)


def naive_pairs(sources: np.ndarray, targets: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs reference for :meth:`NeighborIndex.pairs_within` (O(n*m))."""
    sources = np.asarray(sources, dtype=float).reshape(-1, 2)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    d = targets[:, None, :] - sources[None, :, :]
    t, s = np.nonzero((d * d).sum(axis=2) <= r * r)
    return s, t

