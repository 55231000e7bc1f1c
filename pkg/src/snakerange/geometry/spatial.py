"""Fixed-radius neighbor search on a uniform grid."""

from __future__ import annotations

import itertools

import numpy as np


class SpatialIndex:
    """Points hashed into cubic cells of side ``cell``.

    A query of radius eps <= cell only needs the 3^d cells around the query
    cell.  Cells are stored as sorted flat keys, so lookups are binary searches.
    """

    def __init__(self, points, cell: float):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        if not cell > 0:
            raise ValueError("cell size must be positive")
        self.points = pts
        self.cell = float(cell)
        n, d = pts.shape
        self.d = d
        if n == 0:
            self.origin = np.zeros(d)
            self.shape = np.ones(d, dtype=np.int64)
        else:
            self.origin = pts.min(axis=0) - self.cell  # one empty layer of cells on each side
            self.shape = np.floor((pts.max(axis=0) - self.origin) / self.cell).astype(np.int64) + 2
        if np.prod(self.shape.astype(np.float64)) > 2.0 ** 62:
            raise ValueError("grid too fine for flat cell keys; use a larger cell")
        self._strides = np.cumprod(np.concatenate(([1], self.shape[::-1][:-1])))[::-1].astype(np.int64)
        keys = self._keys(pts)
        self.order = np.argsort(keys, kind="stable")
        sk = keys[self.order]
        self.cell_keys, self.cell_start, self.cell_count = np.unique(sk, return_index=True, return_counts=True)
        self.bbox = (pts.min(axis=0), pts.max(axis=0)) if n else (self.origin, self.origin)
        self._offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)

    def __len__(self) -> int:
        return self.points.shape[0]

    def _coords(self, x: np.ndarray) -> np.ndarray:
        return np.floor((x - self.origin) / self.cell).astype(np.int64)

    def _keys(self, x: np.ndarray) -> np.ndarray:
        return self._coords(x) @ self._strides

    def cell_of(self, i: int) -> int:
        return int(self._keys(self.points[i:i + 1])[0])

    def candidates(self, x) -> np.ndarray:
        """Indices of points in the 3^d cells around x (a superset of the eps-neighbors)."""
        x = np.asarray(x, dtype=np.float64)
        c = self._coords(x[None, :])[0]
        nb = c + self._offsets
        ok = np.all((nb >= 0) & (nb < self.shape), axis=1)
        keys = nb[ok] @ self._strides
        if self.cell_keys.size == 0:
            return np.zeros(0, dtype=np.int64)
        pos = np.minimum(np.searchsorted(self.cell_keys, keys), self.cell_keys.size - 1)
        pos = pos[self.cell_keys[pos] == keys]
        parts = [self.order[self.cell_start[p]:self.cell_start[p] + self.cell_count[p]] for p in pos]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def query(self, x, eps: float) -> np.ndarray:
        """Sorted indices of points within eps of x (closed ball)."""
        if eps > self.cell:
            raise ValueError("query radius exceeds the cell size")
        idx = self.candidates(x)
        if idx.size == 0:
            return idx
        dist2 = np.sum((self.points[idx] - np.asarray(x)) ** 2, axis=1)
        return np.sort(idx[dist2 <= eps * eps])

    def any_within(self, queries, eps: float) -> np.ndarray:
        """For each query point, whether some indexed point lies within eps."""
        if eps > self.cell:
            raise ValueError("query radius exceeds the cell size")
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        found = np.zeros(q.shape[0], dtype=bool)
        if len(self) == 0:
            return found
        base = self._coords(q)
        e2 = eps * eps
        for off in self._offsets:
            nb = base + off
            ok = np.all((nb >= 0) & (nb < self.shape), axis=1) & ~found
            qi = np.flatnonzero(ok)
            if qi.size == 0:
                continue
            keys = nb[qi] @ self._strides
            pos = np.searchsorted(self.cell_keys, keys)
            pos = np.minimum(pos, self.cell_keys.size - 1)
            hit = self.cell_keys[pos] == keys
            qi, pos = qi[hit], pos[hit]
            start, count = self.cell_start[pos], self.cell_count[pos]
            j = 0
            while qi.size:
                pts = self.points[self.order[start + j]]
                close = np.sum((pts - q[qi]) ** 2, axis=1) <= e2
                found[qi[close]] = True
                j += 1
                more = (count > j) & ~close
                qi, start, count = qi[more], start[more], count[more]
        return found
