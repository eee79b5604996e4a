"""Single-linkage clustering via a minimum spanning tree.

Prim's algorithm builds the MST in O(n^2) time and O(n) memory; merging its
edges in increasing order with a union-find gives the single-linkage tree.
Edges are totally ordered by (distance, smaller index, larger index), which
makes the MST unique and the merge order reproducible when distances tie.
Cluster ids follow the usual convention: points are 0..n-1 and the cluster
formed by merge k gets id n + k.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Dendrogram", "minimum_spanning_tree", "single_linkage"]


@dataclass
class Dendrogram:
    # merge k joins cluster_a[k] < cluster_b[k] at distance[k] into a cluster of size[k]
    cluster_a: np.ndarray
    cluster_b: np.ndarray
    distance: np.ndarray
    size: np.ndarray

    @property
    def n_points(self) -> int:
        return self.distance.size + 1

    def __len__(self) -> int:
        return self.distance.size

    def as_linkage(self) -> np.ndarray:
        """(n-1, 4) float array in the layout used by scipy.cluster.hierarchy."""
        return np.column_stack([self.cluster_a, self.cluster_b, self.distance, self.size]).astype(float)

    def merges(self):
        return list(zip(self.cluster_a.tolist(), self.cluster_b.tolist(),
                        self.distance.tolist(), self.size.tolist()))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise ValueError("points must be a sequence of scalars or of coordinate vectors")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


def _before(d1, a1, b1, d2, a2, b2):
    """Strict edge order (distance, smaller index, larger index), vectorised."""
    return (d1 < d2) | ((d1 == d2) & ((a1 < a2) | ((a1 == a2) & (b1 < b2))))


def minimum_spanning_tree(points):
    """Prim's algorithm. Returns edges (i, j, distance) with i < j, in insertion order."""
    pts = _as_points(points)
    n = pts.shape[0]
    if n < 1:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    inside = np.zeros(n, dtype=bool)
    best_d = np.full(n, np.inf)
    best_u = np.full(n, -1)
    ei, ej, ed = [], [], []
    u = 0
    inside[0] = True
    idx = np.arange(n)
    for _ in range(n - 1):
        d = np.sqrt(np.sum((pts - pts[u]) ** 2, axis=1))
        lo, hi = np.minimum(idx, u), np.maximum(idx, u)
        cur_lo, cur_hi = np.minimum(idx, best_u), np.maximum(idx, best_u)
        better = ~inside & ((best_u < 0) | _before(d, lo, hi, best_d, cur_lo, cur_hi))
        best_d = np.where(better, d, best_d)
        best_u = np.where(better, u, best_u)
        out = np.flatnonzero(~inside)
        dmin = best_d[out].min()
        tied = out[best_d[out] == dmin]
        if tied.size > 1:
            a = np.minimum(tied, best_u[tied])
            b = np.maximum(tied, best_u[tied])
            v = int(tied[np.lexsort((b, a))[0]])
        else:
            v = int(tied[0])
        w = int(best_u[v])
        ei.append(min(v, w))
        ej.append(max(v, w))
        ed.append(float(best_d[v]))
        inside[v] = True
        u = v
    return np.array(ei, dtype=int), np.array(ej, dtype=int), np.array(ed)


def single_linkage(points) -> Dendrogram:
    """Exact single-linkage merge tree under the Euclidean distance."""
    pts = _as_points(points)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("single linkage needs at least 2 points")
    ei, ej, ed = minimum_spanning_tree(pts)
    order = np.lexsort((ej, ei, ed))
    parent = list(range(n))
    cluster = list(range(n))
    size = [1] * n

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    ca, cb, dist, sz = [], [], [], []
    for k, e in enumerate(order):
        ri, rj = find(int(ei[e])), find(int(ej[e]))
        a, b = sorted((cluster[ri], cluster[rj]))
        if size[ri] < size[rj]:
            ri, rj = rj, ri
        parent[rj] = ri
        size[ri] += size[rj]
        cluster[ri] = n + k
        ca.append(a)
        cb.append(b)
        dist.append(float(ed[e]))
        sz.append(size[ri])
    return Dendrogram(np.array(ca, dtype=int), np.array(cb, dtype=int), np.array(dist), np.array(sz, dtype=int))
