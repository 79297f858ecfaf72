from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from config.errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph with one nonnegative total-variation weight per edge.

    `edges` is an (E, 2) int array with u < v on every row, no duplicates.
    """
    num_vertices: int
    edges: np.ndarray
    edge_tv_weight: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.edge_tv_weight, dtype=np.float64).reshape(-1)
        if weights.shape[0] != edges.shape[0]:
            raise InvalidInputError(
                f"{edges.shape[0]} edges but {weights.shape[0]} edge weights")
        if edges.size:
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise InvalidInputError("edges must satisfy u < v (no self-loops)")
            if edges.min() < 0 or edges.max() >= self.num_vertices:
                raise InvalidInputError("edge endpoint out of vertex range")
            if np.unique(edges, axis=0).shape[0] != edges.shape[0]:
                raise InvalidInputError("duplicate edges")
        if np.any(~np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidInputError("edge weights must be finite and nonnegative")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_tv_weight", weights)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_vertices)

    def with_weights(self, weights) -> "Graph":
        w = np.broadcast_to(np.asarray(weights, dtype=np.float64), (self.num_edges,))
        return Graph(self.num_vertices, self.edges, w.copy())


def _canonical(num_vertices: int, pairs, weights) -> Graph:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return Graph(num_vertices, pairs[order], np.asarray(weights, dtype=np.float64)[order])


def build_knn_graph(points, k: int, weight: float = 1.0) -> Graph:
    """Symmetrized k-nearest-neighbour graph (edge if either endpoint picks the other).

    Distance ties go to the lower vertex index.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n < 2:
        raise InvalidInputError("kNN graph needs at least 2 points")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("non-finite point coordinate")
    if k < 1 or k >= n:
        raise InvalidInputError(f"k must be in [1, {n - 1}], got {k}")

    dist = cdist(pts, pts)
    np.fill_diagonal(dist, np.inf)
    # stable sort keeps lower indices first among equal distances
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    pairs = np.sort(np.stack([rows, nearest.ravel()], axis=1), axis=1)
    pairs = np.unique(pairs, axis=0)
    return _canonical(n, pairs, np.full(pairs.shape[0], float(weight)))


def chain_graph(num_vertices: int, weight=1.0) -> Graph:
    u = np.arange(num_vertices - 1)
    pairs = np.stack([u, u + 1], axis=1)
    return Graph(num_vertices, pairs, np.broadcast_to(
        np.asarray(weight, dtype=np.float64), (pairs.shape[0],)).copy())


def grid_graph(rows: int, cols: int, weight=1.0) -> Graph:
    """4-connected grid, vertex id = r * cols + c."""
    ids = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    vert = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    pairs = np.concatenate([horiz, vert])
    return _canonical(rows * cols, pairs, np.broadcast_to(
        np.asarray(weight, dtype=np.float64), (pairs.shape[0],)).copy())

