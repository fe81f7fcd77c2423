"""Unweighted K-nearest-neighbor graphs and the combinatorial Laplacian.

The K-NN relation is directed (each point points at its K nearest neighbors
by Euclidean distance, ties broken by smaller point index) and symmetrized
by union, so no vertex is ever isolated for k >= 1. Because the graph is
unweighted, the Laplacian depends only on the adjacency structure: rotating
or uniformly scaling a cloud leaves graph, Laplacian and spectrum unchanged.
"""

from dataclasses import dataclass

import numpy as np


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class KnnGraph:
    n: int
    k: int
    adjacency: np.ndarray  # (n, n) uint8, symmetric, zero diagonal

    def __post_init__(self):
        self.adjacency.setflags(write=False)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1, dtype=np.int64)

    def edge_list(self) -> np.ndarray:
        """Undirected edges as (m, 2) index pairs with i < j."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return np.column_stack([i, j])


@dataclass(frozen=True)
class Laplacian:
    """L = D - A, assembled in integer arithmetic then stored as float64."""

    matrix: np.ndarray
    source: KnnGraph

    def __post_init__(self):
        self.matrix.setflags(write=False)


def squared_distance_matrix(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _neighbors_brute(points: np.ndarray, k: int) -> np.ndarray:
    d2 = squared_distance_matrix(points)
    np.fill_diagonal(d2, np.inf)
    # stable sort on equal distances keeps ascending index order: ties go
    # to the smaller point index
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def _neighbors_kdtree(points: np.ndarray, k: int) -> np.ndarray:
    from scipy.spatial import cKDTree

    n = len(points)
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=k + 1)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        # inflate the k-th radius a hair so boundary ties are never missed,
        # then re-rank candidates with the exact formula the brute path uses
        r = dist[i, -1] * (1.0 + 1e-9) + 1e-300
        cand = np.array(tree.query_ball_point(points[i], r), dtype=np.int64)
        cand = cand[cand != i]
        diff = points[cand] - points[i]
        d2 = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((cand, d2))
        out[i] = cand[order[:k]]
    return out


def build_knn_graph(points: np.ndarray, k: int, method: str = "brute") -> KnnGraph:
    """Build the union-symmetrized unweighted K-NN graph of a cloud.

    method "brute" is the exact O(n^2) reference; "kdtree" is an accelerator
    that produces identical output (candidates are re-ranked with the same
    distance formula and tie rule).
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if not 1 <= k < n:
        raise GraphError(f"need 1 <= k < n, got k={k}, n={n}")
    if method == "brute":
        nbrs = _neighbors_brute(pts, k)
    elif method == "kdtree":
        nbrs = _neighbors_kdtree(pts, k)
    else:
        raise GraphError(f"unknown method {method!r}")

    adj = np.zeros((n, n), dtype=np.uint8)
    rows = np.repeat(np.arange(n), k)
    adj[rows, nbrs.ravel()] = 1
    adj = adj | adj.T
    return KnnGraph(n=n, k=k, adjacency=adj)


def laplacian(graph: KnnGraph) -> Laplacian:
    a = graph.adjacency.astype(np.int64)
    lap = np.diag(a.sum(axis=1)) - a
    return Laplacian(matrix=lap.astype(np.float64), source=graph)


def write_edge_csv(graph: KnnGraph, path) -> None:
    """One "i,j" line per undirected edge, i < j."""
    with open(path, "w") as fh:
        for i, j in graph.edge_list():
            fh.write(f"{i},{j}\n")
