"""Weighted graph construction (Voronoi / epsilon / kNN) and discrete TV."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse, spatial
from scipy.sparse import csgraph

from .errors import DegenerateInput, ShapeMismatch
from .geometry import VoronoiDiagram


@dataclass(frozen=True)
class ExactVoronoi:
    """Facet-length weights w_ij = H^1(dV_i ∩ dV_j)."""


@dataclass(frozen=True)
class ClippedVoronoi:
    """Facet weights floored at c0 * n^{-(d-1)/d} (d = 2)."""

    c0: float = 1.0

    def __post_init__(self):
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")


@dataclass(frozen=True)
class UnitVoronoi:
    """Voronoi adjacency structure with all weights set to 1."""


@dataclass(frozen=True)
class Epsilon:
    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclass(frozen=True)
class Knn:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph: edges (i, j) with i < j, sorted, strictly positive weights."""

    n: int
    edges: np.ndarray  # (m, 2) int
    weights: np.ndarray  # (m,) float

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(edges) != len(weights):
            raise ShapeMismatch("edges and weights length mismatch")
        if len(edges):
            if not np.all(edges[:, 0] < edges[:, 1]):
                raise ValueError("edges must satisfy i < j")
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges, weights = edges[order], weights[order]
            if np.any(np.all(edges[1:] == edges[:-1], axis=1)):
                raise ValueError("duplicate edges")
            if np.any(weights <= 0):
                raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> sparse.csr_matrix:
        if self.m == 0:
            return sparse.csr_matrix((self.n, self.n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        a = sparse.coo_matrix(
            (np.concatenate([self.weights, self.weights]),
             (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n, self.n),
        )
        return a.tocsr()

    def n_components(self) -> int:
        return csgraph.connected_components(self.adjacency(), directed=False)[0]


def build_voronoi_graph(diagram: VoronoiDiagram, scheme=ExactVoronoi()) -> WeightedGraph:
    """Graph on the Voronoi adjacency structure under the chosen weight scheme."""
    if diagram.n < 2:
        raise DegenerateInput("need at least 2 points")
    return graph_from_facets(diagram.n, diagram.facet_pairs, diagram.facet_lengths, scheme)


def graph_from_facets(n: int, pairs: np.ndarray, lengths: np.ndarray,
                      scheme=ExactVoronoi()) -> WeightedGraph:
    lengths = np.asarray(lengths, dtype=float)
    if isinstance(scheme, ExactVoronoi):
        weights = lengths
    elif isinstance(scheme, ClippedVoronoi):
        floor = scheme.c0 * n ** -0.5  # n^{-(d-1)/d} at d = 2
        weights = np.maximum(lengths, floor)
    elif isinstance(scheme, UnitVoronoi):
        weights = np.ones(len(lengths))
    else:
        raise ValueError(f"not a Voronoi weight scheme: {scheme!r}")
    return WeightedGraph(n=n, edges=np.asarray(pairs, dtype=int), weights=weights)


def build_eps_graph(points, eps: float) -> WeightedGraph:
    """Unit-weight graph with an edge whenever ||x_i - x_j|| <= eps (inclusive)."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if eps <= 0:
        pairs = np.empty((0, 2), dtype=int)
    else:
        tree = spatial.cKDTree(pts)
        pairs = tree.query_pairs(r=eps, output_type="ndarray")
    return WeightedGraph(n=n, edges=pairs, weights=np.ones(len(pairs)))


def build_knn_graph(points, k: int) -> WeightedGraph:
    """Symmetrized kNN graph: edge iff ||x_i-x_j|| <= max of the two kth-NN radii.

    Exact distance ties for the kth slot are broken toward smaller index.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    tree = spatial.cKDTree(pts)
    window = min(k + 2, n)  # one extra column to detect ties at the kth slot
    dist, idx = tree.query(pts, k=window)
    # Column 0 is the point itself; radius of the kth neighbor is column k.
    radii = dist[:, k]
    tied = np.zeros(n, dtype=bool)
    if window > k + 1:
        tied = dist[:, k + 1] == radii
    # Directed edges i -> its k nearest (tie-free rows, vectorized).
    src = np.repeat(np.arange(n), k)[~np.repeat(tied, k)]
    dst = idx[~tied, 1:k + 1].reshape(-1)
    for i in np.nonzero(tied)[0]:
        # Ties at the kth distance: order candidates by (distance, index).
        cand = [j for j in tree.query_ball_point(pts[i], radii[i] * (1 + 1e-12)) if j != i]
        cand.sort(key=lambda j: (float(np.linalg.norm(pts[j] - pts[i])), j))
        chosen = np.array(cand[:k], dtype=int)
        src = np.concatenate([src, np.full(k, i)])
        dst = np.concatenate([dst, chosen])
    pairs = np.column_stack([np.minimum(src, dst), np.maximum(src, dst)])
    pairs = np.unique(pairs, axis=0)
    return WeightedGraph(n=n, edges=pairs, weights=np.ones(len(pairs)))


def incidence(graph: WeightedGraph) -> sparse.csr_matrix:
    """Edge-incidence operator: row per edge, +w at the smaller index, -w at the larger."""
    m, n = graph.m, graph.n
    if m == 0:
        return sparse.csr_matrix((0, n))
    rows = np.repeat(np.arange(m), 2)
    cols = graph.edges.reshape(-1)
    vals = np.column_stack([graph.weights, -graph.weights]).reshape(-1)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, n))


def discrete_tv(graph: WeightedGraph, values) -> float:
    """Sum over edges of w_ij * |theta_i - theta_j|."""
    theta = np.asarray(values, dtype=float)
    if theta.shape != (graph.n,):
        raise ShapeMismatch(f"values must have shape ({graph.n},), got {theta.shape}")
    if graph.m == 0:
        return 0.0
    diffs = theta[graph.edges[:, 0]] - theta[graph.edges[:, 1]]
    return float(np.abs(diffs) @ graph.weights)


def save_graph(graph: WeightedGraph, path) -> None:
    """Line format: header "n m", then "i j w" per edge, 1-based indices."""
    with open(path, "w") as fh:
        fh.write(f"{graph.n} {graph.m}\n")
        for (i, j), w in zip(graph.edges, graph.weights):
            fh.write(f"{i + 1} {j + 1} {float(w)!r}\n")


def load_graph(path) -> WeightedGraph:
    with open(path) as fh:
        n, m = map(int, fh.readline().split())
        edges = np.empty((m, 2), dtype=int)
        weights = np.empty(m)
        for ell in range(m):
            i, j, w = fh.readline().split()
            edges[ell] = (int(i) - 1, int(j) - 1)
            weights[ell] = float(w)
    return WeightedGraph(n=n, edges=edges, weights=weights)
