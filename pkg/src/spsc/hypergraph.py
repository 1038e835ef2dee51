"""k-NN hypergraph construction and its normalized weight matrix / Laplacian.

One hyperedge per vertex: the vertex itself plus its k nearest neighbors
under Euclidean distance, with binary incidence and unit edge weights. The
normalized vertex-similarity matrix is

    W = Dx^{-1/2} I^T We De^{-1} I Dx^{-1/2},    L = Id - W,

where I is the |E| x n incidence matrix, We the diagonal hyperedge weights,
De the hyperedge degrees, and Dx the (weight-summed) vertex degrees. With
this normalization W is symmetric PSD with spectral norm <= 1, so L is PSD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import as_values
from .errors import DegenerateVertex, InsufficientSamples


@dataclass
class Hypergraph:
    """Incidence plus derived degree, weight, and Laplacian matrices."""

    incidence: np.ndarray  # (|E|, n), entries in [0, 1]
    edge_weights: np.ndarray  # (|E|,)
    edge_degrees: np.ndarray = field(init=False)
    vertex_degrees: np.ndarray = field(init=False)
    W: np.ndarray | None = None
    L: np.ndarray | None = None

    def __post_init__(self):
        self.incidence = np.asarray(self.incidence, dtype=float)
        self.edge_weights = np.asarray(self.edge_weights, dtype=float)
        self.edge_degrees = self.incidence.sum(axis=1)
        self.vertex_degrees = self.edge_weights @ self.incidence

    @property
    def n_vertices(self) -> int:
        return self.incidence.shape[1]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[0]


def _knn_indices(X: np.ndarray, k: int) -> np.ndarray:
    """Row i holds the k nearest neighbors of column i, ties to lower index."""
    n = X.shape[1]
    sq = np.sum(X * X, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    np.fill_diagonal(d2, np.inf)  # self excluded; vertex joins its own edge anyway
    order = np.argsort(d2, axis=1, kind="stable")  # stable sort = lowest-index tie break
    return order[:, :k]


def build_knn_hypergraph(X, k: int) -> Hypergraph:
    """One hyperedge per vertex: itself plus its k nearest neighbors."""
    V = as_values(X)
    n = V.shape[1]
    if n <= k:
        raise InsufficientSamples(f"need n >= k+1 samples, got n={n}, k={k}")
    neighbors = _knn_indices(V, k)
    incidence = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    incidence[rows, neighbors.ravel()] = 1.0
    incidence[np.arange(n), np.arange(n)] = 1.0
    return Hypergraph(incidence, np.ones(n))


def build_knn_graph(X, k: int) -> Hypergraph:
    """Pairwise k-NN graph expressed as 2-vertex hyperedges (one per i-j link)."""
    V = as_values(X)
    n = V.shape[1]
    if n <= k:
        raise InsufficientSamples(f"need n >= k+1 samples, got n={n}, k={k}")
    neighbors = _knn_indices(V, k)
    incidence = np.zeros((n * k, n))
    for i in range(n):
        for t, j in enumerate(neighbors[i]):
            incidence[i * k + t, [i, j]] = 1.0
    return Hypergraph(incidence, np.ones(n * k))


def compute_weight_and_laplacian(H: Hypergraph) -> Hypergraph:
    """Fill in W = Dx^{-1/2} I^T We De^{-1} I Dx^{-1/2} and L = Id - W."""
    if np.any(H.vertex_degrees <= 0):
        bad = np.flatnonzero(H.vertex_degrees <= 0)
        raise DegenerateVertex(f"vertices with zero degree: {bad.tolist()}")
    inv_sqrt_dx = 1.0 / np.sqrt(H.vertex_degrees)
    scaled = (H.edge_weights / H.edge_degrees)[:, None] * H.incidence  # We De^{-1} I
    W = (H.incidence.T @ scaled) * np.outer(inv_sqrt_dx, inv_sqrt_dx)
    H.W = W
    H.L = np.eye(H.n_vertices) - W
    return H


def knn_hypergraph_laplacian(X, k: int) -> Hypergraph:
    """Convenience: build the k-NN hypergraph and derive W and L in one go."""
    return compute_weight_and_laplacian(build_knn_hypergraph(X, k))
