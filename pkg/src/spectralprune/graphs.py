"""Neuron similarity graphs: kNN construction, Gaussian weights, Laplacians."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass
class NeuronGraph:
    """Weighted undirected graph over one layer's units.

    adjacency records the kNN topology separately from the Gaussian
    weights: an edge between very distant neighbors can underflow to
    weight 0 yet must still count for neighborhood-based scoring.
    """

    weights: np.ndarray  # symmetric, zero diagonal
    k: int
    tau: float
    side: str  # "in" | "out"
    adjacency: np.ndarray | None = None  # bool, defaults to weights > 0
    edges: list = field(init=False)
    degree: np.ndarray = field(init=False)
    laplacian: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ConfigError("weight matrix must be square")
        if not np.allclose(w, w.T, atol=1e-12):
            raise ConfigError("weight matrix must be symmetric")
        if np.any(np.diag(w) != 0):
            raise ConfigError("weight matrix must have a zero diagonal")
        self.weights = w
        if self.adjacency is None:
            adj = w > 0
        else:
            adj = np.asarray(self.adjacency, dtype=bool)
            if adj.shape != w.shape:
                raise ConfigError("adjacency shape must match the weight matrix")
            if not np.array_equal(adj, adj.T) or np.any(np.diag(adj)):
                raise ConfigError("adjacency must be symmetric with a zero diagonal")
            if np.any(w[~adj] != 0):
                raise ConfigError("nonzero weight outside the adjacency")
        self.adjacency = adj
        ii, jj = np.nonzero(np.triu(adj, 1))
        self.edges = list(zip(ii.tolist(), jj.tolist()))
        self.degree = w.sum(axis=1)
        self.laplacian = np.diag(self.degree) - w

    @property
    def num_nodes(self):
        return self.weights.shape[0]

    def neighbors(self, i):
        return np.nonzero(self.adjacency[i])[0]


def pairwise_distances(obs):
    """Euclidean distances between the rows of a standardized observation matrix."""
    if not obs.standardized:
        raise ConfigError("observations must be standardized before graph construction")
    x = obs.values
    if x.shape[0] < 2:
        raise ConfigError("need >= 2 units to build a graph")
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    d = np.sqrt(d2)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def select_bandwidth(dist, k):
    """Median over nodes of the distance to the k-th nearest neighbor.

    Falls back to the smallest positive distance when that median is 0, and
    to 1.0 when every distance is 0.
    """
    m = dist.shape[0]
    if not 1 <= k <= m - 1:
        raise ConfigError(f"k={k} invalid for {m} nodes")
    kth = np.sort(dist + np.diag(np.full(m, np.inf)), axis=1)[:, k - 1]
    tau = float(np.median(kth))
    if tau > 0:
        return tau
    off_diag = dist[~np.eye(m, dtype=bool)]
    positive = off_diag[off_diag > 0]
    if positive.size:
        return float(positive.min())
    return 1.0


def _knn_sets(dist, k):
    m = dist.shape[0]
    neighbors = np.zeros((m, m), dtype=bool)
    for i in range(m):
        order = np.argsort(dist[i], kind="stable")  # ties -> ascending index
        order = order[order != i]
        neighbors[i, order[:k]] = True
    return neighbors


def build_knn_graph(dist, k, tau, side):
    """Union-symmetrized kNN graph with Gaussian edge weights exp(-d^2/2tau^2)."""
    m = dist.shape[0]
    if not 1 <= k <= m - 1:
        raise ConfigError(f"k={k} invalid for {m} nodes")
    if tau <= 0:
        raise ConfigError("tau must be > 0")
    if side not in ("in", "out"):
        raise ConfigError("side must be 'in' or 'out'")
    adj = _knn_sets(dist, k)
    adj = adj | adj.T
    w = np.where(adj, np.exp(-(dist**2) / (2.0 * tau**2)), 0.0)
    np.fill_diagonal(w, 0.0)
    np.fill_diagonal(adj, False)
    return NeuronGraph(w, k=k, tau=tau, side=side, adjacency=adj)


def laplacian(graph):
    """Unnormalized Laplacian L = D - W."""
    return graph.laplacian


def build_graph_from_observations(obs, k=None, side=None):
    """Convenience path: distances -> bandwidth -> graph."""
    m = obs.num_units
    if k is None:
        k = min(10, m - 1)
    if side is None:
        side = "in" if obs.kind == "pre" else "out"
    dist = pairwise_distances(obs)
    tau = select_bandwidth(dist, k)
    return build_knn_graph(dist, k, tau, side)


def save_edge_list(graph, path):
    """Debug export: header plus one `i j weight` line per edge."""
    with open(path, "w") as f:
        f.write(f"# m={graph.num_nodes} k={graph.k} tau={graph.tau!r} side={graph.side}\n")
        for i, j in graph.edges:
            f.write(f"{i} {j} {float(graph.weights[i, j])!r}\n")
