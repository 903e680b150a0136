"""Generalized eigen-analysis of the input/output graph pair and unit scores.

The distortion between the two graphs is captured by the top generalized
eigenpairs of L_in v = lambda (L_out + gamma I) v; units are embedded with
sqrt(lambda)-weighted eigenvectors and scored by how much their local
input-side relationships stretch in that embedding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericError

CONSTANT_COS_THRESHOLD = 0.999
RESIDUAL_TOL = 1e-6


def default_gamma(l_out):
    """Trace-scaled Tikhonov shift; 1e-6 floor for an all-zero Laplacian."""
    m = l_out.shape[0]
    g = 1e-6 * float(np.trace(l_out)) / m
    return g if g > 0 else 1e-6


@dataclass
class SpectralDistortion:
    eigenvalues: np.ndarray  # descending, >= 0
    eigenvectors: np.ndarray  # m x s, unit-norm columns
    gamma: float
    embedding: np.ndarray = field(init=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        if np.any(lam < -1e-9):
            raise NumericError("negative generalized eigenvalue beyond tolerance")
        lam = np.maximum(lam, 0.0)
        self.eigenvalues = lam
        self.embedding = self.eigenvectors * np.sqrt(lam)[None, :]

    @property
    def s(self):
        return self.eigenvalues.shape[0]


def _fix_signs(vecs):
    # make the largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs[None, :]


def generalized_eigs(l_in, l_out, s, gamma=None):
    """Top-s eigenpairs of L_in v = lambda (L_out + gamma I) v.

    Eigenpairs aligned with the shared all-ones direction are dropped
    before selecting the top s. gamma=None selects the trace-scaled
    default; the solver requires gamma > 0.
    """
    l_in = np.asarray(l_in, dtype=np.float64)
    l_out = np.asarray(l_out, dtype=np.float64)
    m = l_in.shape[0]
    if l_in.shape != l_out.shape or l_in.ndim != 2 or l_in.shape[0] != l_in.shape[1]:
        raise ConfigError("Laplacians must be square and equally sized")
    for name, mat in (("L_in", l_in), ("L_out", l_out)):
        if not np.allclose(mat, mat.T, atol=1e-8):
            raise ConfigError(f"{name} is not symmetric")
    if not 1 <= s <= m - 1:
        raise ConfigError(f"s={s} invalid for m={m}")
    if gamma is None:
        gamma = default_gamma(l_out)
    if gamma <= 0:
        raise ConfigError("gamma must be > 0 for the definite solver")

    b = l_out + gamma * np.eye(m)
    try:
        lam, vecs = scipy.linalg.eigh(l_in, b)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"generalized eigensolve failed: {exc}") from exc

    # drop pairs carried by the shared constant direction
    ones = np.full(m, 1.0 / np.sqrt(m))
    norms = np.linalg.norm(vecs, axis=0)
    cos = np.abs(ones @ vecs) / norms
    keep = cos <= CONSTANT_COS_THRESHOLD
    lam, vecs = lam[keep], vecs[:, keep]
    if lam.size < s:
        raise NumericError(
            f"only {lam.size} usable eigenpairs after constant-direction "
            f"exclusion, need {s}"
        )

    order = np.argsort(lam, kind="stable")[::-1][:s]
    lam = lam[order]
    vecs = vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    vecs = _fix_signs(vecs)

    resid = l_in @ vecs - (b @ vecs) * lam[None, :]
    resid_norm = np.linalg.norm(resid, axis=0)
    if np.any(resid_norm > RESIDUAL_TOL * (1.0 + np.abs(lam))):
        raise NumericError("eigenpair residual exceeds tolerance")
    return SpectralDistortion(lam, vecs, gamma=gamma)


def embedding(dist):
    """Columns sqrt(lambda_r) v_r of the weighted spectral embedding."""
    return dist.embedding


@dataclass
class ImportanceScores:
    layer_index: int
    edge_scores: dict  # (i, j) with i < j -> score
    node_scores: np.ndarray
    ranking: np.ndarray = field(init=False)  # ascending score, index tie-break

    def __post_init__(self):
        self.node_scores = np.asarray(self.node_scores, dtype=np.float64)
        self.ranking = np.lexsort(
            (np.arange(self.node_scores.size), self.node_scores)
        )


def edge_scores(v_s, graph_in):
    """Squared embedding-row difference for every input-side edge."""
    if v_s.shape[0] != graph_in.num_nodes:
        raise ConfigError("embedding rows must match graph nodes")
    scores = {}
    for i, j in graph_in.edges:
        diff = v_s[i] - v_s[j]
        scores[(i, j)] = float(diff @ diff)
    return scores


def node_scores(edge_score_map, graph_in, layer_index=0):
    """Mean edge score over each unit's input-side neighborhood."""
    m = graph_in.num_nodes
    values = np.zeros(m)
    for i in range(m):
        nbrs = graph_in.neighbors(i)
        if nbrs.size == 0:
            raise ConfigError(f"node {i} is isolated; cannot score")
        total = 0.0
        for j in nbrs:
            key = (i, j) if i < j else (j, i)
            total += edge_score_map[key]
        values[i] = total / nbrs.size
    return ImportanceScores(layer_index, edge_score_map, values)


def score_layer(pre_std, post_std, k=None, s=None, gamma=None):
    """Full per-layer scoring: graphs -> eigenpairs -> node scores.

    Returns (ImportanceScores, SpectralDistortion, graph_in, graph_out).
    """
    from . import graphs as graphs_mod

    m = pre_std.num_units
    if s is None:
        s = min(8, m - 2)
    if s < 1:
        raise ConfigError(f"layer too small to score: m={m}")
    graph_in = graphs_mod.build_graph_from_observations(pre_std, k=k, side="in")
    graph_out = graphs_mod.build_graph_from_observations(post_std, k=k, side="out")
    dist = generalized_eigs(graph_in.laplacian, graph_out.laplacian, s, gamma=gamma)
    e_scores = edge_scores(dist.embedding, graph_in)
    scores = node_scores(e_scores, graph_in, layer_index=pre_std.layer_index)
    return scores, dist, graph_in, graph_out


def save_scores_csv(scores, path):
    rank_of = np.empty(scores.node_scores.size, dtype=int)
    rank_of[scores.ranking] = np.arange(scores.node_scores.size)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["unit_id", "node_score", "rank"])
        for i, score in enumerate(scores.node_scores):
            writer.writerow([i, repr(float(score)), int(rank_of[i])])
