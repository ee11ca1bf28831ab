"""Leiden community detection with modularity as the quality function."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from nodeclass import _kernels
from nodeclass.graph import Graph

REFINE_THETA = 0.01
MAX_ITERATIONS = 50


@dataclass(frozen=True)
class Partition:
    assignment: np.ndarray

    @property
    def num_communities(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    def __len__(self) -> int:
        return int(self.assignment.shape[0])

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Relabel arbitrary community labels densely by first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(first.shape[0], dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.shape[0])
        return cls(rank[inverse.reshape(-1)])


def modularity(g: Graph, p: Partition, resolution: float = 1.0) -> float:
    """Newman-Girvan modularity ``sum_c L_c/m - resolution * (D_c / 2m)^2``."""
    if len(p) != g.n:
        raise ValueError(f"partition covers {len(p)} nodes, graph has {g.n}")
    if g.m == 0:
        raise ValueError("modularity is undefined for a graph without edges")
    m = g.m
    a = p.assignment
    e = g.edges()
    c = p.num_communities
    intra = np.bincount(a[e[:, 0]][a[e[:, 0]] == a[e[:, 1]]], minlength=c)
    deg_tot = np.bincount(a, weights=g.degrees, minlength=c)
    return float(np.sum(intra / m - resolution * (deg_tot / (2.0 * m)) ** 2))


def _aggregate(adj: sp.csr_matrix, k: np.ndarray, ref: np.ndarray):
    n_agg = int(ref.max()) + 1
    s = sp.csr_matrix((np.ones(ref.shape[0]), (ref, np.arange(ref.shape[0]))), shape=(n_agg, ref.shape[0]))
    agg = (s @ adj @ s.T).tocsr()
    agg.setdiag(0)
    agg.eliminate_zeros()
    agg.sort_indices()
    return agg, np.bincount(ref, weights=k, minlength=n_agg)


def _leiden_iteration(g: Graph, membership: np.ndarray, resolution: float, rng: np.random.Generator):
    """One full Leiden pass; returns the new membership and the first-level move count."""
    two_m = 2.0 * g.m
    adj = sp.csr_matrix((np.ones(g.indices.shape[0]), g.indices, g.indptr), shape=(g.n, g.n))
    k = g.degrees.astype(np.float64)
    comm = membership.copy()
    node_to_agg = np.arange(g.n)
    first_moves = -1
    while True:
        n_level = adj.shape[0]
        order = rng.permutation(n_level)
        moves = _kernels.leiden_move_nodes(
            adj.indptr.astype(np.int64), adj.indices.astype(np.int64), adj.data, k, comm, order, two_m, resolution
        )
        if first_moves < 0:
            first_moves = moves
        _, comm = np.unique(comm, return_inverse=True)
        comm = comm.astype(np.int64)
        if int(comm.max()) + 1 == n_level:
            break
        ref = _kernels.leiden_refine(
            adj.indptr.astype(np.int64), adj.indices.astype(np.int64), adj.data, k, comm,
            rng.permutation(n_level), rng.random(n_level), two_m, resolution, REFINE_THETA,
        )
        _, ref = np.unique(ref, return_inverse=True)
        ref = ref.astype(np.int64)
        n_agg = int(ref.max()) + 1
        # the aggregate's starting partition is the unrefined one
        agg_comm = np.zeros(n_agg, dtype=np.int64)
        agg_comm[ref] = comm
        if n_agg == n_level:
            comm = agg_comm[ref]
            break
        adj, k = _aggregate(adj, k, ref)
        node_to_agg = ref[node_to_agg]
        comm = agg_comm
    return comm[node_to_agg], first_moves


def detect_communities(g: Graph, resolution: float = 1.0, seed: int = 0) -> Partition:
    """Leiden community detection (local moving, refinement, aggregation).

    Passes are repeated until a pass leaves the partition unchanged, at which
    point no single-node move increases modularity.
    """
    if g.n == 0:
        raise ValueError("detect_communities needs at least one node")
    if g.m == 0:
        return Partition(np.arange(g.n, dtype=np.int64))
    rng = np.random.default_rng(seed)
    membership = np.arange(g.n, dtype=np.int64)
    for _ in range(MAX_ITERATIONS):
        new, moves = _leiden_iteration(g, membership, resolution, rng)
        new = Partition.from_labels(new).assignment
        if moves == 0 and np.array_equal(new, membership):
            break
        membership = new
    return Partition(membership)


def write_partition(p: Partition, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "community_id"])
        for u, c in enumerate(p.assignment.tolist()):
            w.writerow([u, c])
