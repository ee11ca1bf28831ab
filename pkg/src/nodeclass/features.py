"""Structural node features: degree, clustering, betweenness, eigenvector,
closeness, coreness and link diversity."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from nodeclass import _kernels
from nodeclass.community import Partition, detect_communities
from nodeclass.graph import Graph

logger = logging.getLogger(__name__)

FEATURE_NAMES = (
    "degree",
    "clustering",
    "betweenness",
    "eigenvector",
    "closeness",
    "coreness",
    "link_diversity",
)
LIGHTWEIGHT_NAMES = tuple(f for f in FEATURE_NAMES if f not in ("betweenness", "closeness"))

# Sources per Brandes block. Fixed so that summation order never depends on
# the number of workers.
_BLOCK = 256


def feature_names(lightweight: bool = False) -> tuple[str, ...]:
    return LIGHTWEIGHT_NAMES if lightweight else FEATURE_NAMES


def degree_centrality(g: Graph) -> np.ndarray:
    """Degree divided by the number of nodes."""
    if g.n == 0:
        raise ValueError("degree centrality needs at least one node")
    return g.degrees / g.n


def local_clustering(g: Graph) -> np.ndarray:
    tri = _kernels.triangles_per_node(g.indptr, g.indices).astype(np.float64)
    deg = g.degrees.astype(np.float64)
    pairs = deg * (deg - 1) / 2
    out = np.zeros(g.n)
    np.divide(tri, pairs, out=out, where=pairs > 0)
    return out


def _shortest_path_sums(g: Graph, jobs: int = 1):
    blocks = [(s, min(s + _BLOCK, g.n)) for s in range(0, g.n, _BLOCK)]

    def run(block):
        return _kernels.brandes_block(g.indptr, g.indices, block[0], block[1])

    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    bc = np.zeros(g.n)
    reach = np.zeros(g.n, dtype=np.int64)
    dsum = np.zeros(g.n, dtype=np.int64)
    for (start, stop), (b, r, d) in zip(blocks, parts):
        bc += b
        reach[start:stop] = r[start:stop]
        dsum[start:stop] = d[start:stop]
    return bc, reach, dsum


def _normalize_betweenness(raw: np.ndarray, n: int) -> np.ndarray:
    # raw sums dependencies over ordered pairs, i.e. twice the pair count
    if n < 3:
        return np.zeros(n)
    return raw / ((n - 1) * (n - 2))


def _closeness_from(reach: np.ndarray, dsum: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    if n < 2:
        return out
    r = reach.astype(np.float64)
    ok = dsum > 0
    out[ok] = (r[ok] / (n - 1)) * (r[ok] / dsum[ok])
    return out


def betweenness(g: Graph, jobs: int = 1) -> np.ndarray:
    """Exact Brandes betweenness scaled by ``2 / ((n-1)(n-2))``."""
    bc, _, _ = _shortest_path_sums(g, jobs)
    return _normalize_betweenness(bc, g.n)


def closeness(g: Graph, jobs: int = 1) -> np.ndarray:
    """Closeness over the reachable set, scaled by the reachable fraction."""
    _, reach, dsum = _shortest_path_sums(g, jobs)
    return _closeness_from(reach, dsum, g.n)


@dataclass(frozen=True)
class EigenvectorResult:
    values: np.ndarray
    converged: bool
    iterations: int


def eigenvector_centrality_result(g: Graph, tol: float = 1e-8, max_iter: int = 1000) -> EigenvectorResult:
    if g.n == 0:
        raise ValueError("eigenvector centrality needs at least one node")
    if g.m == 0:
        return EigenvectorResult(np.zeros(g.n), True, 0)
    src = np.repeat(np.arange(g.n), g.degrees)
    x = np.full(g.n, 1.0 / np.sqrt(g.n))
    for it in range(1, max_iter + 1):
        ax = np.bincount(src, weights=x[g.indices], minlength=g.n)
        residual = np.abs(ax - (x @ ax) * x).max()
        # iterate on A + I: same eigenvectors, no oscillation on bipartite graphs
        y = x + ax
        y /= np.linalg.norm(y)
        change = np.abs(y - x).sum()
        # the step size alone can undershoot the residual by a factor of lambda
        if change < tol * g.n and residual < tol:
            return EigenvectorResult(x, True, it)
        x = y
    logger.warning("eigenvector centrality did not converge in %d iterations", max_iter)
    return EigenvectorResult(x, False, max_iter)


def eigenvector_centrality(g: Graph, tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Principal eigenvector of the adjacency matrix, unit L2 norm, nonnegative."""
    return eigenvector_centrality_result(g, tol, max_iter).values


def coreness(g: Graph) -> np.ndarray:
    return _kernels.core_numbers(g.indptr, g.indices)


def link_diversity(g: Graph, partition: Partition) -> np.ndarray:
    """Fraction of each node's neighbors assigned to a different community."""
    if len(partition) != g.n:
        raise ValueError(f"partition covers {len(partition)} nodes, graph has {g.n}")
    a = partition.assignment
    src = np.repeat(np.arange(g.n), g.degrees)
    cross = np.bincount(src, weights=(a[src] != a[g.indices]).astype(np.float64), minlength=g.n)
    deg = g.degrees.astype(np.float64)
    out = np.zeros(g.n)
    np.divide(cross, deg, out=out, where=deg > 0)
    return out


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]
    lightweight: bool

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]

    def to_csv(self, path: str | os.PathLike, node_ids: np.ndarray | None = None) -> None:
        """Write one row per node; ``node_ids`` defaults to ``0..n-1``."""
        ids = range(len(self)) if node_ids is None else [int(x) for x in node_ids]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", *self.feature_names])
            for u, row in zip(ids, self.values.tolist()):
                w.writerow([u, *(_fmt(v) for v in row)])


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:.10g}"


def extract_features(
    g: Graph,
    lightweight: bool = False,
    seed: int = 0,
    jobs: int = 1,
    resolution: float = 1.0,
) -> FeatureMatrix:
    """Compute every node feature for ``g`` (five columns when lightweight)."""
    names = feature_names(lightweight)
    if g.n == 0:
        return FeatureMatrix(np.zeros((0, len(names))), names, lightweight)
    cols = {
        "degree": degree_centrality(g),
        "clustering": local_clustering(g),
        "eigenvector": eigenvector_centrality(g),
        "coreness": coreness(g).astype(np.float64),
        "link_diversity": link_diversity(g, detect_communities(g, resolution, seed)),
    }
    if not lightweight:
        bc, reach, dsum = _shortest_path_sums(g, jobs)
        cols["betweenness"] = _normalize_betweenness(bc, g.n)
        cols["closeness"] = _closeness_from(reach, dsum, g.n)
    return FeatureMatrix(np.column_stack([cols[name] for name in names]), names, lightweight)
