"""Undirected simple graphs, file ingestion, ego networks and summary statistics."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from nodeclass import _kernels

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when an input file does not follow the expected graph format."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph in CSR form.

    Nodes are ``0..n-1``; ``indices[indptr[u]:indptr[u+1]]`` is the sorted
    neighbor list of ``u``. ``node_ids`` keeps the original identifier of each
    node when the graph was read from a file.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    node_ids: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        if self.node_ids is not None:
            self.node_ids.setflags(write=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence[int]] | np.ndarray,
        node_ids: np.ndarray | None = None,
    ) -> "Graph":
        """Build a graph on ``n`` nodes; self-loops and duplicate edges are dropped."""
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        arr = arr.reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(f"edge endpoint outside 0..{n - 1}")
        arr = arr[arr[:, 0] != arr[:, 1]]
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        keys = np.unique(lo * max(n, 1) + hi)
        lo, hi = keys // max(n, 1), keys % max(n, 1)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst.astype(np.int64), node_ids)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls.from_edges(n, np.empty((0, 2), dtype=np.int64))

    @property
    def m(self) -> int:
        return int(self.indices.shape[0] // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < nb.shape[0] and nb[i] == v)

    def edges(self) -> np.ndarray:
        """Return an ``(m, 2)`` array of edges with ``u < v``, sorted."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    def adjacency_sets(self) -> list[set[int]]:
        return [set(self.neighbors(u).tolist()) for u in range(self.n)]

    def subgraph(self, nodes: Sequence[int] | np.ndarray) -> "Graph":
        """Induced subgraph on ``nodes``, relabeled ``0..k-1`` in the given order."""
        nodes = np.asarray(nodes, dtype=np.int64)
        local = np.full(self.n, -1, dtype=np.int64)
        local[nodes] = np.arange(nodes.shape[0])
        e = self.edges()
        if e.shape[0]:
            keep = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)
            e = local[e[keep]]
        ids = None if self.node_ids is None else self.node_ids[nodes].copy()
        return Graph.from_edges(int(nodes.shape[0]), e, ids)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class GraphCollection:
    """Labeled collection of graphs, e.g. a TU benchmark dataset."""

    graphs: list[Graph]
    labels: np.ndarray
    origin_ids: list[str]
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not (len(self.graphs) == len(self.labels) == len(self.origin_ids)):
            raise ValueError("graphs, labels and origin_ids must have equal length")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def num_classes(self) -> int:
        return int(np.max(self.labels)) + 1 if len(self.labels) else 0


@dataclass(frozen=True)
class LoadSummary:
    lines: int
    edges: int
    dropped_self_loops: int
    dropped_duplicates: int

    @property
    def dropped(self) -> int:
        return self.dropped_self_loops + self.dropped_duplicates


def read_edge_list(path: str | os.PathLike, one_indexed: bool = False) -> tuple[Graph, LoadSummary]:
    """Parse a whitespace-separated edge list; see :func:`load_edge_list`."""
    path = Path(path)
    first_seen: dict[int, int] = {}
    src: list[int] = []
    dst: list[int] = []
    lines = 0
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphFormatError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            lines += 1
            for x in (u, v):
                if x not in first_seen:
                    first_seen[x] = len(first_seen)
            src.append(first_seen[u])
            dst.append(first_seen[v])
    if lines == 0:
        raise GraphFormatError(f"{path}: no edges found")
    n = len(first_seen)
    a = np.asarray(src, dtype=np.int64)
    b = np.asarray(dst, dtype=np.int64)
    loops = int(np.count_nonzero(a == b))
    ids = np.fromiter(first_seen.keys(), dtype=np.int64, count=n)
    if one_indexed:
        ids = ids - 1
    g = Graph.from_edges(n, np.column_stack([a, b]), ids)
    summary = LoadSummary(lines, g.m, loops, lines - loops - g.m)
    if summary.dropped:
        logger.warning(
            "%s: dropped %d self-loop(s) and %d duplicate edge record(s)",
            path, summary.dropped_self_loops, summary.dropped_duplicates,
        )
    return g, summary


def load_edge_list(path: str | os.PathLike, one_indexed: bool = False) -> Graph:
    """Load an edge list, relabeling nodes to ``0..n-1`` by first appearance.

    Lines starting with ``#`` are comments. Self-loops and repeated edges are
    dropped with a warning. ``one_indexed`` only affects the recorded
    original ids (``node_ids``), which are shifted to zero-based.
    """
    return read_edge_list(path, one_indexed)[0]


def _read_int_column(path: Path) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(path)
    vals = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                vals.append(int(line.split(",")[0]))
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: expected an integer, got {line!r}") from None
    return np.asarray(vals, dtype=np.int64)


def load_tu_dataset(directory: str | os.PathLike, name: str) -> GraphCollection:
    """Load a TU-format benchmark dataset (``<name>_A.txt`` and friends).

    Each graph's nodes are relabeled ``0..k-1`` following the global node order.
    Labels are mapped to ``0..C-1`` in sorted order of the original labels.
    Files are looked up in ``directory`` and then in ``directory/<name>``.
    """
    directory = Path(directory)
    if not (directory / f"{name}_A.txt").exists() and (directory / name / f"{name}_A.txt").exists():
        directory = directory / name
    a_path = directory / f"{name}_A.txt"
    indicator = _read_int_column(directory / f"{name}_graph_indicator.txt")
    raw_labels = _read_int_column(directory / f"{name}_graph_labels.txt")
    if not a_path.exists():
        raise FileNotFoundError(a_path)
    pairs = []
    with a_path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise GraphFormatError(f"{a_path}:{lineno}: expected 'u, v', got {line!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    edges = np.asarray(pairs, dtype=np.int64).reshape(-1, 2) - 1

    num_graphs = raw_labels.shape[0]
    gid = indicator - 1
    if gid.size and (gid.min() < 0 or gid.max() >= num_graphs):
        raise GraphFormatError(f"{name}: graph indicator outside 1..{num_graphs}")
    if edges.size and (edges.min() < 0 or edges.max() >= indicator.shape[0]):
        raise GraphFormatError(f"{name}: edge endpoint outside 1..{indicator.shape[0]}")
    crossing = gid[edges[:, 0]] != gid[edges[:, 1]]
    if np.any(crossing):
        bad = int(np.flatnonzero(crossing)[0])
        raise GraphFormatError(f"{a_path}:{bad + 1}: edge joins nodes of two different graphs")

    sizes = np.bincount(gid, minlength=num_graphs)
    order = np.argsort(gid, kind="stable")
    local = np.empty_like(gid)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    local[order] = np.arange(gid.shape[0]) - np.repeat(starts, sizes)
    edge_gid = gid[edges[:, 0]]
    edge_order = np.argsort(edge_gid, kind="stable")
    edge_counts = np.bincount(edge_gid, minlength=num_graphs)
    edge_starts = np.concatenate([[0], np.cumsum(edge_counts)])

    graphs = []
    for i in range(num_graphs):
        e = edges[edge_order[edge_starts[i] : edge_starts[i + 1]]]
        node_ids = order[starts[i] : starts[i] + sizes[i]]
        graphs.append(Graph.from_edges(int(sizes[i]), local[e], node_ids.astype(np.int64)))

    uniq = np.unique(raw_labels)
    labels = np.searchsorted(uniq, raw_labels)
    origin_ids = [f"{name}:{i + 1}" for i in range(num_graphs)]
    return GraphCollection(graphs, labels.astype(np.int64), origin_ids, [str(x) for x in uniq])


def ego_network(g: Graph, ego: int) -> Graph:
    """Induced subgraph on the neighbors of ``ego``, with the ego itself removed."""
    if not 0 <= ego < g.n:
        raise IndexError(f"ego {ego} not in graph with {g.n} nodes")
    return g.subgraph(g.neighbors(ego))


def connected_components(g: Graph) -> np.ndarray:
    """Component label per node, numbered by smallest member."""
    return _kernels.component_labels(g.indptr, g.indices)


@dataclass(frozen=True)
class GraphStats:
    n: int
    m: int
    avg_degree: float
    density: float
    transitivity: float
    diameter: int
    connected: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "avg_degree": self.avg_degree,
            "density": self.density,
            "transitivity": self.transitivity,
            "diameter": self.diameter,
            "connected": self.connected,
        }


def transitivity(g: Graph) -> float:
    tri = _kernels.triangles_per_node(g.indptr, g.indices)
    deg = g.degrees.astype(np.float64)
    triples = float(np.sum(deg * (deg - 1) / 2))
    if triples == 0:
        return 0.0
    return float(np.sum(tri)) / triples


def graph_stats(g: Graph) -> GraphStats:
    """Table-style summary statistics.

    For a disconnected graph the diameter is that of the largest component
    and ``connected`` is False.
    """
    if g.n == 0:
        raise ValueError("graph_stats needs at least one node")
    n, m = g.n, g.m
    density = 2.0 * m / (n * (n - 1)) if n > 1 else 0.0
    comp = connected_components(g)
    sizes = np.bincount(comp)
    connected = sizes.shape[0] == 1
    if connected:
        nodes = np.arange(n)
        sub = g
    else:
        nodes = np.flatnonzero(comp == int(np.argmax(sizes)))
        sub = g.subgraph(nodes)
        logger.warning("graph is disconnected; diameter reported for the largest component (%d nodes)", nodes.size)
    diameter = int(_kernels.max_eccentricity(sub.indptr, sub.indices))
    return GraphStats(n, m, 2.0 * m / n, density, transitivity(g), diameter, connected)


def export_graph(
    g: Graph,
    path: str | os.PathLike,
    scores: Sequence[float] | np.ndarray | None = None,
) -> tuple[Path, Path | None]:
    """Write ``g`` as an edge list and, when scores are given, ``<path>.scores.csv``.

    Returns the paths written. The edge list uses the dense node ids.
    """
    path = Path(path)
    if scores is not None and len(scores) == 0:
        scores = None
    if scores is not None and len(scores) != g.n:
        raise ValueError(f"expected {g.n} scores, got {len(scores)}")
    edges = g.edges()
    with path.open("w") as fh:
        fh.write(f"# nodes {g.n} edges {g.m}\n")
        for u, v in edges.tolist():
            fh.write(f"{u} {v}\n")
    score_path = None
    if scores is not None:
        score_path = path.with_name(path.name + ".scores.csv")
        with score_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "score"])
            for u, s in enumerate(scores):
                w.writerow([u, f"{float(s):.10g}"])
    return path, score_path
