"""Grow real-looking networks from a seed by attachment plus classifier pruning."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from nodeclass.experiments import MODEL, REAL, derive_seed
from nodeclass.features import extract_features
from nodeclass.forest import ForestModel, LabeledNodeDataset, TrainConfig, predict_proba, train_forest
from nodeclass.graph import Graph, export_graph
from nodeclass.models import gen_configuration

logger = logging.getLogger(__name__)

ATTACHMENTS = ("VertexCopy", "TriadicClosure")
STALL_WINDOW = 20


@dataclass
class GrowthConfig:
    beta: float = 0.5
    attachment: str = "VertexCopy"
    growth_rate: float = 0.05
    score_threshold: float = 0.8
    max_iterations: int = 500
    target_n: int | None = None  # defaults to the original's node count
    max_trials: int | None = None  # defaults to 10 x target degree
    rescore_lightweight: bool = False
    seed: int = 0
    snapshot_every: int = 0
    snapshot_dir: str | None = None

    def __post_init__(self) -> None:
        if self.attachment not in ATTACHMENTS:
            raise ValueError(f"attachment must be one of {ATTACHMENTS}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.growth_rate <= 0:
            raise ValueError("growth_rate must be > 0")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GrowthRecord:
    iteration: int
    n_before: int
    added: int
    pruned: int
    n_after: int
    mean_score: float
    failed_attachments: int = 0


@dataclass
class GrowthTrace:
    records: list[GrowthRecord] = field(default_factory=list)
    status: str = "running"

    @property
    def sizes(self) -> list[int]:
        return [r.n_after for r in self.records]

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "n_before", "added", "pruned", "n_after", "mean_score"])
            for r in self.records:
                w.writerow([r.iteration, r.n_before, r.added, r.pruned, r.n_after, f"{r.mean_score:.10g}"])

    def to_dict(self) -> dict:
        return {"status": self.status, "records": [asdict(r) for r in self.records]}


# Attachment on adjacency sets. Both return the new node's friend set (empty
# when no friend could be found).


def _vertex_copy_friends(adj: list[set[int]], beta: float, max_trials: int | None, rng: np.random.Generator) -> set[int]:
    n = len(adj)
    candidates = [v for v in range(n) if adj[v]]
    if not candidates:
        return set()
    v = candidates[int(rng.integers(len(candidates)))]
    template = sorted(adj[v])
    k = len(template)
    trials = max_trials if max_trials is not None else 10 * k
    friends: set[int] = set()
    count = 0
    while len(friends) < k and count < trials:
        if rng.random() < beta:
            w = template[int(rng.integers(k))]
        else:
            w = int(rng.integers(n))
        friends.add(w)
        count += 1
    return friends


def _triadic_friends(
    adj: list[set[int]],
    beta: float,
    degree_pool: np.ndarray,
    original_n: int,
    max_trials: int | None,
    rng: np.random.Generator,
) -> set[int]:
    n = len(adj)
    if n == 0:
        return set()
    raw = float(degree_pool[int(rng.integers(degree_pool.shape[0]))]) * n / original_n
    k = max(1, min(int(math.floor(raw + 0.5)), n - 1)) if n > 1 else 1
    trials = max_trials if max_trials is not None else 10 * k
    friends: set[int] = set()
    order: list[int] = []
    count = 0
    while len(friends) < k and count < trials:
        count += 1
        if rng.random() < beta and order:
            v = order[int(rng.integers(len(order)))]
            if not adj[v]:
                continue
            nbrs = sorted(adj[v])
            w = nbrs[int(rng.integers(len(nbrs)))]
        else:
            w = int(rng.integers(n))
        if w not in friends:
            friends.add(w)
            order.append(w)
    return friends


def _to_graph(adj: Sequence[set[int]]) -> Graph:
    edges = [(u, v) for u, nb in enumerate(adj) for v in nb if u < v]
    return Graph.from_edges(len(adj), np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def _attach(adj: list[set[int]], friends: set[int]) -> None:
    u = len(adj)
    adj.append(set(friends))
    for w in friends:
        adj[w].add(u)


def vertex_copy_attach(g: Graph, beta: float, max_trials: int | None = None, seed: int = 0) -> Graph:
    """Add one node that copies links of a random template node.

    Each draw takes, with probability ``beta``, a random neighbor of the
    template and otherwise a random node. If no friend is found the graph is
    returned unchanged and a warning is logged.
    """
    if g.n < 2:
        raise ValueError("vertex copy needs at least two nodes")
    adj = g.adjacency_sets()
    friends = _vertex_copy_friends(adj, beta, max_trials, np.random.default_rng(seed))
    if not friends:
        logger.warning("vertex copy found no friends; attachment skipped")
        return g
    _attach(adj, friends)
    return _to_graph(adj)


def triadic_closure_attach(
    g: Graph,
    beta: float,
    degree_pool: Sequence[int],
    original_n: int,
    max_trials: int | None = None,
    seed: int = 0,
) -> Graph:
    """Add one node whose degree is a sampled original degree scaled by ``n / N``.

    Once the node has a friend, each draw closes a triangle with probability
    ``beta`` (a random neighbor of a random existing friend).
    """
    if g.n < 2:
        raise ValueError("triadic closure needs at least two nodes")
    pool = np.asarray(degree_pool)
    if pool.size == 0:
        raise ValueError("degree pool must be nonempty")
    adj = g.adjacency_sets()
    friends = _triadic_friends(adj, beta, pool, original_n, max_trials, np.random.default_rng(seed))
    if not friends:
        logger.warning("triadic closure found no friends; attachment skipped")
        return g
    _attach(adj, friends)
    return _to_graph(adj)


def train_growth_classifier(
    original: Graph,
    lightweight: bool = False,
    seed: int = 0,
    train_cfg: TrainConfig | None = None,
    jobs: int = 1,
) -> ForestModel:
    """Real (class 0) = every node of ``original``; model (class 1) = every node
    of one configuration-model twin with the same degree sequence."""
    twin = gen_configuration(original.degrees, derive_seed(seed, "twin"))
    fr = extract_features(original, lightweight, derive_seed(seed, "features", 0), jobs)
    ft = extract_features(twin, lightweight, derive_seed(seed, "features", 1), jobs)
    data = LabeledNodeDataset(
        np.vstack([fr.values, ft.values]),
        np.concatenate([np.full(len(fr), REAL), np.full(len(ft), MODEL)]).astype(np.int64),
        np.concatenate([np.zeros(len(fr)), np.ones(len(ft))]).astype(np.int64),
        fr.feature_names,
    )
    cfg = train_cfg or TrainConfig(seed=derive_seed(seed, "train"))
    return train_forest(data, cfg, jobs)


def grow_network(
    seed_graph: Graph,
    original: Graph,
    classifier: ForestModel,
    cfg: GrowthConfig,
    real_class: int = REAL,
    jobs: int = 1,
) -> tuple[Graph, GrowthTrace]:
    """Alternate attachment of ``ceil(n * growth_rate)`` nodes with pruning.

    After each batch every node is rescored on the grown graph and all nodes
    whose real-class score is below the threshold are removed at once.
    Stops at the target size, after ``max_iterations``, or when the size has
    not changed for 20 iterations.
    """
    if seed_graph.n == 0:
        raise ValueError("seed graph must be nonempty")
    expected = 5 if cfg.rescore_lightweight else 7
    if len(classifier.feature_names) != expected:
        raise ValueError(
            f"classifier uses {len(classifier.feature_names)} features but rescoring computes {expected}"
        )
    target = cfg.target_n if cfg.target_n is not None else original.n
    degree_pool = original.degrees
    rng = np.random.default_rng(derive_seed(cfg.seed, "growth"))
    adj = seed_graph.adjacency_sets()
    trace = GrowthTrace()
    unchanged = 0
    g = seed_graph
    snap_dir = Path(cfg.snapshot_dir) if cfg.snapshot_dir else None
    if cfg.snapshot_every and snap_dir is not None:
        snap_dir.mkdir(parents=True, exist_ok=True)

    for it in range(1, cfg.max_iterations + 1):
        n_before = len(adj)
        to_add = math.ceil(n_before * cfg.growth_rate)
        added = failed = 0
        for _ in range(to_add):
            if cfg.attachment == "VertexCopy":
                friends = _vertex_copy_friends(adj, cfg.beta, cfg.max_trials, rng)
            else:
                friends = _triadic_friends(adj, cfg.beta, degree_pool, original.n, cfg.max_trials, rng)
            if friends:
                _attach(adj, friends)
                added += 1
            else:
                failed += 1
        grown = _to_graph(adj)
        fm = extract_features(grown, cfg.rescore_lightweight, derive_seed(cfg.seed, "features", it), jobs)
        scores = predict_proba(classifier, fm.values)[:, real_class]
        keep = scores >= cfg.score_threshold
        kept = np.flatnonzero(keep)
        g = grown.subgraph(kept)
        assert np.all(scores[kept] >= cfg.score_threshold)
        adj = g.adjacency_sets()
        rec = GrowthRecord(
            it, n_before, added, int(grown.n - kept.shape[0]), g.n,
            float(scores.mean()) if scores.size else 0.0, failed,
        )
        assert rec.n_after == rec.n_before + rec.added - rec.pruned
        trace.records.append(rec)
        if failed:
            logger.debug("iteration %d: %d attachment(s) skipped", it, failed)
        if cfg.snapshot_every and snap_dir is not None and it % cfg.snapshot_every == 0:
            export_graph(g, snap_dir / f"iter_{it:04d}.edges")
        if g.n >= target:
            trace.status = "reached_target"
            break
        if g.n == 0:
            trace.status = "stalled"
            break
        unchanged = unchanged + 1 if g.n == n_before else 0
        if unchanged >= STALL_WINDOW:
            trace.status = "stalled"
            break
    else:
        trace.status = "max_iterations"
    return g, trace
