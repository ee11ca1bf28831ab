"""Cross-validation experiments built on node-level classification.

Every random choice is driven by a seed derived from one master seed, so any
fold of any repeat can be rerun on its own.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from nodeclass import __version__
from nodeclass.features import FeatureMatrix, extract_features, feature_names, local_clustering
from nodeclass.forest import (
    ForestModel,
    LabeledNodeDataset,
    TrainConfig,
    predict_label,
    predict_proba,
    train_forest,
)
from nodeclass.graph import Graph, GraphCollection, ego_network, transitivity
from nodeclass.models import GenerationError, ModelSpec, generate, matched_spec
from nodeclass import _kernels

logger = logging.getLogger(__name__)

MODES = ("node_cv", "network_cv", "real_vs_model", "whole_network", "baseline")


def derive_seed(master: int, *path: int | str) -> int:
    """Independent 63-bit seed for the stream named by ``path``."""
    key = [int.from_bytes(p.encode(), "little") if isinstance(p, str) else int(p) for p in path]
    lo, hi = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(key)).generate_state(2)
    return (int(lo) | (int(hi) << 32)) >> 1


@dataclass
class ExperimentConfig:
    mode: str = "network_cv"
    folds: int = 10
    repeats: int = 10
    lightweight: bool = False
    sample_fraction: float = 1.0
    score_threshold: float = 0.5
    model_spec: ModelSpec | None = None
    seed: int = 0
    num_trees: int = 100
    max_features: int | None = None
    min_leaf: int = 1
    max_depth: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ValueError("sample_fraction must be in (0, 1]")
        if isinstance(self.model_spec, dict):
            self.model_spec = ModelSpec.from_dict(self.model_spec)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.num_trees, self.max_features, self.min_leaf, self.max_depth, seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model_spec"] = self.model_spec.to_dict() if self.model_spec else None
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(**doc)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class FoldResult:
    repeat: int
    fold: int
    accuracy: float
    train_seed: int
    importances: np.ndarray


@dataclass
class CvReport:
    """Accuracies (percent) over ``folds x repeats`` plus averaged importances."""

    per_fold: list[FoldResult]
    feature_names: tuple[str, ...]
    config: ExperimentConfig
    unit: str = "node"
    extra: dict = field(default_factory=dict)
    node_scores: list[tuple] = field(default_factory=list)

    @property
    def per_fold_accuracies(self) -> list[float]:
        return [f.accuracy for f in self.per_fold]

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.per_fold_accuracies))

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.per_fold_accuracies))

    @property
    def feature_importance_mean(self) -> dict[str, float]:
        imp = np.array([f.importances for f in self.per_fold])
        return {n: float(v) for n, v in zip(self.feature_names, 100.0 * imp.mean(axis=0))}

    @property
    def feature_importance_std(self) -> dict[str, float]:
        imp = np.array([f.importances for f in self.per_fold])
        return {n: float(v) for n, v in zip(self.feature_names, 100.0 * imp.std(axis=0))}

    @property
    def top_feature(self) -> str:
        imp = self.feature_importance_mean
        return max(imp, key=imp.get)

    def to_dict(self) -> dict:
        return {
            "toolkit_version": __version__,
            "unit": self.unit,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "per_fold": [
                {"repeat": f.repeat, "fold": f.fold, "accuracy": f.accuracy, "train_seed": f.train_seed}
                for f in self.per_fold
            ],
            "feature_importance_mean": self.feature_importance_mean,
            "feature_importance_std": self.feature_importance_std,
            "config": self.config.to_dict(),
            "extra": self.extra,
        }

    def write(self, out_dir: str | os.PathLike) -> list[Path]:
        """Write report.json, folds.csv, importances.csv and (if any) node_scores.csv."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.json", out / "folds.csv", out / "importances.csv"]
        with open(written[0], "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(written[1], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fold", "repeat", "accuracy"])
            for f in self.per_fold:
                w.writerow([f.fold, f.repeat, f"{f.accuracy:.10g}"])
        mean, std = self.feature_importance_mean, self.feature_importance_std
        with open(written[2], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", "importance_mean", "importance_std"])
            for name in self.feature_names:
                w.writerow([name, f"{mean[name]:.10g}", f"{std[name]:.10g}"])
        if self.node_scores:
            path = out / "node_scores.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["repeat", "fold", "network", "node_id", "true_label", "score"])
                for row in self.node_scores:
                    w.writerow([*row[:5], f"{row[5]:.10g}"])
            written.append(path)
        return written


def stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per unit; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels)
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        assignment[idx] = (np.arange(idx.shape[0]) + offset) % folds
        offset += idx.shape[0]
    return assignment


def compute_features(
    graphs: Sequence[Graph], lightweight: bool, seeds: Sequence[int], jobs: int = 1
) -> list[FeatureMatrix]:
    def run(i: int) -> FeatureMatrix:
        return extract_features(graphs[i], lightweight, seeds[i])

    if jobs > 1 and len(graphs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, range(len(graphs))))
    return [run(i) for i in range(len(graphs))]


def build_node_dataset(
    items: Sequence[tuple[Graph, int, int]], lightweight: bool = False, seed: int = 0, jobs: int = 1
) -> LabeledNodeDataset:
    """Stack the feature rows of every graph, tagged with (label, network id)."""
    graphs = [g for g, _, _ in items]
    seeds = [derive_seed(seed, "features", i) for i in range(len(items))]
    fms = compute_features(graphs, lightweight, seeds, jobs)
    return _stack(fms, [lab for _, lab, _ in items], [nid for _, _, nid in items], lightweight)


def _stack(fms, labels, network_ids, lightweight) -> LabeledNodeDataset:
    for fm, nid in zip(fms, network_ids):
        if len(fm) == 0:
            logger.warning("network %s has no nodes and contributes no rows", nid)
    names = feature_names(lightweight)
    X = np.vstack([fm.values for fm in fms]) if fms else np.zeros((0, len(names)))
    y = np.concatenate([np.full(len(fm), lab, dtype=np.int64) for fm, lab in zip(fms, labels)])
    nets = np.concatenate([np.full(len(fm), nid, dtype=np.int64) for fm, nid in zip(fms, network_ids)])
    return LabeledNodeDataset(X, y, nets, names)


def _pooled_accuracy(model: ForestModel, data: LabeledNodeDataset) -> float:
    return 100.0 * float(np.mean(predict_label(model, data.features) == data.labels))


def kfold_node_cv(graphs: Sequence[Graph], cfg: ExperimentConfig, jobs: int = 1) -> CvReport:
    """Classify nodes by the graph they came from; folds partition nodes.

    Graph ``i`` is class ``i``.
    """
    for i, g in enumerate(graphs):
        if g.n < cfg.folds:
            raise ValueError(f"graph {i} has {g.n} nodes, fewer than {cfg.folds} folds")
    if len(graphs) < 2:
        raise ValueError("need at least two graphs")
    data = build_node_dataset([(g, i, i) for i, g in enumerate(graphs)], cfg.lightweight, cfg.seed, jobs)
    results = []
    for r in range(cfg.repeats):
        assign = stratified_folds(data.labels, cfg.folds, np.random.default_rng(derive_seed(cfg.seed, "folds", r)))
        for f in range(cfg.folds):
            tseed = derive_seed(cfg.seed, "train", r, f)
            model = train_forest(data.subset(assign != f), cfg.train_config(tseed), jobs)
            acc = _pooled_accuracy(model, data.subset(assign == f))
            results.append(FoldResult(r, f, acc, tseed, model.importances))
    return CvReport(results, data.feature_names, cfg, "node", {"class_counts": data.class_counts()})


@dataclass
class _NetworkFold:
    repeat: int
    fold: int
    train_seed: int
    model: ForestModel
    test_networks: np.ndarray


class _NetworkData:
    def __init__(self, fms: list[FeatureMatrix], labels: np.ndarray, lightweight: bool):
        self.fms = fms
        self.labels = np.asarray(labels, dtype=np.int64)
        self.data = _stack(fms, self.labels.tolist(), list(range(len(fms))), lightweight)
        sizes = np.array([len(fm) for fm in fms], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])

    def rows(self, nets: np.ndarray) -> np.ndarray:
        return np.isin(self.data.network_ids, nets)

    def network_rows(self, i: int) -> np.ndarray:
        return self.data.features[self.offsets[i] : self.offsets[i + 1]]


def _check_class_sizes(labels: np.ndarray, folds: int) -> None:
    ids, counts = np.unique(labels, return_counts=True)
    if ids.shape[0] < 2:
        raise ValueError("need at least two classes")
    small = [int(c) for c, k in zip(ids, counts) if k < folds]
    if small:
        raise ValueError(f"class(es) {small} have fewer than {folds} graphs")


def _network_folds(nd: _NetworkData, cfg: ExperimentConfig, repeats: Sequence[int], jobs: int) -> Iterator[_NetworkFold]:
    for r in repeats:
        rng = np.random.default_rng(derive_seed(cfg.seed, "folds", r))
        assign = stratified_folds(nd.labels, cfg.folds, rng)
        for f in range(cfg.folds):
            tseed = derive_seed(cfg.seed, "train", r, f)
            train_nets = np.flatnonzero(assign != f)
            model = train_forest(nd.data.subset(nd.rows(train_nets)), cfg.train_config(tseed), jobs)
            yield _NetworkFold(r, f, tseed, model, np.flatnonzero(assign == f))


def _collection_features(collection: GraphCollection, cfg: ExperimentConfig, jobs: int) -> _NetworkData:
    seeds = [derive_seed(cfg.seed, "features", i) for i in range(len(collection))]
    fms = compute_features(collection.graphs, cfg.lightweight, seeds, jobs)
    return _NetworkData(fms, collection.labels, cfg.lightweight)


def kfold_network_cv(
    collection: GraphCollection, cfg: ExperimentConfig, jobs: int = 1, keep_scores: bool = False
) -> CvReport:
    """Folds partition networks; accuracy pools every node of the test networks."""
    _check_class_sizes(collection.labels, cfg.folds)
    nd = _collection_features(collection, cfg, jobs)
    results, scores = [], []
    for nf in _network_folds(nd, cfg, range(cfg.repeats), jobs):
        test = nd.data.subset(nd.rows(nf.test_networks))
        proba = predict_proba(nf.model, test.features)
        acc = 100.0 * float(np.mean(np.argmax(proba, axis=1) == test.labels))
        results.append(FoldResult(nf.repeat, nf.fold, acc, nf.train_seed, nf.model.importances))
        if keep_scores:
            scores.extend(_score_rows(nd, nf, proba))
    extra = {"class_counts": nd.data.class_counts(), "num_networks": len(collection)}
    return CvReport(results, nd.data.feature_names, cfg, "node", extra, scores)


def _score_rows(nd: _NetworkData, nf: _NetworkFold, proba: np.ndarray) -> list[tuple]:
    rows, k = [], 0
    for net in nf.test_networks.tolist():
        label = int(nd.labels[net])
        for u in range(len(nd.fms[net])):
            rows.append((nf.repeat, nf.fold, net, u, label, float(proba[k, label])))
            k += 1
    return rows


def sample_size(n: int, p: float) -> int:
    return max(1, math.ceil(p * n))


def network_score(model: ForestModel, rows: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Mean class probabilities over a uniform sample of ``ceil(p n)`` nodes."""
    n = rows.shape[0]
    pick = rng.choice(n, size=min(n, sample_size(n, p)), replace=False)
    return predict_proba(model, rows[np.sort(pick)]).mean(axis=0)


def whole_network_classify(
    collection: GraphCollection,
    cfg: ExperimentConfig,
    jobs: int = 1,
    p_values: Sequence[float] | None = None,
) -> CvReport:
    """Label each test network by the argmax of its sampled mean node score.

    Training is identical to :func:`kfold_network_cv`. Several sample
    fractions can be scored against the same trained models via ``p_values``;
    the headline accuracy uses ``cfg.sample_fraction``.
    """
    p_list = sorted({float(cfg.sample_fraction), *(float(p) for p in (p_values or []))})
    for p in p_list:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"sample fraction {p} outside (0, 1]")
    _check_class_sizes(collection.labels, cfg.folds)
    nd = _collection_features(collection, cfg, jobs)
    results = []
    by_p: dict[float, list[float]] = {p: [] for p in p_list}
    node_acc = []
    empty = set()
    for nf in _network_folds(nd, cfg, range(cfg.repeats), jobs):
        correct = {p: 0 for p in p_list}
        for net in nf.test_networks.tolist():
            rows = nd.network_rows(net)
            if rows.shape[0] == 0:
                empty.add(net)
                continue
            for p in p_list:
                stream = derive_seed(cfg.seed, "sample", nf.repeat, nf.fold, net, round(p * 1_000_000))
                rng = np.random.default_rng(stream)
                if int(np.argmax(network_score(nf.model, rows, p, rng))) == nd.labels[net]:
                    correct[p] += 1
        total = nf.test_networks.shape[0]
        for p in p_list:
            by_p[p].append(100.0 * correct[p] / total)
        test = nd.data.subset(nd.rows(nf.test_networks))
        node_acc.append(_pooled_accuracy(nf.model, test))
        results.append(FoldResult(nf.repeat, nf.fold, by_p[cfg.sample_fraction][-1], nf.train_seed, nf.model.importances))
    if empty:
        logger.warning("%d empty network(s) counted as misclassified", len(empty))
    extra = {
        "accuracy_by_p": {f"{p:g}": {"mean": float(np.mean(v)), "std": float(np.std(v))} for p, v in by_p.items()},
        "per_fold_by_p": {f"{p:g}": v for p, v in by_p.items()},
        "node_accuracy_mean": float(np.mean(node_acc)),
        "empty_networks": sorted(empty),
        "num_networks": len(collection),
    }
    return CvReport(results, nd.data.feature_names, cfg, "network", extra)


REAL, MODEL = 0, 1


def sample_ego_networks(g: Graph, count: int, min_nodes: int = 100, seed: int = 0) -> list[Graph]:
    """Ego networks of ``count`` distinct egos drawn uniformly among nodes with
    at least ``min_nodes`` neighbors (an ego network has one node per neighbor).

    Returns fewer networks, with a warning, when too few nodes qualify.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    eligible = np.flatnonzero(g.degrees >= min_nodes)
    if eligible.size == 0:
        raise ValueError(f"no node has degree >= {min_nodes}")
    if eligible.size < count:
        logger.warning("only %d egos have >= %d neighbors; using all of them", eligible.size, min_nodes)
    rng = np.random.default_rng(seed)
    egos = np.sort(rng.choice(eligible, size=min(count, eligible.size), replace=False))
    return [ego_network(g, int(u)) for u in egos]


def real_vs_model_experiment(
    reals: Sequence[Graph], kind: str, cfg: ExperimentConfig, jobs: int = 1
) -> CvReport:
    """Real graphs (class 0) against freshly generated matched model graphs (class 1).

    Each repeat draws new model graphs and new network-level folds. The
    report's ``node_scores`` hold each test node's probability of its own
    class.
    """
    if not reals:
        raise ValueError("need at least one real graph")
    base = cfg.model_spec
    real_seeds = [derive_seed(cfg.seed, "features", i) for i in range(len(reals))]
    real_fms = compute_features(reals, cfg.lightweight, real_seeds, jobs)
    results, scores, realized, skipped = [], [], [], []
    for r in range(cfg.repeats):
        models, kept = [], []
        for i, g in enumerate(reals):
            gseed = derive_seed(cfg.seed, "model", r, i)
            spec = matched_spec(
                kind, g, gseed,
                base.ws_rewire_p if base else 0.1,
                base.hk_triangle_p if base else 1.0,
            )
            try:
                models.append(generate(spec))
                kept.append(i)
            except (GenerationError, ValueError) as exc:
                logger.warning("repeat %d: model for real graph %d skipped: %s", r, i, exc)
                skipped.append({"repeat": r, "real": i, "error": str(exc)})
        realized.append([m.m for m in models])
        mseeds = [derive_seed(cfg.seed, "model-features", r, i) for i in kept]
        model_fms = compute_features(models, cfg.lightweight, mseeds, jobs)
        labels = np.array([REAL] * len(reals) + [MODEL] * len(models))
        _check_class_sizes(labels, cfg.folds)
        nd = _NetworkData(real_fms + model_fms, labels, cfg.lightweight)
        for nf in _network_folds(nd, cfg, [r], jobs):
            test = nd.data.subset(nd.rows(nf.test_networks))
            proba = predict_proba(nf.model, test.features)
            acc = 100.0 * float(np.mean(np.argmax(proba, axis=1) == test.labels))
            results.append(FoldResult(r, nf.fold, acc, nf.train_seed, nf.model.importances))
            scores.extend(_score_rows(nd, nf, proba))
    extra = {
        "model_kind": kind,
        "real_m": [g.m for g in reals],
        "realized_model_m": realized,
        "skipped": skipped,
    }
    return CvReport(results, feature_names(cfg.lightweight), cfg, "node", extra, scores)


BASELINE_FEATURES = (
    "avg_degree",
    "triangles",
    "avg_clustering",
    "degree_assortativity",
    "density",
    "transitivity",
)


def degree_assortativity(g: Graph) -> float | None:
    """Pearson correlation of degrees across edge ends; None when undefined."""
    if g.m == 0:
        return None
    deg = g.degrees.astype(np.float64)
    src = np.repeat(np.arange(g.n), g.degrees)
    a, b = deg[src], deg[g.indices]
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return None
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def network_feature_row(g: Graph) -> tuple[np.ndarray, bool]:
    """Whole-network baseline features; the flag is True when assortativity was undefined."""
    n, m = g.n, g.m
    tri = int(_kernels.triangles_per_node(g.indptr, g.indices).sum() // 3) if n else 0
    assort = degree_assortativity(g) if n else None
    row = np.array([
        2.0 * m / n if n else 0.0,
        float(tri),
        float(local_clustering(g).mean()) if n else 0.0,
        assort if assort is not None else 0.0,
        2.0 * m / (n * (n - 1)) if n > 1 else 0.0,
        transitivity(g) if n else 0.0,
    ])
    return row, assort is None


def feature_based_baseline(collection: GraphCollection, cfg: ExperimentConfig, jobs: int = 1) -> CvReport:
    """One row of global statistics per network, random forest over network folds."""
    _check_class_sizes(collection.labels, cfg.folds)
    rows, flagged = [], []
    for i, g in enumerate(collection.graphs):
        row, flag = network_feature_row(g)
        rows.append(row)
        if flag:
            flagged.append(i)
    if flagged:
        logger.warning("degree assortativity undefined for %d network(s); set to 0", len(flagged))
    X = np.vstack(rows)
    y = np.asarray(collection.labels, dtype=np.int64)
    data = LabeledNodeDataset(X, y, np.arange(len(collection)), BASELINE_FEATURES)
    results = []
    for r in range(cfg.repeats):
        assign = stratified_folds(y, cfg.folds, np.random.default_rng(derive_seed(cfg.seed, "folds", r)))
        for f in range(cfg.folds):
            tseed = derive_seed(cfg.seed, "train", r, f)
            model = train_forest(data.subset(assign != f), cfg.train_config(tseed), jobs)
            acc = _pooled_accuracy(model, data.subset(assign == f))
            results.append(FoldResult(r, f, acc, tseed, model.importances))
    extra = {"assortativity_flagged": flagged, "num_networks": len(collection)}
    return CvReport(results, BASELINE_FEATURES, cfg, "network", extra)
