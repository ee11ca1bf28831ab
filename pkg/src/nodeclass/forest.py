"""Random forest classifier (Gini splits, bootstrap resampling, vote-fraction scores)."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from nodeclass import _kernels

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LabeledNodeDataset:
    """Feature rows tagged with class id and origin network id."""

    features: np.ndarray
    labels: np.ndarray
    network_ids: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (self.features.shape[0] == self.labels.shape[0] == self.network_ids.shape[0]):
            raise ValueError("features, labels and network_ids must have equal row counts")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, mask: np.ndarray) -> "LabeledNodeDataset":
        return LabeledNodeDataset(self.features[mask], self.labels[mask], self.network_ids[mask], self.feature_names)

    def class_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.labels, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}


@dataclass(frozen=True)
class TrainConfig:
    num_trees: int = 100
    max_features: int | None = None  # None -> ceil(sqrt(d))
    min_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0

    def resolved_max_features(self, d: int) -> int:
        mf = self.max_features if self.max_features is not None else math.ceil(math.sqrt(d))
        if not 1 <= mf <= d:
            raise ValueError(f"max_features must be in 1..{d}, got {mf}")
        return mf

    def to_dict(self) -> dict:
        return {
            "num_trees": self.num_trees,
            "max_features": self.max_features,
            "min_leaf": self.min_leaf,
            "max_depth": self.max_depth,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    leaf_class: np.ndarray
    bootstrap_counts: np.ndarray | None = None

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        leaves = _kernels.tree_apply(self.feature, self.threshold, self.left, self.right, X)
        return self.leaf_class[leaves]

    def to_dict(self) -> dict:
        def node(i: int) -> dict:
            counts = [float(c) for c in self.counts[i]]
            if self.feature[i] < 0:
                return {"leaf": True, "counts": counts}
            return {
                "leaf": False,
                "feature": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "counts": counts,
                "left": node(int(self.left[i])),
                "right": node(int(self.right[i])),
            }

        return node(0)

    @classmethod
    def from_dict(cls, root: dict, num_classes: int) -> "Tree":
        feature, threshold, left, right, counts = [], [], [], [], []

        def visit(nd: dict) -> int:
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(nd["counts"])
            if not nd["leaf"]:
                feature[i] = int(nd["feature"])
                threshold[i] = float(nd["threshold"])
                left[i] = visit(nd["left"])
                right[i] = visit(nd["right"])
            return i

        import sys

        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 100_000))
        try:
            visit(root)
        finally:
            sys.setrecursionlimit(limit)
        c = np.asarray(counts, dtype=np.float64).reshape(-1, num_classes)
        leaf_class = np.argmax(c, axis=1).astype(np.int64)
        return cls(
            np.asarray(feature, dtype=np.int64),
            np.asarray(threshold, dtype=np.float64),
            np.asarray(left, dtype=np.int64),
            np.asarray(right, dtype=np.int64),
            c,
            leaf_class,
        )


@dataclass(frozen=True)
class ForestModel:
    trees: list[Tree]
    num_classes: int
    feature_names: tuple[str, ...]
    importances: np.ndarray
    config: TrainConfig = field(default_factory=TrainConfig)
    class_counts: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": "nodeclass-forest",
            "version": MODEL_FORMAT_VERSION,
            "num_classes": self.num_classes,
            "feature_names": list(self.feature_names),
            "importances": [float(x) for x in self.importances],
            "config": self.config.to_dict(),
            "class_counts": {str(k): v for k, v in self.class_counts.items()},
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestModel":
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        k = int(doc["num_classes"])
        return cls(
            [Tree.from_dict(t, k) for t in doc["trees"]],
            k,
            tuple(doc["feature_names"]),
            np.asarray(doc["importances"], dtype=np.float64),
            TrainConfig(**doc["config"]),
            {int(a): int(b) for a, b in doc.get("class_counts", {}).items()},
        )

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ForestModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _tree_seeds(seed: int, num_trees: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(num_trees)


def _fit_tree(X, y, num_classes, mf, cfg: TrainConfig, ss: np.random.SeedSequence) -> tuple[Tree, np.ndarray]:
    rng = np.random.default_rng(ss)
    n = X.shape[0]
    boot = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)
    kernel_seed = int(rng.integers(0, 2**31 - 1))
    max_depth = -1 if cfg.max_depth is None else int(cfg.max_depth)
    feat, thr, left, right, counts, leaf_class, imp = _kernels.build_tree(
        X, y, boot, num_classes, mf, cfg.min_leaf, max_depth, kernel_seed
    )
    return Tree(feat, thr, left, right, counts, leaf_class, boot), imp


def train_forest(data: LabeledNodeDataset, cfg: TrainConfig = TrainConfig(), jobs: int = 1) -> ForestModel:
    """Fit a random forest on ``data``.

    Importances are the per-tree normalized Gini decrease (weighted by the
    fraction of bootstrap rows reaching each split), averaged over trees.
    """
    X = np.ascontiguousarray(data.features, dtype=np.float64)
    y = np.ascontiguousarray(data.labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise ValueError("training data must contain at least two classes")
    if cfg.num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    num_classes = int(classes.max()) + 1
    d = X.shape[1]
    mf = cfg.resolved_max_features(d)
    seeds = _tree_seeds(cfg.seed, cfg.num_trees)

    def fit(ss):
        return _fit_tree(X, y, num_classes, mf, cfg, ss)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fitted = list(pool.map(fit, seeds))
    else:
        fitted = [fit(ss) for ss in seeds]

    trees = [t for t, _ in fitted]
    per_tree = [imp / imp.sum() for _, imp in fitted if imp.sum() > 0]
    importances = np.mean(per_tree, axis=0) if per_tree else np.zeros(d)
    if importances.sum() > 0:
        importances = importances / importances.sum()
    names = data.feature_names or tuple(f"f{i}" for i in range(d))
    return ForestModel(trees, num_classes, tuple(names), importances, cfg, data.class_counts())


def _check_rows(model: ForestModel, rows) -> np.ndarray:
    X = np.ascontiguousarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != len(model.feature_names):
        raise ValueError(f"expected {len(model.feature_names)} feature columns, got {X.shape[1]}")
    return X


def predict_proba(model: ForestModel, rows) -> np.ndarray:
    """Fraction of trees voting for each class (leaf majority, ties to the lower id)."""
    X = _check_rows(model, rows)
    votes = np.zeros((X.shape[0], model.num_classes))
    idx = np.arange(X.shape[0])
    for tree in model.trees:
        votes[idx, tree.predict(X)] += 1.0
    return votes / len(model.trees)


def predict_label(model: ForestModel, rows) -> np.ndarray:
    return np.argmax(predict_proba(model, rows), axis=1)


def feature_importances(model: ForestModel) -> dict[str, float]:
    """Importances as percentages, in feature order."""
    return {name: float(100.0 * v) for name, v in zip(model.feature_names, model.importances)}
