import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nodeclass.forest import (
    ForestModel,
    LabeledNodeDataset,
    TrainConfig,
    feature_importances,
    predict_label,
    predict_proba,
    train_forest,
)


def dataset(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.int64)
    return LabeledNodeDataset(X, y, np.zeros(len(y), dtype=np.int64), tuple(f"f{i}" for i in range(X.shape[1])))


def blobs(rng, n, d=3, sep=4.0, classes=2):
    y = rng.integers(0, classes, size=n)
    X = rng.normal(size=(n, d))
    X[:, 0] += sep * y
    return X, y


def test_separable_1d():
    x = np.concatenate([np.linspace(-5, -0.1, 50), np.linspace(0.1, 5, 50)])
    y = (x > 0).astype(int)
    model = train_forest(dataset(x, y), TrainConfig(num_trees=20, seed=1))
    assert np.mean(predict_label(model, x.reshape(-1, 1)) == y) == 1.0


def test_constant_column_has_zero_importance():
    rng = np.random.default_rng(0)
    X, y = blobs(rng, 300)
    X[:, 2] = 7.0
    model = train_forest(dataset(X, y), TrainConfig(num_trees=30, max_features=3, seed=2))
    imp = feature_importances(model)
    assert imp["f2"] == 0.0
    assert sum(imp.values()) == pytest.approx(100.0)
    assert np.all(model.importances >= 0)


def test_duplicate_column_shares_importance():
    rng = np.random.default_rng(1)
    n = 600
    y = rng.integers(0, 2, size=n)
    informative = y + rng.normal(scale=0.6, size=n)
    noise = rng.normal(size=(n, 2))
    control = np.column_stack([informative, noise])
    dup = np.column_stack([informative, informative, noise])
    cfg = TrainConfig(num_trees=100, seed=3)
    single = train_forest(dataset(control, y), cfg).importances[0]
    pair = train_forest(dataset(dup, y), cfg).importances[:2].sum()
    assert pair == pytest.approx(single, abs=0.1)


def test_blob_scores_and_accuracy():
    rng = np.random.default_rng(2)
    X, y = blobs(rng, 400)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=50, seed=4))
    deep0 = np.array([[-6.0, 0.0, 0.0]])
    assert predict_proba(model, deep0)[0, 0] >= 0.95
    Xt, yt = blobs(np.random.default_rng(3), 400)
    assert np.mean(predict_label(model, Xt) == yt) >= 0.98


def test_single_tree_is_one_hot_and_memorizes():
    rng = np.random.default_rng(4)
    X, y = blobs(rng, 100, sep=0.5)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=1, seed=5))
    p = predict_proba(model, X)
    assert set(np.unique(p)) <= {0.0, 1.0}
    # every row drawn into the bootstrap sits in a pure leaf (rows are distinct)
    inbag = model.trees[0].bootstrap_counts > 0
    assert np.all(p[inbag, y[inbag]] == 1.0)


def test_proba_rows_sum_to_one_multiclass():
    rng = np.random.default_rng(5)
    X, y = blobs(rng, 300, classes=3)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=25, seed=6))
    p = predict_proba(model, X)
    assert p.shape == (300, 3)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((p >= 0) & (p <= 1))


def test_tie_goes_to_lower_class():
    rng = np.random.default_rng(6)
    X, y = blobs(rng, 200)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=2, seed=0))
    p = predict_proba(model, X)
    labels = predict_label(model, X)
    tied = np.isclose(p[:, 0], 0.5)
    assert np.all(labels[tied] == 0)
    # identical rows with opposite labels make an unsplittable tied leaf
    m = train_forest(dataset([1.0, 1.0, 2.0, 2.0], [1, 0, 0, 1]), TrainConfig(num_trees=1, seed=0))
    counts = m.trees[0].counts[0]
    if counts[0] == counts[1]:
        assert predict_label(m, [[1.0]])[0] == 0


def test_errors():
    with pytest.raises(ValueError):
        train_forest(dataset([1.0, 2.0], [0, 0]))
    with pytest.raises(ValueError):
        train_forest(dataset(np.empty((0, 1)), []))
    with pytest.raises(ValueError):
        train_forest(dataset([1.0, np.nan], [0, 1]))
    model = train_forest(dataset([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1]), TrainConfig(num_trees=3))
    with pytest.raises(ValueError):
        predict_proba(model, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        TrainConfig(max_features=5).resolved_max_features(3)


def test_determinism_and_parallel_identity():
    rng = np.random.default_rng(7)
    X, y = blobs(rng, 300, sep=1.0)
    cfg = TrainConfig(num_trees=20, seed=11)
    a = train_forest(dataset(X, y), cfg, jobs=1)
    b = train_forest(dataset(X, y), cfg, jobs=4)
    assert np.array_equal(predict_proba(a, X), predict_proba(b, X))
    assert np.array_equal(a.importances, b.importances)
    assert a.to_dict() == b.to_dict()


def test_out_of_bag_fraction():
    rng = np.random.default_rng(8)
    X, y = blobs(rng, 2000)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=30, seed=9))
    for t in model.trees:
        oob = np.mean(t.bootstrap_counts == 0)
        assert abs(oob - np.exp(-1)) < 0.05
        assert t.bootstrap_counts.sum() == 2000


def test_leaf_counts_respect_min_leaf():
    rng = np.random.default_rng(9)
    X, y = blobs(rng, 300, sep=0.5)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=10, min_leaf=5, seed=1))
    for t in model.trees:
        leaves = t.feature < 0
        assert np.all(t.counts[leaves].sum(axis=1) >= 5)


def test_max_depth():
    rng = np.random.default_rng(10)
    X, y = blobs(rng, 300, sep=0.3)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=5, max_depth=1, seed=1))
    for t in model.trees:
        assert t.node_count <= 3


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    X, y = blobs(rng, 200, classes=3)
    model = train_forest(dataset(X, y), TrainConfig(num_trees=10, seed=2))
    model.save(tmp_path / "m.json")
    back = ForestModel.load(tmp_path / "m.json")
    assert back.feature_names == model.feature_names
    assert np.array_equal(predict_proba(back, X), predict_proba(model, X))
    doc = model.to_dict()
    assert doc["version"] == 1 and "trees" in doc
    doc["version"] = 99
    with pytest.raises(ValueError):
        ForestModel.from_dict(doc)


@given(st.integers(0, 2**31 - 1), st.sampled_from(["exp", "cube", "affine", "arctan"]))
def test_monotone_transform_invariance(seed, kind):
    rng = np.random.default_rng(seed)
    X, y = blobs(rng, 150, d=2, sep=1.5)
    X = np.round(X * 4)
    f = {"exp": np.exp, "cube": lambda v: v**3, "affine": lambda v: 3 * v + 1, "arctan": lambda v: np.arctan(v / 10)}[kind]
    col = int(rng.integers(2))
    X2 = X.copy()
    X2[:, col] = f(X[:, col])
    cfg = TrainConfig(num_trees=15, seed=seed)
    a = train_forest(dataset(X, y), cfg)
    b = train_forest(dataset(X2, y), cfg)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature)
        assert np.array_equal(ta.left, tb.left) and np.array_equal(ta.counts, tb.counts)
        # in-bag rows sit on a sample value at every node they visit, so no
        # midpoint can land differently after the transform
        inbag = ta.bootstrap_counts > 0
        assert np.array_equal(ta.predict(X[inbag]), tb.predict(X2[inbag]))
