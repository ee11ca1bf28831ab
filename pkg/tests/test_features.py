import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import complete, make_graph, path, random_graph, star, two_triangles_bridge
from nodeclass.community import Partition
from nodeclass.features import (
    FEATURE_NAMES,
    betweenness,
    closeness,
    coreness,
    degree_centrality,
    eigenvector_centrality,
    eigenvector_centrality_result,
    extract_features,
    link_diversity,
    local_clustering,
)
from nodeclass.graph import Graph


def small_random_graphs(count, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, 9))
        yield random_graph(rng, n, float(rng.uniform(0.1, 0.9)))


def test_degree_centrality_examples():
    assert np.allclose(degree_centrality(complete(3)), [2 / 3] * 3)
    assert np.allclose(degree_centrality(star(3)), [3 / 4, 1 / 4, 1 / 4, 1 / 4])
    assert np.allclose(degree_centrality(path(3)), [1 / 3, 2 / 3, 1 / 3])


def test_clustering_examples():
    assert np.allclose(local_clustering(complete(4)), 1.0)
    assert local_clustering(path(3))[1] == 0.0
    paw = make_graph(4, [(0, 1), (1, 2), (0, 2), (0, 3)])
    assert local_clustering(paw)[0] == pytest.approx(1 / 3)


def test_betweenness_examples():
    assert np.allclose(betweenness(path(3)), [0.0, 1.0, 0.0])
    assert np.allclose(betweenness(complete(6)), 0.0)
    assert np.allclose(betweenness(make_graph(2, [(0, 1)])), 0.0)


def test_closeness_examples():
    assert closeness(star(3))[0] == pytest.approx(1.0)
    assert closeness(path(3))[0] == pytest.approx(2 / 3)
    assert np.allclose(closeness(make_graph(4, [(0, 1), (2, 3)])), 1 / 3)
    assert closeness(Graph.empty(3)).tolist() == [0.0, 0.0, 0.0]


def test_eigenvector_examples():
    assert np.allclose(eigenvector_centrality(complete(3)), 1 / math.sqrt(3))
    x = eigenvector_centrality(path(3))
    assert x[1] / x[0] == pytest.approx(math.sqrt(2), rel=1e-7)
    # frozen from the closed form (1/2, 1/sqrt2, 1/2)
    assert np.allclose(x, [0.5, 0.7071067811865476, 0.5], atol=1e-8)
    for k in (3, 4, 6):
        s = eigenvector_centrality(star(k))
        assert np.allclose(s[1:], s[1])
        assert s[0] / s[1] == pytest.approx(math.sqrt(k), rel=1e-7)


def test_eigenvector_edgeless_and_nonnegative():
    assert eigenvector_centrality(Graph.empty(3)).tolist() == [0.0, 0.0, 0.0]
    x = eigenvector_centrality(make_graph(5, [(0, 1), (1, 2), (3, 4)]))
    assert np.all(x >= 0) and np.linalg.norm(x) == pytest.approx(1.0)
    # dominant component carries the vector, the other decays
    assert x[3] < 1e-3 and x[1] > 0.5


def test_eigenvector_nonconvergence_is_flagged(caplog):
    res = eigenvector_centrality_result(path(30), tol=1e-15, max_iter=3)
    assert not res.converged and res.iterations == 3
    assert "did not converge" in caplog.text


def test_coreness_examples():
    assert coreness(complete(4)).tolist() == [3, 3, 3, 3]
    assert coreness(star(3)).tolist() == [1, 1, 1, 1]
    k4p = make_graph(5, [(i, j) for i in range(4) for j in range(i + 1, 4)] + [(0, 4)])
    assert coreness(k4p).tolist() == [3, 3, 3, 3, 1]


def test_link_diversity_examples():
    g = two_triangles_bridge()
    assert np.allclose(link_diversity(g, Partition.from_labels([0] * 6)), 0.0)
    assert link_diversity(make_graph(2, [(0, 1)]), Partition.from_labels([0, 1])).tolist() == [1.0, 1.0]
    ld = link_diversity(g, Partition.from_labels([0, 0, 0, 1, 1, 1]))
    assert np.allclose(ld, [0, 0, 1 / 3, 1 / 3, 0, 0])
    with pytest.raises(ValueError):
        link_diversity(g, Partition.from_labels([0, 1]))


def test_extract_features_shapes():
    fm = extract_features(complete(3))
    assert fm.values.shape == (3, 7) and fm.feature_names == FEATURE_NAMES
    assert np.allclose(fm.column("clustering"), 1.0)
    lw = extract_features(complete(3), lightweight=True)
    assert lw.values.shape == (3, 5)
    assert "betweenness" not in lw.feature_names and "closeness" not in lw.feature_names
    assert np.all(extract_features(Graph.empty(2)).values == 0)


def test_feature_csv(tmp_path):
    fm = extract_features(path(3), lightweight=True)
    fm.to_csv(tmp_path / "f.csv", node_ids=np.array([10, 11, 12]))
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[0] == "node_id,degree,clustering,eigenvector,coreness,link_diversity"
    assert rows[1].startswith("10,0.3333333333,0,")


def test_oracle_suite_small_graphs():
    count = 0
    for g in small_random_graphs(250):
        np.testing.assert_allclose(betweenness(g), oracles.betweenness(g), atol=1e-12)
        np.testing.assert_allclose(closeness(g), oracles.closeness(g), atol=1e-12)
        assert coreness(g).tolist() == oracles.coreness(g).tolist()
        np.testing.assert_allclose(local_clustering(g), oracles.clustering(g), atol=1e-12)
        count += 1
    assert count >= 200


def _connected_random(rng, n, p):
    while True:
        g = random_graph(rng, n, p)
        if g.m and oracles.all_pairs_distances(g)[0].count(math.inf) == 0:
            return g


def test_eigenvector_residual_connected():
    rng = np.random.default_rng(3)
    tol = 1e-8
    for _ in range(50):
        g = _connected_random(rng, int(rng.integers(2, 40)), 0.3)
        a = np.zeros((g.n, g.n))
        e = g.edges()
        a[e[:, 0], e[:, 1]] = a[e[:, 1], e[:, 0]] = 1
        x = eigenvector_centrality(g, tol=tol)
        lam = x @ a @ x
        assert np.max(np.abs(a @ x - lam * x)) < 10 * tol


@given(st.integers(2, 50), st.floats(0.05, 0.6), st.integers(0, 2**31 - 1))
def test_permutation_equivariance(n, p, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p)
    perm = rng.permutation(n)
    h = make_graph(n, perm[g.edges()]) if g.m else Graph.empty(n)
    for fn in (degree_centrality, local_clustering, betweenness, closeness, coreness):
        np.testing.assert_allclose(fn(h)[perm], fn(g), atol=1e-12)
    np.testing.assert_allclose(eigenvector_centrality(h)[perm], eigenvector_centrality(g), atol=1e-6)


@given(st.integers(1, 40), st.floats(0.0, 0.7), st.integers(0, 2**31 - 1))
def test_feature_ranges(n, p, seed):
    g = random_graph(np.random.default_rng(seed), n, p)
    fm = extract_features(g, seed=seed)
    for name in ("clustering", "link_diversity", "betweenness", "closeness", "eigenvector"):
        col = fm.column(name)
        assert np.all(col >= 0) and np.all(col <= 1 + 1e-12), name
    assert np.all(fm.column("coreness") <= g.degrees)


def test_parallel_is_bit_identical():
    rng = np.random.default_rng(1)
    g = random_graph(rng, 700, 0.01)
    assert np.array_equal(betweenness(g, jobs=1), betweenness(g, jobs=4))
    assert np.array_equal(closeness(g, jobs=1), closeness(g, jobs=4))


def test_matches_networkx_on_medium_graphs():
    nx = pytest.importorskip("networkx")
    rng = np.random.default_rng(11)
    for _ in range(5):
        g = random_graph(rng, 60, 0.08)
        h = nx.Graph()
        h.add_nodes_from(range(g.n))
        h.add_edges_from(g.edges().tolist())
        bc = nx.betweenness_centrality(h, normalized=True)
        np.testing.assert_allclose(betweenness(g), [bc[u] for u in range(g.n)], atol=1e-12)
        cc = nx.closeness_centrality(h, wf_improved=True)
        np.testing.assert_allclose(closeness(g), [cc[u] for u in range(g.n)], atol=1e-12)
        core = nx.core_number(h)
        assert coreness(g).tolist() == [core[u] for u in range(g.n)]
