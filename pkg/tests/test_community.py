import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import complete, make_graph, random_graph, two_triangles_bridge
from nodeclass.community import Partition, detect_communities, modularity, write_partition
from nodeclass.graph import Graph


def test_modularity_examples():
    assert modularity(complete(5), Partition.from_labels([0] * 5)) == pytest.approx(0.0)
    two = make_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert modularity(two, Partition.from_labels([0, 0, 0, 1, 1, 1])) == pytest.approx(0.5)
    q = modularity(two_triangles_bridge(), Partition.from_labels([0, 0, 0, 1, 1, 1]))
    assert q == pytest.approx(6 / 7 - 2 * 0.5**2)
    assert q == pytest.approx(0.35714285714285715)


def test_modularity_errors():
    with pytest.raises(ValueError):
        modularity(Graph.empty(3), Partition.from_labels([0, 0, 0]))
    with pytest.raises(ValueError):
        modularity(complete(3), Partition.from_labels([0, 0]))


def test_partition_dense_relabel():
    p = Partition.from_labels([7, 7, 3, 9, 3])
    assert p.assignment.tolist() == [0, 0, 1, 2, 1]
    assert p.num_communities == 3


def test_two_triangles_matches_exhaustive_optimum():
    g = two_triangles_bridge()
    best = max(oracles.set_partitions(list(range(6))), key=lambda part: _q(g, part))
    labels = np.empty(6, dtype=int)
    for c, block in enumerate(best):
        labels[block] = c
    assert sorted(sorted(b) for b in best) == [[0, 1, 2], [3, 4, 5]]
    for seed in range(10):
        p = detect_communities(g, seed=seed)
        assert p.num_communities == 2
        assert modularity(g, p) == pytest.approx(oracles.modularity(g, labels))


def _q(g, part):
    labels = [0] * g.n
    for c, block in enumerate(part):
        for u in block:
            labels[u] = c
    return oracles.modularity(g, labels)


def test_complete_graph_single_community():
    assert detect_communities(complete(5), seed=1).num_communities == 1


def test_edgeless_singletons():
    p = detect_communities(Graph.empty(4))
    assert p.assignment.tolist() == [0, 1, 2, 3]


def test_seeded_reproducibility():
    g = random_graph(np.random.default_rng(5), 80, 0.06)
    a = detect_communities(g, seed=42).assignment
    b = detect_communities(g, seed=42).assignment
    assert np.array_equal(a, b)


def test_write_partition(tmp_path):
    write_partition(Partition.from_labels([0, 1, 1]), tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines() == ["node_id,community_id", "0,0", "1,1", "2,1"]


def _local_moves_do_not_improve(g, p):
    base = modularity(g, p)
    a = p.assignment
    for u in range(g.n):
        for c in {int(a[v]) for v in g.neighbors(u)} - {int(a[u])}:
            trial = a.copy()
            trial[u] = c
            assert modularity(g, Partition.from_labels(trial)) <= base + 1e-12


@given(st.integers(2, 30), st.floats(0.05, 0.5), st.integers(0, 2**31 - 1))
def test_quality_and_local_optimality(n, p, seed):
    g = random_graph(np.random.default_rng(seed), n, p)
    if g.m == 0:
        return
    part = detect_communities(g, seed=seed)
    assert len(part) == g.n
    assert sorted(set(part.assignment.tolist())) == list(range(part.num_communities))
    q = modularity(g, part)
    assert q >= modularity(g, Partition.from_labels(range(n))) - 1e-12
    assert q >= modularity(g, Partition.from_labels([0] * n)) - 1e-12
    assert q == pytest.approx(oracles.modularity(g, part.assignment.tolist()), abs=1e-12)
    _local_moves_do_not_improve(g, part)


@given(st.integers(2, 20), st.integers(0, 2**31 - 1))
def test_modularity_relabel_invariance(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.3)
    if g.m == 0:
        return
    labels = rng.integers(0, 4, size=n)
    perm = rng.permutation(4)
    assert modularity(g, Partition.from_labels(labels)) == pytest.approx(
        modularity(g, Partition.from_labels(perm[labels])), abs=1e-12
    )


def test_competitive_with_louvain():
    nx = pytest.importorskip("networkx")
    rng = np.random.default_rng(8)
    for _ in range(3):
        # planted partition: 4 blocks of 25
        n = 100
        b = np.arange(n) // 25
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < (0.3 if b[i] == b[j] else 0.01)]
        g = make_graph(n, edges)
        h = nx.Graph(edges)
        ours = modularity(g, detect_communities(g, seed=1))
        louvain = nx.community.modularity(h, nx.community.louvain_communities(h, seed=1))
        assert ours >= louvain - 0.02
