import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nodeclass.graph import Graph

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


def make_graph(n, edges):
    return Graph.from_edges(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def complete(n):
    return make_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path(n):
    return make_graph(n, [(i, i + 1) for i in range(n - 1)])


def star(leaves):
    return make_graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def two_triangles_bridge():
    return make_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])


def random_graph(rng, n, p):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return make_graph(n, pairs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
