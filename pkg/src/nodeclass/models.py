"""Random network models: Erdos-Renyi G(n, m), configuration model,
Barabasi-Albert, Watts-Strogatz and Holme-Kim."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from nodeclass.graph import Graph

logger = logging.getLogger(__name__)

MODEL_KINDS = ("ER", "Configuration", "BA", "WS", "HolmeKim")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    n: int
    m: int = 0
    degree_sequence: list[int] | None = None
    ws_rewire_p: float = 0.1
    hk_triangle_p: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.m > self.n * (self.n - 1) // 2:
            raise ValueError(f"m={self.m} exceeds n(n-1)/2 for n={self.n}")
        if (self.degree_sequence is not None) != (self.kind == "Configuration"):
            raise ValueError("degree_sequence is required for, and only for, the Configuration model")
        if self.degree_sequence is not None and sum(self.degree_sequence) % 2:
            raise ValueError("degree sequence must have an even sum")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        return cls(**doc)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def per_node_edges(n: int, m_total: int) -> int:
    """Attachment count used by the growth models: round(m/n), at least 1."""
    return max(1, _round_half_up(m_total / n))


def gen_er(n: int, m: int, seed: int = 0) -> Graph:
    """Uniform G(n, m): exactly ``m`` distinct edges."""
    total = n * (n - 1) // 2
    if m < 0 or m > total:
        raise ValueError(f"cannot place {m} edges on {n} nodes (max {total})")
    rng = np.random.default_rng(seed)
    if m == 0:
        return Graph.empty(n)
    if m > total // 2 and total <= 5_000_000:
        iu, ju = np.triu_indices(n, k=1)
        pick = rng.choice(total, size=m, replace=False)
        return Graph.from_edges(n, np.column_stack([iu[pick], ju[pick]]))
    chosen: dict[int, None] = {}
    while len(chosen) < m:
        need = m - len(chosen)
        u = rng.integers(0, n, size=2 * need + 16)
        v = rng.integers(0, n, size=2 * need + 16)
        ok = u != v
        keys = np.minimum(u[ok], v[ok]) * n + np.maximum(u[ok], v[ok])
        for key in keys.tolist():
            if key not in chosen:
                chosen[key] = None
                if len(chosen) == m:
                    break
    keys = np.fromiter(chosen.keys(), dtype=np.int64, count=m)
    return Graph.from_edges(n, np.column_stack([keys // n, keys % n]))


def _defect(e: tuple[int, int], count: int) -> int:
    # self-loops count fully, other edges count their surplus copies
    if e[0] == e[1]:
        return count
    return max(count - 1, 0)


def gen_configuration(degree_sequence: Sequence[int], seed: int = 0) -> Graph:
    """Stub matching followed by double-edge-swap repair into a simple graph.

    A swap replaces a defective edge ``(a, b)`` and a random edge ``(c, d)``
    by ``(a, c), (b, d)``; it is accepted when the number of self-loops plus
    surplus parallel edges does not grow. The result has exactly the input
    degree sequence. Up to ``100 * m`` swap attempts are made.
    """
    deg = np.asarray(degree_sequence, dtype=np.int64)
    if np.any(deg < 0):
        raise ValueError("degrees must be nonnegative")
    if int(deg.sum()) % 2:
        raise ValueError("degree sequence must have an even sum")
    n = deg.shape[0]
    if deg.size and deg.max() >= n:
        raise GenerationError("degree sequence is not graphical: a degree is >= n")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), deg)
    rng.shuffle(stubs)
    edges = [(int(min(a, b)), int(max(a, b))) for a, b in stubs.reshape(-1, 2).tolist()]
    m = len(edges)
    mult = Counter(edges)

    def is_bad(e: tuple[int, int]) -> bool:
        return e[0] == e[1] or mult[e] > 1

    bad = [i for i, e in enumerate(edges) if is_bad(e)]
    attempts = 0
    limit = 100 * max(m, 1)
    while bad:
        if attempts >= limit:
            loops = sum(1 for a, b in edges if a == b)
            surplus = sum(c - 1 for e, c in mult.items() if e[0] != e[1] and c > 1)
            raise GenerationError(
                f"configuration repair failed after {attempts} swap attempts: "
                f"{loops} self-loop(s) and {surplus} surplus parallel edge(s) left"
            )
        attempts += 1
        i = bad[int(rng.integers(len(bad)))]
        j = int(rng.integers(m))
        if i == j:
            continue
        a, b = edges[i]
        c, d = edges[j]
        if rng.random() < 0.5:
            c, d = d, c
        e1 = (min(a, c), max(a, c))
        e2 = (min(b, d), max(b, d))
        old = {edges[i], edges[j], e1, e2}
        before = sum(_defect(e, mult[e]) for e in old)
        mult[edges[i]] -= 1
        mult[edges[j]] -= 1
        mult[e1] += 1
        mult[e2] += 1
        after = sum(_defect(e, mult[e]) for e in old)
        if after > before:
            mult[e1] -= 1
            mult[e2] -= 1
            mult[edges[i]] += 1
            mult[edges[j]] += 1
            continue
        edges[i], edges[j] = e1, e2
        bad = [k for k in set(bad) | {i, j} if is_bad(edges[k])]
        bad.sort()
    if attempts:
        logger.debug("configuration model repaired with %d swap attempts", attempts)
    return Graph.from_edges(n, edges)


def _seed_clique(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(k) for j in range(i + 1, k)]


def _preferential_growth(n: int, k: int, triangle_p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    n0 = min(n, k + 1)
    edges = _seed_clique(n0)
    adj: list[set[int]] = [set() for _ in range(n)]
    repeated: list[int] = []
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
        repeated += [a, b]
    if n0 == 1:
        repeated = [0]
    for u in range(n0, n):
        targets: set[int] = set()
        last = -1
        pending_triad = False
        while len(targets) < min(k, u):
            if pending_triad and last >= 0:
                options = [w for w in adj[last] if w != u and w not in targets]
                pending_triad = False
                if options:
                    w = options[int(rng.integers(len(options)))]
                    targets.add(w)
                    pending_triad = rng.random() < triangle_p
                    continue
            w = repeated[int(rng.integers(len(repeated)))]
            if w in targets:
                continue
            targets.add(w)
            last = w
            pending_triad = triangle_p > 0 and rng.random() < triangle_p
        for w in sorted(targets):
            edges.append((w, u))
            adj[w].add(u)
            adj[u].add(w)
            repeated += [w, u]
    return edges


def gen_ba(n: int, m_total: int, seed: int = 0) -> Graph:
    """Barabasi-Albert growth with ``k = round(m_total / n)`` edges per new node."""
    if n < 2:
        raise ValueError("BA needs n >= 2")
    k = per_node_edges(n, m_total)
    rng = np.random.default_rng(seed)
    return Graph.from_edges(n, _preferential_growth(n, k, 0.0, rng))


def gen_holme_kim(n: int, m_total: int, triangle_p: float = 1.0, seed: int = 0) -> Graph:
    """Preferential attachment with triad formation.

    After a preferential edge to ``t``, each further edge of the new node is,
    with probability ``triangle_p``, sent to a random unused neighbor of ``t``
    (closing a triangle); otherwise it is another preferential edge.
    """
    if n < 2:
        raise ValueError("Holme-Kim needs n >= 2")
    if not 0.0 <= triangle_p <= 1.0:
        raise ValueError("triangle_p must be in [0, 1]")
    k = per_node_edges(n, m_total)
    rng = np.random.default_rng(seed)
    return Graph.from_edges(n, _preferential_growth(n, k, triangle_p, rng))


def ws_lattice_degree(n: int, m_total: int) -> int:
    return 2 * max(1, _round_half_up(m_total / n))


def gen_ws(n: int, m_total: int, rewire_p: float = 0.1, seed: int = 0) -> Graph:
    """Ring lattice with ``k = 2 round(m/n)`` neighbors, each edge rewired with prob ``rewire_p``."""
    if n < 3:
        raise ValueError("WS needs n >= 3")
    k = ws_lattice_degree(n, m_total)
    if k >= n:
        raise ValueError(f"lattice degree {k} must be below n={n}")
    rng = np.random.default_rng(seed)
    adj: list[set[int]] = [set() for _ in range(n)]
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if v not in adj[u] or rng.random() >= rewire_p:
                continue
            if len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    edges = [(u, v) for u in range(n) for v in adj[u] if u < v]
    return Graph.from_edges(n, edges)


def generate(spec: ModelSpec) -> Graph:
    if spec.kind == "ER":
        return gen_er(spec.n, spec.m, spec.seed)
    if spec.kind == "Configuration":
        return gen_configuration(spec.degree_sequence, spec.seed)
    if spec.kind == "BA":
        return gen_ba(spec.n, spec.m, spec.seed)
    if spec.kind == "WS":
        return gen_ws(spec.n, spec.m, spec.ws_rewire_p, spec.seed)
    return gen_holme_kim(spec.n, spec.m, spec.hk_triangle_p, spec.seed)


def matched_spec(kind: str, g: Graph, seed: int, ws_rewire_p: float = 0.1, hk_triangle_p: float = 1.0) -> ModelSpec:
    """Model spec with the node count and edge count (or degrees) of ``g``."""
    degs = [int(x) for x in g.degrees] if kind == "Configuration" else None
    return ModelSpec(kind, g.n, g.m, degs, ws_rewire_p, hk_triangle_p, seed)
