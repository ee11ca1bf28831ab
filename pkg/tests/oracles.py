"""Slow, obviously-correct reference implementations used as test oracles."""

import itertools
import math

import numpy as np


def adjacency(g):
    return [set(int(v) for v in g.neighbors(u)) for u in range(g.n)]


def all_pairs_distances(g):
    inf = math.inf
    d = [[0 if i == j else inf for j in range(g.n)] for i in range(g.n)]
    for u, v in g.edges().tolist():
        d[u][v] = d[v][u] = 1
    for k in range(g.n):
        for i in range(g.n):
            for j in range(g.n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def simple_paths(adj, s, t):
    out = []

    def walk(u, seen, trail):
        if u == t:
            out.append(list(trail))
            return
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                trail.append(w)
                walk(w, seen, trail)
                trail.pop()
                seen.discard(w)

    walk(s, {s}, [s])
    return out


def betweenness(g):
    """Enumerate every simple path, keep the shortest per pair, share one unit of flow."""
    adj = adjacency(g)
    bc = [0.0] * g.n
    for s, t in itertools.combinations(range(g.n), 2):
        paths = simple_paths(adj, s, t)
        if not paths:
            continue
        best = min(len(p) for p in paths)
        shortest = [p for p in paths if len(p) == best]
        for p in shortest:
            for v in p[1:-1]:
                bc[v] += 1.0 / len(shortest)
    n = g.n
    if n < 3:
        return np.zeros(n)
    return np.array(bc) * 2.0 / ((n - 1) * (n - 2))


def closeness(g):
    d = all_pairs_distances(g)
    out = np.zeros(g.n)
    for u in range(g.n):
        reach = [d[u][v] for v in range(g.n) if v != u and d[u][v] < math.inf]
        if reach and g.n > 1:
            r = len(reach)
            out[u] = (r / (g.n - 1)) * (r / sum(reach))
    return out


def coreness(g):
    """Largest k such that the node survives repeated deletion of degree < k nodes."""
    adj = adjacency(g)
    core = [0] * g.n
    for k in range(1, g.n + 1):
        alive = set(range(g.n))
        changed = True
        while changed:
            changed = False
            for u in list(alive):
                if len(adj[u] & alive) < k:
                    alive.discard(u)
                    changed = True
        for u in alive:
            core[u] = k
    return np.array(core)


def clustering(g):
    adj = adjacency(g)
    out = np.zeros(g.n)
    for u in range(g.n):
        nb = sorted(adj[u])
        pairs = list(itertools.combinations(nb, 2))
        if pairs:
            out[u] = sum(1 for a, b in pairs if b in adj[a]) / len(pairs)
    return out


def modularity(g, assignment, resolution=1.0):
    m = g.m
    deg = g.degrees
    q = 0.0
    for c in set(assignment):
        members = [u for u in range(g.n) if assignment[u] == c]
        inside = sum(1 for u, v in g.edges().tolist() if assignment[u] == c and assignment[v] == c)
        dc = sum(int(deg[u]) for u in members)
        q += inside / m - resolution * (dc / (2 * m)) ** 2
    return q


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part
