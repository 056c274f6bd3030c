"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package: eigenvalues come from a dense
symmetric eigensolver and path statistics from explicit enumeration.
"""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np


def dense_adjacency(n, edges):
    a = np.zeros((n, n))
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    return a


def dense_spectral_radius(n, edges):
    if n == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(dense_adjacency(n, edges)))))


def _all_simple_paths(adj, s, t):
    """Every simple path from s to t, by depth-first enumeration."""
    out = []
    stack = [(s, (s,))]
    while stack:
        v, path = stack.pop()
        if v == t:
            out.append(path)
            continue
        for w in adj[v]:
            if w not in path:
                stack.append((w, path + (w,)))
    return out


def brute_betweenness(n, edges):
    """Pair-counted-once betweenness by listing every shortest path."""
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    score = np.zeros(n)
    for s, t in itertools.combinations(range(n), 2):
        paths = _all_simple_paths(adj, s, t)
        if not paths:
            continue
        best = min(len(p) for p in paths)
        shortest = [p for p in paths if len(p) == best]
        for p in shortest:
            for v in p[1:-1]:
                score[v] += 1.0 / len(shortest)
    return score


def bfs_hops(n, edges, source):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = [-1] * n
    dist[source] = 0
    q = deque([source])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def greedy_eigen_drop(n, edges, feasible, k, tie=1e-9):
    """Greedy removal minimizing the dense spectral radius; ties to lowest id."""
    removed = []
    for _ in range(k):
        best, best_val = None, np.inf
        for v in sorted(feasible):
            if v in removed:
                continue
            gone = set(removed) | {v}
            kept = [(a, b) for a, b in edges if a not in gone and b not in gone]
            val = dense_spectral_radius(n, kept)
            if val < best_val - tie:
                best, best_val = v, val
        removed.append(best)
    return frozenset(removed)


def random_graph(rng, n_max, p=None):
    n = int(rng.integers(1, n_max + 1))
    prob = rng.random() if p is None else p
    edges = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < prob]
    return n, edges
