"""Independent reference implementations used to validate engine output.

These deliberately avoid the compiler and engine: plain queues, dynamic
programming, union-find and dense numpy iteration over edge lists.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def reach_oracle(n: int, edges: list[tuple[int, int]], sources: list[int]) -> set[int]:
    """Vertices reachable from any source, by iterative DFS."""
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    seen: set[int] = set()
    stack = list(sources)
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        stack.extend(adj.get(u, ()))
    return seen


def bfs_oracle(n: int, edges: list[tuple[int, int]], source: int) -> dict[int, int]:
    """Minimum hop count from the source by queue traversal.

    Unreachable vertices are absent from the result.
    """
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def bellman_ford_oracle(
    n: int, wedges: list[tuple[int, int, float]], source: int
) -> dict[int, float]:
    """Single-source shortest path costs; absent = unreachable."""
    dist: dict[int, float] = {source: 0.0}
    for _ in range(max(n - 1, 1)):
        changed = False
        for a, b, w in wedges:
            if a in dist:
                cand = dist[a] + w
                if b not in dist or cand < dist[b]:
                    dist[b] = cand
                    changed = True
        if not changed:
            break
    return dist


def pagerank_oracle(
    n: int,
    edges: list[tuple[int, int]],
    damping: float = 0.85,
    iterations: int = 50,
) -> np.ndarray:
    """Dense power iteration with sink-mass redistribution."""
    if n == 0:
        return np.zeros(0)
    A = np.zeros((n, n))
    for a, b in set(edges):
        A[a, b] = 1.0
    deg = A.sum(axis=1)
    pr = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    for _ in range(iterations):
        sink_mass = pr[deg == 0.0].sum()
        w = np.divide(pr, deg, out=np.zeros(n), where=deg > 0)
        pr = np.full(n, teleport + damping * sink_mass / n) + damping * (A.T @ w)
    return pr


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def wcc_partition_oracle(n: int, edges: list[tuple[int, int]]) -> set[frozenset[int]]:
    """Weakly connected components as a partition of the vertex set."""
    uf = _UnionFind(n)
    for a, b in edges:
        uf.union(a, b)
    groups: dict[int, set[int]] = {}
    for v in range(n):
        groups.setdefault(uf.find(v), set()).add(v)
    return {frozenset(g) for g in groups.values()}


def partition_of_labels(n: int, labels: dict[int, object]) -> set[frozenset[int]]:
    """Group vertices by label; vertices without a label are singletons."""
    groups: dict[object, set[int]] = {}
    for v in range(n):
        key = labels.get(v, ("__unlabeled__", v))
        groups.setdefault(key, set()).add(v)
    return {frozenset(g) for g in groups.values()}
