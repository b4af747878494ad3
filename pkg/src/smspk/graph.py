"""Canonical all-pairs shortest paths on unweighted pathway graphs."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .pathway_io import PathwayGraph


@dataclass(frozen=True)
class ShortestPath:
    vertices: tuple[int, ...]

    def __post_init__(self):
        v = self.vertices
        if len(v) < 2:
            raise ValueError("a shortest path needs at least two vertices")
        if len(set(v)) != len(v):
            raise ValueError("a shortest path cannot repeat a vertex")
        if v[0] > v[-1]:
            raise ValueError("paths are oriented from the smaller endpoint")

    @property
    def length(self) -> int:
        """Number of edges."""
        return len(self.vertices) - 1

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.vertices[0], self.vertices[-1]

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class ShortestPathSet:
    pathway_id: str
    paths: tuple[ShortestPath, ...]

    @property
    def count(self) -> int:
        return len(self.paths)

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


def _adjacency_lists(g: PathwayGraph) -> list[list[int]]:
    return [np.flatnonzero(row).tolist() for row in g.adjacency]


def bfs_distances(g: PathwayGraph, source: int, adj=None) -> np.ndarray:
    """Hop distances from ``source``; ``-1`` marks unreachable vertices."""
    adj = adj if adj is not None else _adjacency_lists(g)
    dist = np.full(g.n_genes, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def all_shortest_paths(g: PathwayGraph) -> ShortestPathSet:
    """One geodesic for every connected vertex pair ``u < v``.

    The path is traced backwards from ``v``: at every hop the predecessor with
    the smallest index among those one step closer to ``u`` is taken. Paths
    are sorted by ``(u, v)``.
    """
    adj = _adjacency_lists(g)
    paths = []
    for u in range(g.n_genes):
        dist = bfs_distances(g, u, adj)
        for v in range(u + 1, g.n_genes):
            if dist[v] <= 0:
                continue
            walk = [v]
            cur = v
            while cur != u:
                cur = min(w for w in adj[cur] if dist[w] == dist[cur] - 1)
                walk.append(cur)
            paths.append(ShortestPath(tuple(reversed(walk))))
    return ShortestPathSet(g.id, tuple(paths))


def diameter(g: PathwayGraph) -> int:
    """Longest geodesic over connected pairs; 0 for an edgeless graph."""
    adj = _adjacency_lists(g)
    best = 0
    for u in range(g.n_genes):
        best = max(best, int(bfs_distances(g, u, adj).max()))
    return best
