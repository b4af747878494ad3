"""Regenerate the bundled 45-gene benchmark pathway.

The graph is a random preferential-attachment tree with a few extra short
cycles, which gives the hub-and-branch look of a signalling pathway. The
output is committed; rerunning with the same seed reproduces it exactly.

    python scripts/make_benchmark_graph.py src/smspk/data/benchmark45.pathway
"""
import sys

import numpy as np

from smspk.graph import bfs_distances, diameter
from smspk.pathway_io import PathwayGraph, write_pathway

N_GENES = 45
EXTRA_EDGES = 8
SEED = 20170101


def build(seed=SEED):
    rng = np.random.default_rng(seed)
    genes = [f"BG{i:02d}" for i in range(1, N_GENES + 1)]
    edges = set()
    deg = np.zeros(N_GENES)
    deg[0] = 1
    for v in range(1, N_GENES):
        w = deg[:v] + 1.0
        u = int(rng.choice(v, p=w / w.sum()))
        edges.add((u, v))
        deg[u] += 1
        deg[v] += 1
    g = PathwayGraph.from_edges("benchmark45", genes, [(genes[a], genes[b]) for a, b in edges])
    # close a few triangles/squares: join vertices at hop distance 2 or 3
    added = 0
    while added < EXTRA_EDGES:
        u = int(rng.integers(N_GENES))
        dist = bfs_distances(g, u)
        cand = np.flatnonzero((dist >= 2) & (dist <= 3))
        if cand.size == 0:
            continue
        v = int(rng.choice(cand))
        edges.add((min(u, v), max(u, v)))
        g = PathwayGraph.from_edges("benchmark45", genes, [(genes[a], genes[b]) for a, b in edges])
        added += 1
    return g


if __name__ == "__main__":
    g = build()
    print(f"{g.n_genes} genes, {len(g.edges())} edges, diameter {diameter(g)}")
    if len(sys.argv) > 1:
        write_pathway(g, sys.argv[1])
