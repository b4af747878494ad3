import numpy as np
import pytest

from smspk.pathway_io import PathwayGraph


def make_graph(n, edges, pathway_id="g"):
    """Graph on vertices 0..n-1; gene symbols chosen so sorting keeps that order."""
    adj = np.zeros((n, n), dtype=np.uint8)
    for a, b in edges:
        adj[a, b] = adj[b, a] = 1
    return PathwayGraph(pathway_id, tuple(f"G{i:03d}" for i in range(n)), adj)


def random_graph(rng, n, p):
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = (upper | upper.T).astype(np.uint8)
    return PathwayGraph("rand", tuple(f"G{i:03d}" for i in range(n)), adj)


@pytest.fixture
def path3():
    return make_graph(3, [(0, 1), (1, 2)], "path3")


@pytest.fixture
def triangle():
    return make_graph(3, [(0, 1), (1, 2), (0, 2)], "triangle")


@pytest.fixture
def cycle4():
    return make_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)], "cycle4")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
