import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smspk.clustering import (
    ClusterAssignment,
    initial_assignment,
    kernel_distances,
    kernel_kmeans,
    kernel_silhouette,
    lloyd_from,
    read_assignment,
    write_assignment,
)
from smspk.errors import DataError


def euclidean_lloyd(X, labels, k, max_iter=300):
    """Plain Lloyd's algorithm on explicit points."""
    labels = np.array(labels)
    for _ in range(max_iter):
        centers = np.array([X[labels == c].mean(axis=0) for c in range(k)])
        d = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
        new = d.argmin(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        assert np.bincount(labels, minlength=k).min() > 0
    return labels


def silhouette_oracle(D, labels):
    n = len(labels)
    s = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            s.append(0.0)
            continue
        a = np.mean([D[i, j] for j in own])
        b = min(
            np.mean([D[i, j] for j in range(n) if labels[j] == c])
            for c in set(labels) if c != labels[i]
        )
        s.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return float(np.mean(s))


def gram(X):
    return X @ X.T


def blocks(sizes):
    n = sum(sizes)
    K = np.zeros((n, n))
    start = 0
    for s in sizes:
        K[start:start + s, start:start + s] = 1.0
        start += s
    return K


def test_lloyd_oracle_on_point_sets():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(4, 13))
        X = rng.normal(size=(n, 2)) + np.repeat([[0, 0], [3, 0]], [n // 2, n - n // 2], axis=0)
        init = initial_assignment(n, 2, rng)
        expected = euclidean_lloyd(X, init, 2)
        got, _ = lloyd_from(gram(X), init, 2)
        assert np.array_equal(got, expected)


def test_k_one_objective_is_total_scatter(rng):
    X = rng.normal(size=(9, 3))
    a = kernel_kmeans(gram(X), 1, restarts=3)
    assert a.labels.tolist() == [0] * 9
    assert a.objective == pytest.approx(((X - X.mean(0)) ** 2).sum())


def test_block_diagonal_recovered():
    K = blocks([4, 3, 5])
    a = kernel_kmeans(K, 3, restarts=20, seed=1)
    assert a.labels.tolist() == [0] * 4 + [1] * 3 + [2] * 5
    assert a.objective == pytest.approx(0.0, abs=1e-12)


def test_duplicates_share_a_cluster(rng):
    X = rng.normal(size=(10, 2))
    X = np.vstack([X, X[[2, 5]]])
    a = kernel_kmeans(gram(X), 3, restarts=20)
    assert a.labels[2] == a.labels[10] and a.labels[5] == a.labels[11]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4))
def test_objective_history_non_increasing(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 3))
    _, hist = lloyd_from(gram(X), initial_assignment(15, k, rng), k)
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_positive_scaling_does_not_change_partition(rng):
    K = gram(rng.normal(size=(20, 4)))
    a = kernel_kmeans(K, 3, restarts=10, seed=4)
    b = kernel_kmeans(7.5 * K, 3, restarts=10, seed=4)
    assert np.array_equal(a.labels, b.labels)
    assert b.objective == pytest.approx(7.5 * a.objective)


def test_deterministic_and_canonical(rng):
    K = gram(rng.normal(size=(25, 3)))
    a = kernel_kmeans(K, 4, restarts=15, seed=3)
    b = kernel_kmeans(K, 4, restarts=15, seed=3)
    assert np.array_equal(a.labels, b.labels)
    first = [a.labels.tolist().index(c) for c in range(4)]
    assert first == sorted(first)
    assert min(a.sizes()) > 0


def test_initial_assignment_covers_every_cluster():
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert np.bincount(initial_assignment(6, 5, rng), minlength=5).min() > 0


def test_invalid_k():
    K = np.eye(3)
    with pytest.raises(ValueError):
        kernel_kmeans(K, 0)
    with pytest.raises(DataError):
        kernel_kmeans(K, 4)
    with pytest.raises(ValueError):
        lloyd_from(K, [0, 0, 0], 2)


def test_kernel_distances_match_euclidean(rng):
    X = rng.normal(size=(6, 3))
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    assert np.allclose(kernel_distances(gram(X)), D, atol=1e-7)


def test_silhouette_separated_blocks():
    K = blocks([3, 3]) + 1e-3 * np.eye(6)
    a = ClusterAssignment(tuple("abcdef"), [0, 0, 0, 1, 1, 1], 2)
    assert kernel_silhouette(K, a) > 0.9


def test_silhouette_against_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(4, 15))
        k = int(rng.integers(2, 4))
        X = rng.normal(size=(n, 3))
        labels = initial_assignment(n, k, rng)
        a = ClusterAssignment(tuple(map(str, range(n))), labels, k)
        D = np.linalg.norm(X[:, None] - X[None], axis=2)
        assert kernel_silhouette(gram(X), a) == pytest.approx(silhouette_oracle(D, labels), abs=1e-6)


def test_silhouette_of_random_labels_is_near_zero():
    values = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 3))
        labels = initial_assignment(60, 3, rng)
        values.append(kernel_silhouette(gram(X), ClusterAssignment(tuple(map(str, range(60))), labels, 3)))
    assert abs(np.mean(values)) < 0.2


def test_silhouette_errors():
    with pytest.raises(ValueError):
        kernel_silhouette(np.eye(2), ClusterAssignment(("a", "b"), [0, 0], 1))
    with pytest.raises(ValueError):
        kernel_silhouette(np.eye(2), ClusterAssignment(("a", "b"), [0, 0], 2))


def test_assignment_round_trip(tmp_path):
    a = ClusterAssignment(("p1", "p2", "p3"), [0, 1, 0], 2)
    write_assignment(a, tmp_path / "c.tsv")
    b = read_assignment(tmp_path / "c.tsv")
    assert b.patients == a.patients and np.array_equal(b.labels, a.labels) and b.k == 2


def test_read_assignment_errors(tmp_path):
    (tmp_path / "c.tsv").write_text("patient\tgroup\np1\t0\n")
    with pytest.raises(DataError):
        read_assignment(tmp_path / "c.tsv")
    (tmp_path / "c.tsv").write_text("patient\tcluster\np1\tx\n")
    with pytest.raises(DataError, match="line 2"):
        read_assignment(tmp_path / "c.tsv")
