"""Kernel k-means with random restarts, and a kernelized silhouette score."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

MAX_ITER = 300


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    patients: tuple[str, ...]
    labels: np.ndarray = field(repr=False)
    k: int
    objective: float = float("nan")

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (len(self.patients),):
            raise ValueError("one label per patient is required")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "patients", tuple(self.patients))

    def sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.k).tolist()

    def members(self, c: int) -> list[str]:
        return [p for p, l in zip(self.patients, self.labels) if l == c]


def _values(K) -> np.ndarray:
    return np.asarray(getattr(K, "values", K), dtype=float)


def _patients(K, n):
    return getattr(K, "patients", None) or tuple(str(i) for i in range(n))


def _distances(K, diag, labels, k):
    """Squared feature-space distance of every point to every centroid.

    ``labels`` is (R, n); returns (R, n, k). Every cluster must be non-empty.
    """
    R, n = labels.shape
    H = np.zeros((n, R, k))
    H[np.arange(n)[:, None], np.arange(R)[None, :], labels.T] = 1.0
    KH = (K @ H.reshape(n, R * k)).reshape(n, R, k)
    counts = H.sum(axis=0)  # (R, k)
    within = np.einsum("nrk,nrk->rk", H, KH)
    D = diag[:, None, None] - 2.0 * KH / counts[None] + (within / counts**2)[None]
    return D.transpose(1, 0, 2)


def _objective(D, labels):
    own = np.take_along_axis(D, labels[:, :, None], axis=2)[:, :, 0]
    return np.maximum(own.sum(axis=1), 0.0)


def _repair_empty(labels, D, k):
    """Fill empty clusters with the point farthest from its own centroid."""
    for r in range(labels.shape[0]):
        counts = np.bincount(labels[r], minlength=k)
        if counts.min() > 0:
            continue
        own = D[r, np.arange(labels.shape[1]), labels[r]].copy()
        for c in np.flatnonzero(counts == 0):
            movable = counts[labels[r]] > 1
            cand = np.where(movable, own, -np.inf)
            i = int(np.argmax(cand))
            counts[labels[r, i]] -= 1
            labels[r, i] = c
            counts[c] += 1
            own[i] = -np.inf


def _refine(K, labels, k, max_iter=MAX_ITER, history=None):
    """Lloyd iterations in kernel space for a batch of restarts.

    ``labels`` (R, n) must give every cluster at least one member; it is
    updated in place. Returns the final objective per restart. When
    ``history`` is a list, the per-iteration objective of restart 0 is
    appended to it.
    """
    diag = np.diag(K).copy()
    active = np.arange(labels.shape[0])
    for _ in range(max_iter):
        if active.size == 0:
            break
        cur = labels[active]
        D = _distances(K, diag, cur, k)
        if history is not None and active[0] == 0:
            history.append(float(_objective(D, cur)[0]))
        new = np.argmin(D, axis=2)
        _repair_empty(new, D, k)
        changed = np.any(new != cur, axis=1)
        labels[active] = new
        active = active[changed]
    D = _distances(K, diag, labels, k)
    obj = _objective(D, labels)
    if history is not None:
        history.append(float(obj[0]))
    return obj


def _canonical(labels):
    """Renumber clusters in order of first appearance."""
    mapping = {}
    for l in labels.tolist():
        mapping.setdefault(l, len(mapping))
    return np.array([mapping[l] for l in labels.tolist()], dtype=np.int64)


def initial_assignment(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random assignment in which every cluster gets at least one point."""
    perm = rng.permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[perm[:k]] = np.arange(k)
    labels[perm[k:]] = rng.integers(0, k, size=n - k)
    return labels


def lloyd_from(K, init_labels, k: int, max_iter: int = MAX_ITER):
    """Run kernel k-means from a given assignment.

    Returns ``(labels, objective_history)``; the history lists the objective
    of each visited assignment and is non-increasing.
    """
    K = _values(K)
    labels = np.array(init_labels, dtype=np.int64)[None, :]
    if np.bincount(labels[0], minlength=k).min() == 0:
        raise ValueError("initial assignment leaves a cluster empty")
    history: list[float] = []
    _refine(K, labels, k, max_iter, history)
    return labels[0], history


def kernel_kmeans(K, k: int, restarts: int = 100, seed: int = 0, max_iter: int = MAX_ITER) -> ClusterAssignment:
    """Kernel k-means keeping the best of ``restarts`` random initialisations.

    Restart ``r`` draws its initial assignment from ``default_rng(seed + r)``.
    Points move to the nearest centroid (ties to the lowest cluster index)
    until no label changes or ``max_iter`` sweeps; the restart with the
    smallest within-cluster distortion wins, the lowest index on ties.
    Cluster ids are renumbered in order of first appearance.
    """
    values = _values(K)
    n = values.shape[0]
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k > n:
        raise DataError(f"k={k} exceeds the number of patients ({n})")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    labels = np.stack([
        initial_assignment(n, k, np.random.default_rng(seed + r)) for r in range(restarts)
    ])
    obj = _refine(values, labels, k, max_iter)
    best = int(np.argmin(obj))
    return ClusterAssignment(_patients(K, n), _canonical(labels[best]), k, float(obj[best]))


def kernel_distances(K) -> np.ndarray:
    v = _values(K)
    d = np.diag(v)
    return np.sqrt(np.maximum(d[:, None] - 2.0 * v + d[None, :], 0.0))


def kernel_silhouette(K, a: ClusterAssignment) -> float:
    """Mean silhouette width using kernel-induced distances.

    Points in singleton clusters score 0, as do points with ``a == b == 0``.
    """
    if a.k < 2:
        raise ValueError("silhouette needs at least two clusters")
    labels = a.labels
    counts = np.bincount(labels, minlength=a.k)
    if counts.min() == 0:
        raise ValueError("every cluster must be non-empty")
    dist = kernel_distances(K)
    n = labels.size
    H = np.zeros((n, a.k))
    H[np.arange(n), labels] = 1.0
    sums = dist @ H  # (n, k): total distance to each cluster
    own = counts[labels]
    a_in = np.where(own > 1, sums[np.arange(n), labels] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / counts[None, :]
    mean_other[np.arange(n), labels] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a_in, b)
    s = np.where(denom > 0, (b - a_in) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def format_assignment(a: ClusterAssignment) -> str:
    lines = ["patient\tcluster"]
    lines += [f"{p}\t{l}" for p, l in zip(a.patients, a.labels.tolist())]
    return "\n".join(lines) + "\n"


def write_assignment(a: ClusterAssignment, path) -> None:
    Path(path).write_text(format_assignment(a), encoding="utf-8")


def read_assignment(path) -> ClusterAssignment:
    lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip()]
    if not lines or lines[0].split("\t") != ["patient", "cluster"]:
        raise DataError(f"{path}: header must be patient<TAB>cluster")
    patients, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}: line {lineno}: expected 2 columns")
        try:
            labels.append(int(parts[1]))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: cluster must be an integer") from None
        patients.append(parts[0])
    if not labels or min(labels) < 0:
        raise DataError(f"{path}: clusters are numbered from 0")
    return ClusterAssignment(tuple(patients), np.array(labels), max(labels) + 1)
