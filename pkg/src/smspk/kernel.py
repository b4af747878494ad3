"""Smoothed shortest path kernel (smSPK) and kernel-matrix utilities.

For one pathway, each patient is represented by the concatenation over all
canonical shortest paths of the smoothed restriction of their 0/1 labels to
the path. The kernel is the Gram matrix of that feature matrix, i.e. the sum
over paths of per-path dot products.

Smoothing is linear, so the feature matrix factors as ``Phi = L @ B`` where
``L`` holds the patient labels and ``B = feature_matrix(I)`` is the feature
map of the unit label vectors. The kernel is therefore ``L @ W @ L.T`` with
the gene-by-gene matrix ``W = B @ B.T``, which only depends on the graph and
the smoothing settings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .graph import ShortestPathSet, all_shortest_paths
from .pathway_io import PathwayGraph
from .smoothing import SmoothingConfig, propagation_operator

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    patients: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    degenerate: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"kernel must be square, got shape {v.shape}")
        if v.shape[0] != len(self.patients):
            raise ValueError("kernel size does not match the patient list")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "patients", tuple(self.patients))

    def __len__(self):
        return len(self.patients)


@dataclass(frozen=True)
class PSDReport:
    min_eig: float
    max_eig: float
    symmetric_residual: float
    passed: bool


def _feature_blocks(labels, paths: ShortestPathSet, cfg: SmoothingConfig):
    """Yield ``(path indices, smoothed block)`` per distinct path size.

    Paths of equal size share a propagation operator and are smoothed in one
    product; each block is (n_patients, n_paths_of_that_size * size).
    """
    labels = np.asarray(labels, dtype=float)
    n_patients = labels.shape[0]
    sizes = np.array([len(p) for p in paths.paths], dtype=np.int64)
    for m in np.unique(sizes):
        which = np.flatnonzero(sizes == m)
        verts = np.array([paths.paths[i].vertices for i in which])  # (P, m)
        block = labels[:, verts] @ propagation_operator(int(m), cfg)  # (n, P, m)
        yield which, block.reshape(n_patients, -1)


def feature_matrix(labels, paths: ShortestPathSet, cfg: SmoothingConfig) -> np.ndarray:
    """Patients x (sum of path vertex counts) matrix of smoothed path states.

    Column blocks follow the canonical path order.
    """
    labels = np.asarray(labels, dtype=float)
    sizes = np.array([len(p) for p in paths.paths], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    phi = np.zeros((labels.shape[0], int(offsets[-1])))
    for which, block in _feature_blocks(labels, paths, cfg):
        m = sizes[which[0]]
        cols = offsets[which][:, None] + np.arange(m)[None, :]
        phi[:, cols.ravel()] = block
    return phi


_SIMILARITY_CACHE: dict = {}


def gene_similarity(g: PathwayGraph, cfg: SmoothingConfig, paths: ShortestPathSet | None = None) -> np.ndarray:
    """``W = B @ B.T`` with ``B`` the smoothed path features of each single gene.

    ``W[a, b]`` sums, over every path holding both genes, the dot product of
    their smoothed unit profiles; the kernel is ``L @ W @ L.T``.
    """
    key = (hash(g), g.id, cfg)
    W = _SIMILARITY_CACHE.get(key)
    if W is None:
        if paths is None:
            paths = all_shortest_paths(g)
        W = np.zeros((g.n_genes, g.n_genes))
        for _, block in _feature_blocks(np.eye(g.n_genes), paths, cfg):
            W += block @ block.T
        W = (W + W.T) / 2.0
        W.setflags(write=False)
        if len(_SIMILARITY_CACHE) > 256:
            _SIMILARITY_CACHE.clear()
        _SIMILARITY_CACHE[key] = W
    return W


def pathway_kernel(
    g: PathwayGraph,
    labels,
    cfg: SmoothingConfig,
    patients=None,
    paths: ShortestPathSet | None = None,
) -> KernelMatrix:
    """smSPK kernel of all patients on one pathway.

    Parameters
    ----------
    g : PathwayGraph
    labels : array (n_patients, n_genes)
        0/1 labels aligned to ``g.genes``.
    cfg : SmoothingConfig
    patients : sequence of str, optional
        Row identifiers; defaults to ``"0", "1", ...``.
    paths : ShortestPathSet, optional
        Precomputed paths of ``g``.

    Returns
    -------
    KernelMatrix
        ``Phi @ Phi.T`` with ``Phi = feature_matrix(labels, paths, cfg)``,
        flagged ``degenerate`` when the matrix is all zero.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[1] != g.n_genes:
        raise DataError(f"labels must be (patients, {g.n_genes}), got {labels.shape}")
    if labels.shape[0] == 0:
        raise DataError("cohort is empty")
    if patients is None:
        patients = [str(i) for i in range(labels.shape[0])]
    if paths is None:
        paths = all_shortest_paths(g)
    L = labels.astype(float)
    K = L @ gene_similarity(g, cfg, paths) @ L.T
    K = (K + K.T) / 2.0
    return KernelMatrix(tuple(patients), K, degenerate=not np.any(K))


def cosine_normalize(K: KernelMatrix) -> KernelMatrix:
    """Scale to unit self-similarity; rows with a zero diagonal become all zero."""
    v = K.values
    d = np.diag(v).copy()
    nz = d > 0
    inv = np.zeros_like(d)
    inv[nz] = 1.0 / np.sqrt(d[nz])
    out = inv[:, None] * v * inv[None, :]
    out[np.ix_(nz, nz)] = np.clip(out[np.ix_(nz, nz)], -1.0, 1.0)
    out[nz, nz] = 1.0
    return KernelMatrix(K.patients, out, degenerate=not np.any(out))


def combine_kernels(kernels) -> KernelMatrix:
    """Elementwise mean of (normalised) kernels, normalised once more."""
    kernels = list(kernels)
    if not kernels:
        raise ValueError("need at least one kernel to combine")
    patients = kernels[0].patients
    for k in kernels[1:]:
        if k.patients != patients:
            raise DataError("kernels are defined over different patient orderings")
    mean = np.mean([k.values for k in kernels], axis=0)
    return cosine_normalize(KernelMatrix(patients, mean))


def check_psd(K) -> PSDReport:
    v = np.asarray(getattr(K, "values", K), dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"matrix must be square, got shape {v.shape}")
    residual = float(np.max(np.abs(v - v.T))) if v.size else 0.0
    eig = np.linalg.eigvalsh((v + v.T) / 2) if v.size else np.zeros(1)
    lo, hi = float(eig[0]), float(eig[-1])
    return PSDReport(lo, hi, residual, lo >= -PSD_TOL * max(1.0, hi))


def format_kernel(K: KernelMatrix) -> str:
    lines = ["\t".join(K.patients)]
    lines += ["\t".join(f"{x:.12g}" for x in row) for row in K.values]
    return "\n".join(lines) + "\n"


def write_kernel(K: KernelMatrix, path) -> None:
    Path(path).write_text(format_kernel(K), encoding="utf-8")


def read_kernel(path) -> KernelMatrix:
    text = Path(path).read_text(encoding="utf-8")
    rows = [line.split("\t") for line in text.splitlines() if line.strip()]
    if not rows:
        raise DataError(f"{path}: empty kernel file")
    patients = tuple(rows[0])
    try:
        values = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if values.shape != (len(patients), len(patients)):
        raise DataError(f"{path}: expected a {len(patients)}x{len(patients)} matrix")
    return KernelMatrix(patients, values, degenerate=not np.any(values))
