"""Network-propagation smoothing of mutation states along a single path.

States are propagated on the chain graph formed by the path's own vertices::

    S_{t+1} = alpha * S_t @ W + (1 - alpha) * S_0

where ``W`` is the degree-normalised chain adjacency. Because the update is
linear, smoothing every patient row on a path of ``m`` vertices reduces to
``S_0 @ M`` for an ``m x m`` propagation operator ``M`` that depends only on
``m`` and the configuration; :func:`propagation_operator` caches it.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NonConvergenceError

NORMALIZATIONS = ("symmetric", "random_walk")
SOLVERS = ("iterative", "direct")


@dataclass(frozen=True)
class SmoothingConfig:
    """Smoothing parameters.

    ``normalization="symmetric"`` uses ``D^-1/2 A D^-1/2``. ``"random_walk"``
    uses ``A D^-1``, under which every smoothed entry is a weighted average of
    neighbour states and so stays inside ``[0, 1]`` for binary input.
    """

    alpha: float = 0.5
    tolerance: float = 1e-6
    max_iterations: int = 1000
    normalization: str = "symmetric"
    solver: str = "iterative"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be a positive integer")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if self.solver == "direct" and self.alpha == 1.0:
            raise ConfigError("the direct solver needs alpha < 1")


def path_normalized_adjacency(path_len: int, normalization: str = "symmetric") -> np.ndarray:
    """Degree-normalised adjacency of a chain on ``path_len`` vertices."""
    if path_len < 2:
        raise ValueError(f"a path needs at least 2 vertices, got {path_len}")
    a = np.zeros((path_len, path_len))
    idx = np.arange(path_len - 1)
    a[idx, idx + 1] = a[idx + 1, idx] = 1.0
    deg = a.sum(axis=1)
    if normalization == "symmetric":
        inv = 1.0 / np.sqrt(deg)
        return inv[:, None] * a * inv[None, :]
    if normalization == "random_walk":
        return a / deg[None, :]
    raise ValueError(f"unknown normalization {normalization!r}")


def smooth_iterative(S0, cfg: SmoothingConfig, adjacency=None) -> np.ndarray:
    """Iterate the propagation until the max-abs change drops below ``cfg.tolerance``.

    ``S0`` is patients x path positions. Raises :class:`NonConvergenceError`
    when ``cfg.max_iterations`` is exhausted.
    """
    S0 = np.atleast_2d(np.asarray(S0, dtype=float))
    if cfg.alpha == 0.0:
        return S0.copy()
    W = adjacency if adjacency is not None else path_normalized_adjacency(
        S0.shape[1], cfg.normalization
    )
    base = (1.0 - cfg.alpha) * S0
    S = S0
    residual = np.inf
    for _ in range(cfg.max_iterations):
        nxt = cfg.alpha * (S @ W) + base
        residual = np.max(np.abs(nxt - S)) if nxt.size else 0.0
        S = nxt
        if residual < cfg.tolerance:
            return S
    raise NonConvergenceError(cfg.max_iterations, residual)


def smooth_direct(S0, alpha: float, normalization: str = "symmetric") -> np.ndarray:
    """Fixed point of the propagation by a dense linear solve."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"direct smoothing needs 0 <= alpha < 1, got {alpha}")
    S0 = np.atleast_2d(np.asarray(S0, dtype=float))
    if alpha == 0.0:
        return S0.copy()
    W = path_normalized_adjacency(S0.shape[1], normalization)
    # S (I - aW) = (1-a) S0  <=>  (I - aW)^T S^T = (1-a) S0^T
    lhs = (np.eye(S0.shape[1]) - alpha * W).T
    return np.linalg.solve(lhs, (1.0 - alpha) * S0.T).T


@lru_cache(maxsize=512)
def _operator(path_len, alpha, tolerance, max_iterations, normalization, solver):
    eye = np.eye(path_len)
    if solver == "direct":
        op = smooth_direct(eye, alpha, normalization)
    else:
        cfg = SmoothingConfig(alpha, tolerance, max_iterations, normalization, solver)
        op = smooth_iterative(eye, cfg)
    op.setflags(write=False)
    return op


def propagation_operator(path_len: int, cfg: SmoothingConfig) -> np.ndarray:
    """Matrix ``M`` with ``smooth(S0) == S0 @ M`` for paths of ``path_len`` vertices.

    With the iterative solver ``M`` is obtained by iterating on the identity,
    which is the same linear recursion applied to every basis row at once.
    """
    return _operator(
        path_len, cfg.alpha, cfg.tolerance, cfg.max_iterations, cfg.normalization, cfg.solver
    )


def smooth_path_states(S0, cfg: SmoothingConfig) -> np.ndarray:
    S0 = np.atleast_2d(np.asarray(S0, dtype=float))
    return S0 @ propagation_operator(S0.shape[1], cfg)
