"""Synthetic cohorts with planted driver paths, and the accuracy grid driver."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .clustering import kernel_kmeans
from .errors import ConfigError, DataError
from .graph import ShortestPath, ShortestPathSet, all_shortest_paths
from .kernel import cosine_normalize, pathway_kernel
from .pathway_io import PathwayGraph, preprocess, parse_pathway_file
from .smoothing import SmoothingConfig

GRID_HEADER = "p_in,p_out,alpha,repetitions,mean_accuracy,sd_accuracy"


def benchmark_pathway() -> PathwayGraph:
    """The bundled 45-gene connected benchmark graph."""
    text = resources.files("smspk").joinpath("data/benchmark45.pathway").read_text("utf-8")
    return preprocess(parse_pathway_file(text, "benchmark45"))


@dataclass(frozen=True)
class SyntheticSpec:
    pathway: PathwayGraph
    groups: int = 3
    patients_per_group: int = 200
    p_in: float = 0.6
    p_out: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if self.groups < 2:
            raise ConfigError("groups must be at least 2")
        if self.patients_per_group < 1:
            raise ConfigError("patients_per_group must be positive")


@dataclass(frozen=True, eq=False)
class SyntheticCohort:
    patients: tuple[str, ...]
    labels: np.ndarray
    true_group: np.ndarray
    driver_paths: tuple[ShortestPath, ...]


def eligible_driver_paths(paths: ShortestPathSet, diam: int) -> list[ShortestPath]:
    """Canonical paths whose edge count lies in ``[ceil(diam/2), diam]``."""
    lo = math.ceil(diam / 2)
    return [p for p in paths.paths if lo <= p.length <= diam]


def generate_cohort(spec: SyntheticSpec, paths: ShortestPathSet | None = None) -> SyntheticCohort:
    """Draw one driver path per group and sample patient mutations.

    Genes on the group's driver path are mutated with probability ``p_in``,
    every other pathway gene with ``p_out``. Patients are ordered group by
    group.
    """
    g = spec.pathway
    if paths is None:
        paths = all_shortest_paths(g)
    diam = max((p.length for p in paths.paths), default=0)
    eligible = eligible_driver_paths(paths, diam)
    if len(eligible) < spec.groups:
        raise DataError(
            f"only {len(eligible)} eligible driver paths for {spec.groups} groups"
        )
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(len(eligible), size=spec.groups, replace=False)
    drivers = tuple(eligible[i] for i in chosen)

    n = spec.patients_per_group
    blocks = []
    for path in drivers:
        on_path = np.zeros(g.n_genes, dtype=bool)
        on_path[list(path.vertices)] = True
        prob = np.where(on_path, spec.p_in, spec.p_out)
        blocks.append((rng.random((n, g.n_genes)) < prob).astype(np.uint8))
    labels = np.vstack(blocks)
    truth = np.repeat(np.arange(spec.groups), n)
    width = len(str(labels.shape[0] - 1))
    patients = tuple(f"S{i:0{width}d}" for i in range(labels.shape[0]))
    return SyntheticCohort(patients, labels, truth, drivers)


def clustering_accuracy(predicted, truth) -> float:
    """Best fraction of agreeing labels over all one-to-one cluster matchings."""
    pred = np.asarray(getattr(predicted, "labels", predicted), dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError("predicted and true labels differ in length")
    if pred.size == 0:
        raise ValueError("no labels to compare")
    kp, kt = int(pred.max()) + 1, int(truth.max()) + 1
    size = max(kp, kt)
    if size > 6:
        raise ValueError("exhaustive matching supports at most 6 clusters")
    confusion = np.zeros((size, size), dtype=np.int64)
    np.add.at(confusion, (pred, truth), 1)
    best = max(
        confusion[np.arange(size), perm].sum() for perm in itertools.permutations(range(size))
    )
    return best / pred.size


@dataclass(frozen=True)
class GridRow:
    p_in: float
    p_out: float
    alpha: float
    repetitions: int
    mean_accuracy: float
    sd_accuracy: float
    accuracies: tuple[float, ...] = ()

    def csv_line(self) -> str:
        return (
            f"{self.p_in:g},{self.p_out:g},{self.alpha:g},{self.repetitions},"
            f"{self.mean_accuracy:.6f},{self.sd_accuracy:.6f}"
        )


def _rep_seed(seed, i_in, i_out, rep):
    return int(np.random.SeedSequence([seed, i_in, i_out, rep]).generate_state(1)[0])


def _run_cell(args):
    (pathway, paths, i_in, p_in, i_out, p_out, alphas, repetitions, seed,
     groups, per_group, restarts, smoothing, normalize) = args
    acc = np.empty((len(alphas), repetitions))
    for rep in range(repetitions):
        rs = _rep_seed(seed, i_in, i_out, rep)
        cohort = generate_cohort(
            SyntheticSpec(pathway, groups, per_group, p_in, p_out, rs), paths
        )
        for j, alpha in enumerate(alphas):
            cfg = SmoothingConfig(alpha=alpha, **smoothing)
            K = pathway_kernel(pathway, cohort.labels, cfg, cohort.patients, paths)
            if normalize:
                K = cosine_normalize(K)
            assignment = kernel_kmeans(K, groups, restarts=restarts, seed=rs)
            acc[j, rep] = clustering_accuracy(assignment, cohort.true_group)
    return acc


def run_simulation_grid(
    pathway: PathwayGraph,
    p_in_values,
    p_out_values,
    alpha_values,
    repetitions: int = 100,
    seed: int = 0,
    groups: int = 3,
    patients_per_group: int = 200,
    restarts: int = 100,
    n_jobs: int = 1,
    smoothing: dict | None = None,
    normalize: bool = True,
) -> list[GridRow]:
    """Mean and standard deviation of clustering accuracy over a parameter grid.

    Repetition ``r`` of a ``(p_in, p_out)`` pair draws the same cohort for
    every alpha, so alpha effects are compared on identical data. Rows come
    back in grid order ``p_in`` > ``p_out`` > ``alpha`` regardless of
    ``n_jobs``. With ``normalize`` the kernel is cosine-normalised before
    clustering, as in the pathway pipeline.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be at least 1")
    alphas = tuple(float(a) for a in alpha_values)
    smoothing = dict(smoothing or {})
    paths = all_shortest_paths(pathway)
    tasks = [
        (pathway, paths, i, float(pi), j, float(po), alphas, repetitions, seed,
         groups, patients_per_group, restarts, smoothing, normalize)
        for i, pi in enumerate(p_in_values)
        for j, po in enumerate(p_out_values)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    rows = []
    for task, acc in zip(tasks, results):
        p_in, p_out = task[3], task[5]
        for j, alpha in enumerate(alphas):
            a = acc[j]
            sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
            rows.append(GridRow(p_in, p_out, alpha, repetitions, float(a.mean()), sd, tuple(a.tolist())))
    return rows


def format_grid(rows) -> str:
    return "\n".join([GRID_HEADER] + [r.csv_line() for r in rows]) + "\n"


def write_grid(rows, path) -> None:
    Path(path).write_text(format_grid(rows), encoding="utf-8")
