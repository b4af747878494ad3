"""Two-step stratification: per-pathway survival screen, then clustering on
the combined kernel of the pathways that pass.

Outputs written by :func:`sweep`::

    out/
      sweep.tsv                      one row per (k, alpha, threshold) cell
      best.tsv                       best cell per k
      kernels/alpha=<a>/<id>.tsv     normalised per-pathway kernels
      cells/k=<k>_alpha=<a>_p=<t>/
        screen.tsv  clusters.tsv  km.csv  summary.json
"""
from __future__ import annotations

import json
import logging
import math
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .clustering import ClusterAssignment, kernel_kmeans, kernel_silhouette, write_assignment
from .cohort import (
    DEFAULT_KEEP_IMPACTS,
    MutationCatalog,
    SurvivalTable,
    align_cohort,
    label_matrix,
)
from .errors import ConfigError, DataError, LogRankError, NoPathwayPassedError
from .graph import all_shortest_paths
from .kernel import KernelMatrix, combine_kernels, cosine_normalize, pathway_kernel, write_kernel
from .pathway_io import PathwayGraph
from .smoothing import SmoothingConfig
from .survival import LogRankResult, km_curves, logrank_test, write_km_csv
from .synthetic import SyntheticSpec, generate_cohort

logger = logging.getLogger(__name__)

ALLOWED_K = (2, 3, 4, 5)


@dataclass(frozen=True)
class PipelineConfig:
    k_values: tuple[int, ...] = ALLOWED_K
    alpha_values: tuple[float, ...] = (0.5,)
    p_thresholds: tuple[float, ...] = (0.05,)
    restarts: int = 100
    seed: int = 0
    tolerance: float = 1e-6
    max_iterations: int = 1000
    normalization: str = "symmetric"
    bonferroni: bool = False
    impacts: tuple[str, ...] = tuple(sorted(DEFAULT_KEEP_IMPACTS))

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "alpha_values", tuple(float(a) for a in self.alpha_values))
        object.__setattr__(self, "p_thresholds", tuple(float(p) for p in self.p_thresholds))
        object.__setattr__(self, "impacts", tuple(self.impacts))
        if not self.k_values:
            raise ConfigError("at least one k value is required")
        bad = [k for k in self.k_values if k not in ALLOWED_K]
        if bad:
            raise ConfigError(f"k values must be among {ALLOWED_K}, got {bad}")
        if not self.alpha_values:
            raise ConfigError("at least one alpha value is required")
        if not self.p_thresholds:
            raise ConfigError("at least one p-value threshold is required")
        for t in self.p_thresholds:
            if not 0.0 < t < 1.0:
                raise ConfigError(f"p-value threshold must lie in (0, 1), got {t}")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        # validates alpha, tolerance, max_iterations and normalization
        for a in self.alpha_values:
            self.smoothing(a)

    def smoothing(self, alpha: float) -> SmoothingConfig:
        try:
            return SmoothingConfig(alpha, self.tolerance, self.max_iterations, self.normalization)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


_LIST_KEYS = {"k": "k_values", "alpha": "alpha_values", "p_threshold": "p_thresholds", "impacts": "impacts"}
_SCALAR_KEYS = {
    "restarts": int, "seed": int, "tolerance": float, "max_iterations": int,
    "normalization": str, "bonferroni": lambda v: v.lower() in ("1", "true", "yes", "on"),
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into :class:`PipelineConfig` keyword arguments.

    List-valued keys (``k``, ``alpha``, ``p_threshold``, ``impacts``) take
    comma-separated values.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            if key in _LIST_KEYS:
                items = [v.strip() for v in value.split(",") if v.strip()]
                conv = {"k": int, "alpha": float, "p_threshold": float, "impacts": str}[key]
                out[_LIST_KEYS[key]] = tuple(conv(v) for v in items)
            elif key in _SCALAR_KEYS:
                out[key] = _SCALAR_KEYS[key](value)
            else:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: {exc}") from None
    return out


def load_config(path=None, **overrides) -> PipelineConfig:
    """Defaults, then the config file, then non-``None`` keyword overrides."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return PipelineConfig(**values)


@dataclass(frozen=True, eq=False)
class Cohort:
    """Pathways plus aligned mutation and clinical tables."""

    pathways: tuple[PathwayGraph, ...]
    catalog: MutationCatalog
    clinical: SurvivalTable
    labels: dict = field(repr=False)

    @property
    def patients(self) -> tuple[str, ...]:
        return self.catalog.patients

    @classmethod
    def build(cls, pathways, catalog: MutationCatalog, clinical: SurvivalTable) -> "Cohort":
        pathways = tuple(sorted(pathways, key=lambda g: g.id))
        if not pathways:
            raise DataError("no pathways given")
        ids = [g.id for g in pathways]
        if len(set(ids)) != len(ids):
            raise DataError("pathway ids must be unique")
        catalog, clinical = align_cohort(catalog, clinical)
        if not catalog.patients:
            raise DataError("cohort has no patients with clinical data")
        labels = {g.id: label_matrix(catalog, g) for g in pathways}
        return cls(pathways, catalog, clinical, labels)


def pathway_seed(seed: int, pathway_id: str) -> int:
    """Clustering seed for one pathway, independent of which others are present."""
    ss = np.random.SeedSequence([seed, zlib.crc32(pathway_id.encode("utf-8"))])
    return int(ss.generate_state(1)[0] % (2**31))


@dataclass(frozen=True)
class ScreenEntry:
    pathway_id: str
    p_value: float
    statistic: float
    degenerate: bool
    cluster_sizes: tuple[int, ...] = ()
    passed: bool = False
    adjusted_p: float = float("nan")


@dataclass(frozen=True)
class ScreenReport:
    k: int
    alpha: float
    p_threshold: float
    entries: tuple[ScreenEntry, ...]

    @property
    def passing(self) -> list[str]:
        return [e.pathway_id for e in self.entries if e.passed]

    def with_threshold(self, p_threshold: float) -> "ScreenReport":
        """Re-apply the pass rule at another threshold without re-clustering."""
        entries = tuple(
            replace(e, passed=(not e.degenerate) and e.p_value <= p_threshold) for e in self.entries
        )
        return ScreenReport(self.k, self.alpha, p_threshold, entries)

    def to_tsv(self) -> str:
        lines = ["pathway\tp_value\tstatistic\tbonferroni_p\tdegenerate\tpassed\tcluster_sizes"]
        for e in self.entries:
            lines.append(
                f"{e.pathway_id}\t{_fmt(e.p_value)}\t{_fmt(e.statistic)}\t{_fmt(e.adjusted_p)}\t"
                f"{int(e.degenerate)}\t{int(e.passed)}\t{','.join(map(str, e.cluster_sizes))}"
            )
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6g}"


def pathway_kernels(cohort: Cohort, alpha: float, cfg: PipelineConfig) -> dict[str, KernelMatrix]:
    """Cosine-normalised smSPK kernel for each pathway at one alpha.

    A kernel is flagged degenerate when the raw kernel is all zero, i.e. no
    patient carries a mutation in the pathway.
    """
    smoothing = cfg.smoothing(alpha)
    out = {}
    for g in cohort.pathways:
        raw = pathway_kernel(g, cohort.labels[g.id], smoothing, cohort.patients, all_shortest_paths(g))
        K = cosine_normalize(raw)
        out[g.id] = KernelMatrix(K.patients, K.values, degenerate=raw.degenerate)
    return out


def _screen_one(pid, K, clinical, k, cfg):
    if K.degenerate:
        return ScreenEntry(pid, float("nan"), float("nan"), True)
    assignment = kernel_kmeans(K, k, restarts=cfg.restarts, seed=pathway_seed(cfg.seed, pid))
    try:
        lr = logrank_test(clinical, assignment)
    except LogRankError as exc:
        logger.info("pathway %s: log-rank undefined (%s)", pid, exc)
        return ScreenEntry(pid, float("nan"), float("nan"), True, tuple(assignment.sizes()))
    return ScreenEntry(pid, lr.p_value, lr.statistic, False, tuple(assignment.sizes()))


def screen_pathways(
    cohort: Cohort,
    k: int,
    alpha: float,
    cfg: PipelineConfig,
    p_threshold: float | None = None,
    kernels: dict[str, KernelMatrix] | None = None,
) -> tuple[ScreenReport, dict[str, KernelMatrix]]:
    """Cluster patients on each pathway alone and test survival separation.

    A pathway passes when its log-rank p-value is at most ``p_threshold``
    (default: the first configured threshold). Pathways with an all-zero
    kernel, or whose clusters make the log-rank test undefined, are marked
    degenerate and fail.
    """
    if not cohort.pathways:
        raise DataError("no pathways to screen")
    if kernels is None:
        kernels = pathway_kernels(cohort, alpha, cfg)
    threshold = cfg.p_thresholds[0] if p_threshold is None else p_threshold
    entries = [_screen_one(g.id, kernels[g.id], cohort.clinical, k, cfg) for g in cohort.pathways]
    m = len(entries)
    entries = [
        replace(e, adjusted_p=min(1.0, e.p_value * m)) if cfg.bonferroni and not e.degenerate else e
        for e in entries
    ]
    report = ScreenReport(k, alpha, threshold, tuple(entries)).with_threshold(threshold)
    return report, kernels


@dataclass(frozen=True, eq=False)
class FinalResult:
    pathway_ids: tuple[str, ...]
    kernel: KernelMatrix
    assignment: ClusterAssignment
    logrank: LogRankResult
    silhouette: float


def finalize(
    kernels,
    k: int,
    clinical: SurvivalTable,
    cfg: PipelineConfig,
    out_dir=None,
    pathway_ids=None,
) -> FinalResult:
    """Cluster on the combined kernel of the passing pathways and evaluate it."""
    kernels = list(kernels)
    if not kernels:
        raise NoPathwayPassedError(None)
    combined = combine_kernels(kernels)
    assignment = kernel_kmeans(combined, k, restarts=cfg.restarts, seed=cfg.seed)
    lr = logrank_test(clinical, assignment)
    sil = kernel_silhouette(combined, assignment)
    ids = tuple(pathway_ids) if pathway_ids is not None else ()
    result = FinalResult(ids, combined, assignment, lr, sil)
    if out_dir is not None:
        write_final(result, clinical, out_dir)
    return result


def write_final(result: FinalResult, clinical: SurvivalTable, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_assignment(result.assignment, out / "clusters.tsv")
    write_km_csv(km_curves(clinical, result.assignment), out / "km.csv")
    summary = {
        "pathways": list(result.pathway_ids),
        "k": result.assignment.k,
        "cluster_sizes": result.assignment.sizes(),
        "objective": round(result.assignment.objective, 10),
        "logrank_statistic": round(result.logrank.statistic, 10),
        "logrank_df": result.logrank.degrees_of_freedom,
        "logrank_p": float(f"{result.logrank.p_value:.10g}"),
        "silhouette": round(result.silhouette, 10),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class SweepCell:
    k: int
    alpha: float
    p_threshold: float
    n_passed: int
    status: str
    final_p: float = float("nan")
    statistic: float = float("nan")
    silhouette: float = float("nan")
    cluster_sizes: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def name(self) -> str:
        return f"k={self.k}_alpha={self.alpha:g}_p={self.p_threshold:g}"


SWEEP_HEADER = "k\talpha\tp_threshold\tn_passed\tstatus\tfinal_p\tstatistic\tsilhouette\tcluster_sizes"


@dataclass(frozen=True)
class SweepReport:
    cells: tuple[SweepCell, ...]

    def best_per_k(self) -> dict[int, SweepCell]:
        """Lowest final log-rank p per k; ties go to the higher silhouette."""
        best = {}
        for c in self.cells:
            if not c.ok:
                continue
            cur = best.get(c.k)
            if cur is None or (c.final_p, -c.silhouette) < (cur.final_p, -cur.silhouette):
                best[c.k] = c
        return dict(sorted(best.items()))

    @staticmethod
    def _row(c: SweepCell) -> str:
        return (
            f"{c.k}\t{c.alpha:g}\t{c.p_threshold:g}\t{c.n_passed}\t{c.status}\t{_fmt(c.final_p)}\t"
            f"{_fmt(c.statistic)}\t{_fmt(c.silhouette)}\t{','.join(map(str, c.cluster_sizes))}"
        )

    def to_tsv(self) -> str:
        return "\n".join([SWEEP_HEADER] + [self._row(c) for c in self.cells]) + "\n"

    def best_tsv(self) -> str:
        return "\n".join([SWEEP_HEADER] + [self._row(c) for c in self.best_per_k().values()]) + "\n"


def sweep(cfg: PipelineConfig, cohort: Cohort, out_dir=None) -> SweepReport:
    """Run screen and finalize over every (k, alpha, threshold) combination.

    Kernels are computed once per alpha and screens once per (k, alpha);
    thresholds only change which pathways enter the final kernel.
    """
    out = Path(out_dir) if out_dir is not None else None
    cells = []
    for alpha in cfg.alpha_values:
        kernels = pathway_kernels(cohort, alpha, cfg)
        if out is not None:
            kdir = out / "kernels" / f"alpha={alpha:g}"
            kdir.mkdir(parents=True, exist_ok=True)
            for pid, K in kernels.items():
                write_kernel(K, kdir / f"{pid}.tsv")
        for k in cfg.k_values:
            base, _ = screen_pathways(cohort, k, alpha, cfg, kernels=kernels)
            for t in cfg.p_thresholds:
                report = base.with_threshold(t)
                passing = report.passing
                cell_dir = None
                cell = SweepCell(k, alpha, t, len(passing), "no_pathway_passed")
                if out is not None:
                    cell_dir = out / "cells" / cell.name
                    cell_dir.mkdir(parents=True, exist_ok=True)
                    (cell_dir / "screen.tsv").write_text(report.to_tsv())
                if passing:
                    try:
                        res = finalize(
                            [kernels[p] for p in passing], k, cohort.clinical, cfg, cell_dir, passing
                        )
                    except LogRankError as exc:
                        logger.warning("cell %s: final log-rank undefined (%s)", cell.name, exc)
                        cell = replace(cell, status="degenerate_final")
                    else:
                        cell = replace(
                            cell, status="ok", final_p=res.logrank.p_value,
                            statistic=res.logrank.statistic, silhouette=res.silhouette,
                            cluster_sizes=tuple(res.assignment.sizes()),
                        )
                logger.info("cell %s: %d passing, status %s", cell.name, len(passing), cell.status)
                cells.append(cell)
    report = SweepReport(tuple(cells))
    if out is not None:
        (out / "sweep.tsv").write_text(report.to_tsv())
        (out / "best.tsv").write_text(report.best_tsv())
    return report


def run_pipeline(cohort: Cohort, k: int, alpha: float, cfg: PipelineConfig, p_threshold=None, out_dir=None):
    """Single screen + finalize run. Raises :class:`NoPathwayPassedError`."""
    report, kernels = screen_pathways(cohort, k, alpha, cfg, p_threshold)
    passing = report.passing
    if not passing:
        raise NoPathwayPassedError(report)
    result = finalize([kernels[p] for p in passing], k, cohort.clinical, cfg, out_dir, passing)
    return report, result


# -- injected-signal cohorts ------------------------------------------------

def random_pathway(pathway_id: str, n_genes: int, rng: np.random.Generator, extra_edges: int = 3) -> PathwayGraph:
    """Random connected gene graph: a random tree plus a few chords."""
    genes = [f"{pathway_id}_G{i:02d}" for i in range(n_genes)]
    edges = {(int(rng.integers(v)), v) for v in range(1, n_genes)}
    for _ in range(extra_edges):
        a, b = rng.choice(n_genes, size=2, replace=False)
        edges.add((int(min(a, b)), int(max(a, b))))
    return PathwayGraph.from_edges(pathway_id, genes, [(genes[a], genes[b]) for a, b in edges])


@dataclass(frozen=True, eq=False)
class InjectedSignal:
    cohort: Cohort
    signal_id: str
    null_ids: tuple[str, ...]
    true_group: dict = field(repr=False)


def injected_signal_cohort(
    seed: int,
    n_patients: int = 120,
    n_pathways: int = 10,
    groups: int = 3,
    p_in: float = 0.8,
    p_out: float = 0.02,
    null_rate: float = 0.05,
    survival_means=(300.0, 900.0, 1800.0),
    censor_fraction: float = 0.1,
    signal_genes: int = 30,
    signal_pathway: PathwayGraph | None = None,
) -> InjectedSignal:
    """Cohort whose survival depends on mutations in exactly one pathway.

    All pathways are random graphs from :func:`random_pathway` unless
    ``signal_pathway`` is given. The signal pathway's labels come from
    :func:`generate_cohort`; each group gets exponential survival times with
    its own mean. The other pathways get mutations drawn at ``null_rate``
    independently of group. A ``censor_fraction`` of patients is censored uniformly before
    their event time. Times are whole days (at least 1).
    """
    if n_patients % groups:
        raise ConfigError("n_patients must be divisible by groups")
    rng = np.random.default_rng(seed)
    if signal_pathway is None:
        signal = random_pathway("signal", signal_genes, rng)
    else:
        signal = PathwayGraph("signal", signal_pathway.genes, signal_pathway.adjacency)
    per_group = n_patients // groups
    syn = generate_cohort(
        SyntheticSpec(signal, groups, per_group, p_in, p_out, int(rng.integers(2**31)))
    )
    order = rng.permutation(n_patients)  # shuffle so patient ids do not encode groups
    truth = syn.true_group[order]
    patients = tuple(f"P{i:03d}" for i in range(n_patients))
    mutated = {p: set() for p in patients}
    for i, p in enumerate(patients):
        mutated[p].update(signal.genes[j] for j in np.flatnonzero(syn.labels[order[i]]))

    pathways = [signal]
    null_ids = []
    for j in range(n_pathways - 1):
        pid = f"null{j + 1:02d}"
        g = random_pathway(pid, int(rng.integers(15, 36)), rng)
        hits = rng.random((n_patients, g.n_genes)) < null_rate
        for i, p in enumerate(patients):
            mutated[p].update(g.genes[c] for c in np.flatnonzero(hits[i]))
        pathways.append(g)
        null_ids.append(pid)

    means = np.asarray(survival_means, dtype=float)[truth]
    event_time = rng.exponential(means)
    censored = rng.random(n_patients) < censor_fraction
    times = np.where(censored, rng.uniform(0.0, 1.0, n_patients) * event_time, event_time)
    times = np.maximum(np.ceil(times), 1.0)
    events = (~censored).astype(int)

    catalog = MutationCatalog(patients, {p: frozenset(v) for p, v in mutated.items()})
    clinical = SurvivalTable.from_arrays(patients, times, events)
    cohort = Cohort.build(pathways, catalog, clinical)
    return InjectedSignal(cohort, "signal", tuple(null_ids), dict(zip(patients, truth.tolist())))
