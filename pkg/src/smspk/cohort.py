"""Mutation and clinical tables, and per-pathway label vectors."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CohortError
from .pathway_io import PathwayGraph

logger = logging.getLogger(__name__)

IMPACT_CATEGORIES = ("neutral", "low", "medium", "high")
DEFAULT_KEEP_IMPACTS = frozenset({"low", "medium", "high"})
MUTATION_HEADER = ("patient", "gene", "impact")
CLINICAL_HEADER = ("patient", "time_days", "event")


@dataclass(frozen=True)
class MutationCatalog:
    """Mutated genes per patient; patients are kept in sorted order."""

    patients: tuple[str, ...]
    mutated: dict[str, frozenset[str]] = field(repr=False)

    def __post_init__(self):
        if len(set(self.patients)) != len(self.patients):
            raise CohortError("patient ids must be unique")

    def genes_of(self, patient: str) -> frozenset[str]:
        try:
            return self.mutated[patient]
        except KeyError:
            raise CohortError(f"unknown patient {patient!r}") from None

    def restrict(self, patients) -> "MutationCatalog":
        """Catalog over ``patients`` in the given order; unknown ids get no mutations."""
        patients = tuple(patients)
        return MutationCatalog(
            patients, {p: self.mutated.get(p, frozenset()) for p in patients}
        )


@dataclass(frozen=True)
class LabelVector:
    pathway_id: str
    patient_id: str
    labels: np.ndarray


@dataclass(frozen=True)
class SurvivalRecord:
    patient: str
    time: float
    event: int


@dataclass(frozen=True)
class SurvivalTable:
    records: tuple[SurvivalRecord, ...]

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.patient in seen:
                raise CohortError(f"duplicate clinical record for {r.patient!r}")
            seen.add(r.patient)

    @property
    def patients(self) -> tuple[str, ...]:
        return tuple(r.patient for r in self.records)

    def arrays(self, patients) -> tuple[np.ndarray, np.ndarray]:
        """Times and event flags for ``patients`` in the given order."""
        lookup = {r.patient: r for r in self.records}
        try:
            recs = [lookup[p] for p in patients]
        except KeyError as exc:
            raise CohortError(f"no clinical record for patient {exc.args[0]!r}") from None
        times = np.array([r.time for r in recs], dtype=float)
        events = np.array([r.event for r in recs], dtype=np.int64)
        return times, events

    @classmethod
    def from_arrays(cls, patients, times, events) -> "SurvivalTable":
        return cls(tuple(
            SurvivalRecord(str(p), float(t), int(e)) for p, t, e in zip(patients, times, events)
        ))


def _read_tsv(text: str, header: tuple[str, ...], what: str):
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    rows = list(reader)
    if not rows:
        raise CohortError(f"{what} file is empty")
    got = tuple(c.strip() for c in rows[0])
    if got != header:
        raise CohortError(f"{what} header must be {'<TAB>'.join(header)}, got {got}", line=1)
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CohortError(f"expected {len(header)} columns, got {len(row)}", line=lineno)
        yield lineno, [c.strip() for c in row]


def load_mutations(text: str, keep_impacts=DEFAULT_KEEP_IMPACTS) -> MutationCatalog:
    """Parse a ``patient/gene/impact`` TSV, dropping rows outside ``keep_impacts``.

    A patient whose every row is filtered out stays in the catalog with an
    empty gene set.
    """
    keep = frozenset(keep_impacts)
    bad = keep - set(IMPACT_CATEGORIES)
    if bad:
        raise CohortError(f"unknown impact categories {sorted(bad)}")
    mutated: dict[str, set[str]] = {}
    for lineno, (patient, gene, impact) in _read_tsv(text, MUTATION_HEADER, "mutation"):
        if impact not in IMPACT_CATEGORIES:
            raise CohortError(f"unknown impact {impact!r}", line=lineno)
        if not patient or not gene:
            raise CohortError("empty patient or gene field", line=lineno)
        genes = mutated.setdefault(patient, set())
        if impact in keep:
            genes.add(gene)
    patients = tuple(sorted(mutated))
    return MutationCatalog(patients, {p: frozenset(mutated[p]) for p in patients})


def load_clinical(text: str) -> SurvivalTable:
    records = []
    for lineno, (patient, time, event) in _read_tsv(text, CLINICAL_HEADER, "clinical"):
        try:
            t = float(time)
        except ValueError:
            raise CohortError(f"time {time!r} is not a number", line=lineno) from None
        if not np.isfinite(t) or t < 0:
            raise CohortError(f"time must be non-negative, got {time}", line=lineno)
        if event not in ("0", "1"):
            raise CohortError(f"event must be 0 or 1, got {event!r}", line=lineno)
        records.append(SurvivalRecord(patient, t, int(event)))
    return SurvivalTable(tuple(records))


def label_vector(cat: MutationCatalog, patient: str, g: PathwayGraph) -> LabelVector:
    genes = cat.genes_of(patient)
    labels = np.fromiter((gene in genes for gene in g.genes), dtype=np.uint8, count=g.n_genes)
    return LabelVector(g.id, patient, labels)


def label_matrix(cat: MutationCatalog, g: PathwayGraph, patients=None) -> np.ndarray:
    """Patient-by-gene 0/1 matrix aligned to ``g``'s vertex order."""
    patients = cat.patients if patients is None else patients
    return np.array(
        [label_vector(cat, p, g).labels for p in patients], dtype=np.uint8
    ).reshape(len(patients), g.n_genes)


def align_cohort(cat: MutationCatalog, clinical: SurvivalTable) -> tuple[MutationCatalog, SurvivalTable]:
    """Restrict both tables to the clinical patients, sorted by id.

    Clinical patients without mutation rows get empty gene sets; mutation-only
    patients are dropped since they cannot enter survival analysis.
    """
    patients = tuple(sorted(clinical.patients))
    dropped = set(cat.patients) - set(patients)
    if dropped:
        logger.warning("%d patients have mutations but no clinical record; dropped", len(dropped))
    lookup = {r.patient: r for r in clinical.records}
    return cat.restrict(patients), SurvivalTable(tuple(lookup[p] for p in patients))


def format_mutations(cat: MutationCatalog, impact: str = "high") -> str:
    lines = ["\t".join(MUTATION_HEADER)]
    for p in cat.patients:
        lines += [f"{p}\t{g}\t{impact}" for g in sorted(cat.mutated[p])]
    return "\n".join(lines) + "\n"


def format_clinical(table: SurvivalTable) -> str:
    lines = ["\t".join(CLINICAL_HEADER)]
    lines += [f"{r.patient}\t{r.time:.10g}\t{r.event}" for r in table.records]
    return "\n".join(lines) + "\n"
