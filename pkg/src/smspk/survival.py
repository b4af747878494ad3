"""Kaplan-Meier curves and the k-sample log-rank test."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .clustering import ClusterAssignment
from .cohort import SurvivalTable
from .errors import LogRankError

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class KMStep:
    time: float
    survival: float
    at_risk: int
    events: int


@dataclass(frozen=True)
class KMCurve:
    group: str
    steps: tuple[KMStep, ...]

    def survival_at(self, t: float) -> float:
        s = 1.0
        for step in self.steps:
            if step.time > t:
                break
            s = step.survival
        return s


@dataclass(frozen=True)
class LogRankResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    observed: tuple[float, ...] = ()
    expected: tuple[float, ...] = ()


def chi_square_upper_tail(x: float, df: int) -> float:
    """``P(X > x)`` for a chi-square variable with ``df`` degrees of freedom."""
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if df < 1:
        raise ValueError(f"df must be a positive integer, got {df}")
    return float(special.gammaincc(df / 2.0, x / 2.0))


def kaplan_meier(table: SurvivalTable, members, group="all") -> KMCurve:
    """Product-limit estimate over ``members``.

    One step per distinct death time. Censorings tied with a death count as
    still at risk at that time.
    """
    members = list(members)
    if not members:
        raise ValueError("cannot estimate a survival curve for an empty group")
    times, events = table.arrays(members)
    steps = []
    s = 1.0
    for t in np.unique(times[events == 1]):
        n = int(np.sum(times >= t))
        d = int(np.sum((times == t) & (events == 1)))
        s = s * (n - d) / n
        steps.append(KMStep(float(t), s, n, d))
    return KMCurve(str(group), tuple(steps))


def logrank_from_arrays(times, events, groups, k: int) -> LogRankResult:
    """Log-rank test on raw arrays; ``groups`` holds ids in ``[0, k)``."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=np.int64)
    groups = np.asarray(groups, dtype=np.int64)
    if k < 2:
        raise LogRankError("the log-rank test needs at least two groups")
    if np.bincount(groups, minlength=k)[:k].min() == 0:
        raise LogRankError("every group needs at least one patient")
    death_times = np.unique(times[events == 1])
    if death_times.size == 0:
        raise LogRankError("no deaths observed; the log-rank test is undefined")

    # at_risk[t, g] and deaths[t, g] over distinct death times
    at_risk = np.empty((death_times.size, k))
    deaths = np.empty((death_times.size, k))
    for g in range(k):
        tg = np.sort(times[groups == g])
        at_risk[:, g] = tg.size - np.searchsorted(tg, death_times, side="left")
        dg = np.sort(times[(groups == g) & (events == 1)])
        deaths[:, g] = np.searchsorted(dg, death_times, side="right") - np.searchsorted(
            dg, death_times, side="left"
        )
    n = at_risk.sum(axis=1)
    d = deaths.sum(axis=1)
    frac = at_risk / n[:, None]
    observed = deaths.sum(axis=0)
    expected = (d[:, None] * frac).sum(axis=0)
    scale = np.where(n > 1, d * (n - d) / np.where(n > 1, n - 1, 1), 0.0)
    V = np.einsum("t,tg,tgh->gh", scale, frac, np.eye(k)[None, :, :] - frac[:, None, :])
    diff = (observed - expected)[: k - 1]
    Vr = V[: k - 1, : k - 1]
    stat = float(diff @ np.linalg.pinv(Vr, rcond=PINV_RCOND, hermitian=True) @ diff)
    stat = max(stat, 0.0)
    return LogRankResult(
        stat, k - 1, chi_square_upper_tail(stat, k - 1),
        tuple(observed.tolist()), tuple(expected.tolist()),
    )


def logrank_test(table: SurvivalTable, a: ClusterAssignment) -> LogRankResult:
    """k-sample log-rank test across the clusters of ``a``."""
    times, events = table.arrays(a.patients)
    return logrank_from_arrays(times, events, a.labels, a.k)


def format_km_csv(curves) -> str:
    lines = ["group,time,survival,at_risk,events"]
    for c in curves:
        lines += [
            f"{c.group},{s.time:.10g},{s.survival:.12g},{s.at_risk},{s.events}" for s in c.steps
        ]
    return "\n".join(lines) + "\n"


def km_curves(table: SurvivalTable, a: ClusterAssignment) -> list[KMCurve]:
    return [kaplan_meier(table, a.members(c), group=c) for c in range(a.k)]


def write_km_csv(curves, path) -> None:
    Path(path).write_text(format_km_csv(curves), encoding="utf-8")
