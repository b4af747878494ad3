import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from statsmodels.duration.survfunc import survdiff

from smspk.clustering import ClusterAssignment
from smspk.cohort import SurvivalTable
from smspk.errors import LogRankError
from smspk.survival import (
    chi_square_upper_tail,
    format_km_csv,
    kaplan_meier,
    km_curves,
    logrank_from_arrays,
    logrank_test,
)


def table(times, events):
    return SurvivalTable.from_arrays([f"P{i}" for i in range(len(times))], times, events)


def assignment(groups):
    groups = np.asarray(groups)
    return ClusterAssignment(tuple(f"P{i}" for i in range(len(groups))), groups, int(groups.max()) + 1)


def brute_logrank(times, events, groups, k):
    """Direct O/E and hypergeometric covariance accumulation, one death time at a time."""
    O = np.zeros(k)
    E = np.zeros(k)
    V = np.zeros((k, k))
    for t in sorted({t for t, e in zip(times, events) if e}):
        n_g = np.array([sum(1 for ti, g in zip(times, groups) if g == c and ti >= t) for c in range(k)], float)
        d_g = np.array([sum(1 for ti, ei, g in zip(times, events, groups) if g == c and ti == t and ei) for c in range(k)], float)
        n, d = n_g.sum(), d_g.sum()
        O += d_g
        E += d * n_g / n
        if n > 1:
            for a in range(k):
                for b in range(k):
                    V[a, b] += d * (n - d) / (n - 1) * (n_g[a] / n) * ((a == b) - n_g[b] / n)
    diff = (O - E)[:-1]
    return O, E, float(diff @ np.linalg.pinv(V[:-1, :-1]) @ diff)


def test_km_hand_example():
    curve = kaplan_meier(table([1, 2, 3], [1, 1, 1]), ["P0", "P1", "P2"])
    assert [s.survival for s in curve.steps] == pytest.approx([2 / 3, 1 / 3, 0.0], abs=1e-15)
    assert curve.survival_at(0.5) == 1.0 and curve.survival_at(2.5) == pytest.approx(1 / 3)


def test_km_all_censored_is_flat():
    assert kaplan_meier(table([1, 2, 3], [0, 0, 0]), ["P0", "P1", "P2"]).steps == ()


def test_km_single_death():
    curve = kaplan_meier(table([5, 7, 8, 9], [1, 0, 0, 0]), [f"P{i}" for i in range(4)])
    assert len(curve.steps) == 1
    assert curve.steps[0].time == 5 and curve.steps[0].survival == 0.75


def test_km_deaths_before_censorings_at_ties():
    # the censored patient at t=2 is still at risk for the death at t=2
    curve = kaplan_meier(table([2, 2, 4], [1, 0, 1]), ["P0", "P1", "P2"])
    assert curve.steps[0].at_risk == 3 and curve.steps[0].survival == pytest.approx(2 / 3)


def test_km_empty_group():
    with pytest.raises(ValueError):
        kaplan_meier(table([1], [1]), [])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_km_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    t = rng.integers(1, 10, size=12)
    e = rng.integers(0, 2, size=12)
    perm = rng.permutation(12)
    a = kaplan_meier(table(t, e), [f"P{i}" for i in range(12)])
    b = kaplan_meier(table(t[perm], e[perm]), [f"P{i}" for i in range(12)])
    assert a == b


def test_logrank_hand_example():
    res = logrank_test(table([1, 2, 3, 4, 5, 6], [1] * 6), assignment([0, 0, 0, 1, 1, 1]))
    assert res.statistic == pytest.approx(5.05, abs=0.01)
    assert res.p_value == pytest.approx(0.025, abs=0.001)
    assert res.degrees_of_freedom == 1
    assert res.observed[0] == 3 and res.expected[0] == pytest.approx(1.15, abs=0.005)


def test_logrank_identical_groups():
    res = logrank_test(table([3, 5, 8, 3, 5, 8], [1, 0, 1, 1, 0, 1]), assignment([0, 0, 0, 1, 1, 1]))
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert res.p_value == pytest.approx(1.0)


def test_logrank_three_groups_with_early_censored_group():
    times = [5, 6, 7, 8, 9, 10, 1, 2, 3]
    events = [1, 1, 0, 1, 1, 1, 0, 0, 0]
    groups = [0, 0, 0, 1, 1, 1, 2, 2, 2]
    res = logrank_from_arrays(times, events, groups, 3)
    O, E, stat = brute_logrank(times, events, groups, 3)
    assert np.allclose(res.observed, O) and np.allclose(res.expected, E)
    assert res.statistic == pytest.approx(stat, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4))
def test_logrank_matches_brute_force(seed, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2 * k, 25))
    times = rng.integers(1, 12, size=n).astype(float)
    events = rng.integers(0, 2, size=n)
    events[0] = 1
    groups = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    res = logrank_from_arrays(times, events, groups, k)
    O, E, stat = brute_logrank(times, events, groups, k)
    assert np.allclose(res.observed, O) and np.allclose(res.expected, E)
    assert res.statistic == pytest.approx(stat, rel=1e-7, abs=1e-9)


def test_logrank_matches_statsmodels():
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        n = 40
        times = rng.exponential(10, size=n).round(1) + 0.1
        events = (rng.random(n) < 0.7).astype(int)
        groups = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
        res = logrank_from_arrays(times, events, groups, k)
        chisq, p = survdiff(times, events, groups)
        assert res.statistic == pytest.approx(chisq, rel=1e-8)
        assert res.p_value == pytest.approx(p, rel=1e-6, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_logrank_invariant_to_group_relabeling(seed):
    rng = np.random.default_rng(seed)
    times = rng.integers(1, 20, size=15)
    events = rng.integers(0, 2, size=15)
    events[0] = 1
    groups = np.concatenate([[0, 1, 2], rng.integers(0, 3, size=12)])
    perm = rng.permutation(3)
    a = logrank_from_arrays(times, events, groups, 3)
    b = logrank_from_arrays(times, events, perm[groups], 3)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-9, abs=1e-12)


def test_censored_at_zero_only_changes_risk_sets():
    times = [2, 4, 6, 3, 5, 7]
    events = [1, 1, 0, 1, 0, 1]
    groups = [0, 0, 0, 1, 1, 1]
    base = logrank_from_arrays(times, events, groups, 2)
    more = logrank_from_arrays(times + [0], events + [0], groups + [1], 2)
    assert more.observed == base.observed
    O, E, stat = brute_logrank(times + [0], events + [0], groups + [1], 2)
    assert np.allclose(more.expected, E) and more.statistic == pytest.approx(stat)


def test_separation_p_value_shrinks_with_group_size():
    ps = []
    for n in (3, 6, 12):
        times = np.arange(1, 2 * n + 1)
        res = logrank_from_arrays(times, np.ones(2 * n), np.repeat([0, 1], n), 2)
        ps.append(res.p_value)
    assert ps[0] > ps[1] > ps[2]


def test_logrank_errors():
    with pytest.raises(LogRankError):
        logrank_from_arrays([1, 2], [1, 1], [0, 0], 2)
    with pytest.raises(LogRankError):
        logrank_from_arrays([1, 1], [0, 0], [0, 1], 2)
    with pytest.raises(LogRankError):
        logrank_from_arrays([1, 2], [1, 1], [0, 0], 1)


def test_chi_square_examples():
    assert chi_square_upper_tail(0.0, 3) == 1.0
    assert chi_square_upper_tail(2 * math.log(2), 2) == pytest.approx(0.5, abs=1e-12)
    assert chi_square_upper_tail(3.841459, 1) == pytest.approx(0.05, abs=1e-6)
    with pytest.raises(ValueError):
        chi_square_upper_tail(-1.0, 1)


@pytest.mark.parametrize("df", range(1, 11))
def test_chi_square_matches_high_precision(df):
    for x in (0.01, 0.5, 1.0, 3.0, 7.5, 15.0, 40.0, 100.0):
        ref = float(mpmath.gammainc(df / 2, x / 2, mpmath.inf, regularized=True))
        assert abs(chi_square_upper_tail(x, df) - ref) <= 1e-10


def test_km_csv_layout():
    t = table([1, 2, 3, 4], [1, 1, 0, 1])
    text = format_km_csv(km_curves(t, assignment([0, 0, 1, 1])))
    lines = text.splitlines()
    assert lines[0] == "group,time,survival,at_risk,events"
    assert lines[1:] == ["0,1,0.5,2,1", "0,2,0,1,1", "1,4,0,1,1"]
