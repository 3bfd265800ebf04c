from __future__ import annotations

from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viralimpact import causal
from viralimpact.causal import (Classification, ImpactConfig, ImpactResult, OverlapPolicy,
                                WindowExcluded, build_window, classify, estimate_impact,
                                run_all_windows, tail_area_p_value)
from viralimpact.domain import CalendarGrid
from viralimpact.metrics import EngagementSeries
from viralimpact.ssm import SamplerSettings

FAST = ImpactConfig(sampler=SamplerSettings(n_draws=300, burn_in=100))


def series(values, viral_days=()):
    values = np.asarray(values, dtype=float)
    return EngagementSeries("s", CalendarGrid(date(2020, 1, 1), values.size), values,
                            frozenset(viral_days))


# --- windows -------------------------------------------------------------------

def test_window_index_arithmetic():
    pre, post = build_window(series(np.arange(60), {20}), 20, 2)
    np.testing.assert_array_equal(pre, np.arange(6, 20))
    np.testing.assert_array_equal(post, np.arange(21, 35))


def test_overlap_excludes_event():
    with pytest.raises(WindowExcluded) as info:
        build_window(series(np.arange(60), {20, 25}), 20, 2)
    assert info.value.reason == "overlap"


def test_overlap_dummy_policy_blanks_days():
    pre, post = build_window(series(np.arange(60), {8, 20, 25}), 20, 2,
                             OverlapPolicy.DUMMY_IGNORE_DAYS)
    assert np.isnan(pre[8 - 6]) and np.isnan(post[25 - 21])
    assert np.count_nonzero(np.isnan(pre)) + np.count_nonzero(np.isnan(post)) == 2


def test_truncated_window():
    with pytest.raises(WindowExcluded) as info:
        build_window(series(np.arange(60)), 10, 2)
    assert info.value.reason == "truncated-window"


def test_viral_day_outside_window_is_ignored():
    pre, post = build_window(series(np.arange(60), {20, 50}), 20, 2)
    assert not np.isnan(pre).any() and not np.isnan(post).any()


# --- classification and p-values -------------------------------------------------

@pytest.mark.parametrize("p,eff,expected", [
    (0.01, 2.0, Classification.GROWTH), (0.01, -2.0, Classification.DECREASE),
    (0.05, 2.0, Classification.NO_EFFECT), (0.5, -3.0, Classification.NO_EFFECT),
])
def test_classify(p, eff, expected):
    assert classify(p, eff, 0.05) is expected


@given(st.floats(0, 1), st.floats(-100, 100, allow_nan=False))
def test_classification_is_exactly_one_class(p, eff):
    c = classify(p, eff, 0.05)
    assert (c is Classification.GROWTH) + (c is Classification.DECREASE) + \
        (c is Classification.NO_EFFECT) == 1
    assert (c is not Classification.NO_EFFECT) == (p < 0.05 and eff != 0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.floats(-1e6, 1e6))
def test_p_value_bounds(draws, observed):
    draws = np.array(draws)
    p = tail_area_p_value(draws, observed)
    assert 1 / (1 + draws.size) <= p <= 1


def test_p_value_extreme_observation_is_smallest():
    draws = np.arange(999.0)
    assert tail_area_p_value(draws, 1e9) == pytest.approx(2 / 1000)
    assert tail_area_p_value(draws, 499.0) == 1.0


def test_p_value_matches_counting_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        draws = rng.normal(size=int(rng.integers(1, 300)))
        obs = rng.normal() * 2
        above = sum(1 for d in draws if d >= obs)
        below = sum(1 for d in draws if d <= obs)
        oracle = min(1.0, 2 * (1 + min(above, below)) / (1 + len(draws)))
        assert tail_area_p_value(draws, obs) == oracle


# --- estimation ------------------------------------------------------------------

def test_null_by_construction():
    rng = np.random.default_rng(1)
    pre = 10 + rng.normal(0, 0.5, 28)
    first = estimate_impact(pre, np.zeros(28), FAST, seed=5)
    res = estimate_impact(pre, first.counterfactual_mean.copy(), FAST, seed=5)
    assert res.avg_absolute_effect == 0.0
    assert res.p_value > 0.9
    assert res.classification is Classification.NO_EFFECT


def test_injected_step_is_growth():
    hits = 0
    for r in range(100):
        n = causal.WINDOW_WEEKS[r % 5]
        y = 10 + np.random.default_rng(1000 + r).normal(0, 0.5, 14 * n)
        y[7 * n:] += 5
        res = estimate_impact(y[:7 * n], y[7 * n:], seed=r)
        hits += res.classification is Classification.GROWTH and res.p_value < 0.05
    assert hits >= 95


def test_null_false_positive_rate():
    ps = []
    for r in range(500):
        n = causal.WINDOW_WEEKS[r % 5]
        y = 10 + np.random.default_rng(r).normal(0, 0.5, 14 * n)
        ps.append(estimate_impact(y[:7 * n], y[7 * n:], seed=r).p_value)
    assert 0.02 <= np.mean(np.array(ps) < 0.05) <= 0.10


@pytest.mark.parametrize("c", [-250.0, 3.0, 1e4])
def test_level_shift_invariance(c):
    rng = np.random.default_rng(2)
    pre = 10 + rng.normal(0, 0.5, 21)
    post = 11 + rng.normal(0, 0.5, 21)
    a = estimate_impact(pre, post, FAST, seed=3)
    b = estimate_impact(pre + c, post + c, FAST, seed=3)
    assert b.avg_absolute_effect == pytest.approx(a.avg_absolute_effect, abs=1e-6)
    assert b.p_value == a.p_value


def test_cumulative_is_sum_of_daily_gaps():
    rng = np.random.default_rng(3)
    pre, post = 5 + rng.normal(0, 1, 14), 7 + rng.normal(0, 1, 14)
    res = estimate_impact(pre, post, FAST, seed=1)
    assert res.cumulative_effect == pytest.approx(res.avg_absolute_effect * 14, rel=1e-12)


def test_empty_post_period_excluded():
    res = estimate_impact(np.arange(14.0), np.full(14, np.nan), FAST)
    assert res.excluded and res.reason == "empty-post-period"


def test_result_round_trips_through_dict():
    res = estimate_impact(np.arange(14.0), np.arange(14.0, 28.0), FAST, seed=2,
                          source_id="s", post_id="p", n_weeks=2)
    back = ImpactResult.from_dict(res.to_dict())
    assert back.to_dict() == res.to_dict()


# --- all windows -------------------------------------------------------------------

def noisy(length, seed=0):
    return 10 + np.random.default_rng(seed).normal(0, 0.5, length)


def test_full_history_gives_five_results():
    s = series(noisy(120), {60})
    out = run_all_windows(s, 60, "p", FAST, global_seed=1)
    assert sorted(out) == [2, 3, 4, 5, 6]
    assert not any(r.excluded for r in out.values())


def test_event_near_grid_start():
    s = series(noisy(120), {21})
    out = run_all_windows(s, 21, "p", FAST, global_seed=1)
    assert [n for n, r in out.items() if not r.excluded] == [2, 3]
    assert all(out[n].reason == "truncated-window" for n in (4, 5, 6))


def test_run_all_windows_deterministic():
    s = series(noisy(120), {60})
    a = run_all_windows(s, 60, "p", FAST, global_seed=4)
    b = run_all_windows(s, 60, "p", FAST, global_seed=4)
    assert [r.to_dict() for r in a.values()] == [r.to_dict() for r in b.values()]


def test_seeds_differ_per_window_and_event():
    seeds = {causal.derive_seed(0, "s", p, n) for p in ("a", "b") for n in range(2, 7)}
    assert len(seeds) == 10
    assert causal.derive_seed(0, "s", "a", 2) == causal.derive_seed(0, "s", "a", 2)
