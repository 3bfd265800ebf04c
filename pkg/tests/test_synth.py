from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from viralimpact import causal, synth
from viralimpact.domain import Platform
from viralimpact.metrics import (DetectionConfig, detect_viral, engagement_series,
                                 source_metrics)
from viralimpact.ssm import SamplerSettings
from viralimpact.synth import GenerationError, InjectedEvent, ScenarioSpec

FAST = causal.ImpactConfig(sampler=SamplerSettings(n_draws=200, burn_in=50))


def noiseless(**kw):
    base = dict(n_sources=3, days=120, noise_sd=0.0, count_log_sd=0.0,
                trend_slopes=(0.0, 0.05, -0.03))
    base.update(kw)
    return ScenarioSpec(**base)


def test_noiseless_baseline_extends_trend_exactly():
    spec = noiseless()
    posts, truth = synth.generate(spec)
    for i, tl in enumerate(synth.timelines_from_posts(posts)):
        sid = tl.source_id
        np.testing.assert_array_equal(truth.target[sid], truth.baseline[sid])
        # baseline is a line, so the post period is the pre-period line extended
        t = np.arange(spec.days)
        pre = slice(0, 60)
        coef = np.polyfit(t[pre], truth.baseline[sid][pre], 1)
        np.testing.assert_allclose(np.polyval(coef, t[60:]), truth.baseline[sid][60:],
                                   rtol=0, atol=1e-9)
        # rendered engagement differs from the target only by integer rounding
        es = engagement_series(tl)
        counts = np.array([p.likes + p.comments + p.shares for p in tl.posts]).reshape(
            spec.days, spec.posts_per_day)
        bound = (0.5 / counts).sum(axis=1) + 1e-12
        assert np.all(np.abs(es.values - truth.target[sid]) <= bound)


def test_step_effect_ground_truth():
    spec = noiseless(n_sources=1, events=(InjectedEvent(0, 60, "step", 4.0),))
    _, truth = synth.generate(spec)
    (ev,) = truth.events
    assert ev.sign == 1
    assert all(ev.avg_effect[n] == 4.0 for n in causal.WINDOW_WEEKS)


@pytest.mark.parametrize("shape,duration", [("ramp", 14), ("pulse", 5), ("step", 10)])
def test_effect_shapes_start_after_event(shape, duration):
    ev = InjectedEvent(0, 30, shape, -3.0, duration)
    values = ev.effect(np.arange(-5, 60))
    assert np.all(values[:6] == 0)
    assert values[6] != 0
    assert np.all(np.sign(values[6:][values[6:] != 0]) == -1)


def test_ramp_saturates():
    ev = InjectedEvent(0, 0, "ramp", 6.0, 3)
    np.testing.assert_allclose(ev.effect(np.arange(1, 7)), [2, 4, 6, 6, 6, 6])


@pytest.mark.parametrize("platform", [Platform.FACEBOOK, Platform.YOUTUBE])
def test_detection_flags_exactly_the_injected_posts(platform):
    events = (InjectedEvent(0, 30, "step", 5.0), InjectedEvent(0, 90, "step", -3.0),
              InjectedEvent(1, 50, "ramp", 4.0, 10), InjectedEvent(2, 70))
    spec = noiseless(platform=platform, events=events)
    posts, truth = synth.generate(spec)
    cfg = DetectionConfig()
    flagged = set()
    for tl in synth.timelines_from_posts(posts):
        metrics = source_metrics(tl, cfg)
        flagged |= detect_viral(metrics, cfg.threshold_for(platform))
        for name in ("z_spreading", "z_total_interactions"):
            z = np.array([getattr(m, name) for m in metrics])
            assert abs(z.mean()) < 1e-10
            assert abs(z.std(ddof=1) - 1) < 1e-10
    assert flagged == {(e.source_id, e.post_id) for e in truth.events}


def test_generation_is_reproducible():
    spec = ScenarioSpec(n_sources=2, days=80, count_log_sd=0.3, seed=5,
                        events=(InjectedEvent(1, 40, "step", 2.0),))
    a, ta = synth.generate(spec)
    b, tb = synth.generate(spec)
    assert a == b
    assert ta.to_dict() == tb.to_dict()
    c, _ = synth.generate(replace(spec, seed=6))
    assert a != c


def test_undetectable_injection_is_reported():
    spec = ScenarioSpec(days=60, viral_gap=0.0, events=(InjectedEvent(0, 30),))
    with pytest.raises(GenerationError):
        synth.generate(spec)


def test_noiseless_effect_that_creates_outliers_is_refused():
    # +8 engagement in one day lifts each of 8 posts by about one nat: z > 2.5
    spec = noiseless(n_sources=1, platform=Platform.YOUTUBE, days=200,
                     events=(InjectedEvent(0, 150, "pulse", 8.0, 4),))
    with pytest.raises(GenerationError, match="ordinary posts"):
        synth.generate(spec)


@pytest.mark.parametrize("kwargs", [
    {"n_sources": 0}, {"noise_sd": -1.0}, {"share_fraction": 0.9, "comment_fraction": 0.2},
    {"events": (InjectedEvent(3, 10),)}, {"events": (InjectedEvent(0, 500),)},
])
def test_invalid_specs(kwargs):
    with pytest.raises(GenerationError):
        ScenarioSpec(**kwargs)


def test_unknown_shape():
    with pytest.raises(GenerationError):
        InjectedEvent(0, 1, "zigzag")


def test_event_ensemble_is_deterministic():
    spec = synth.default_null_spec()
    a = synth.event_ensemble(spec, 5, seed=3, impact=FAST)
    b = synth.event_ensemble(spec, 5, seed=3, impact=FAST)
    assert np.array_equal(a.p_values, b.p_values)
    assert list(a.n_weeks) == [2, 3, 4, 5, 6]


def test_null_ensemble_guards():
    spec = synth.default_null_spec()
    with pytest.raises(GenerationError):
        synth.null_ensemble(spec, 10, seed=0)
    with pytest.raises(GenerationError):
        synth.null_ensemble(replace(spec, events=(InjectedEvent(0, 49, "step", 1.0),)), 100, 0)


def test_baseline_engagement_level():
    spec = ScenarioSpec(posts_per_day=4, base_interactions=99.0)
    assert spec.baseline_engagement == pytest.approx(4 * math.log(100))
