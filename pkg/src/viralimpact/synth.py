"""Synthetic post histories with injected viral events and known effects.

Each source gets a fixed number of ordinary posts per day.  The day's target
engagement (baseline + linear trend + injected effect + Gaussian noise) is
split across those posts and rendered back into integer interaction counts,
so the engagement recovered from the posts equals the target up to integer
rounding.  Every injected event adds one viral post whose metrics sit far
above the source's ordinary posts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from typing import Sequence

import numpy as np

from viralimpact import causal
from viralimpact.domain import Platform, PostRecord, SourceTimeline
from viralimpact.metrics import DetectionConfig, engagement_series, source_metrics

SHAPES = ("step", "ramp", "pulse")


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class InjectedEvent:
    source: int
    day: int
    shape: str = "step"
    magnitude: float = 0.0
    duration: int = 0          # 0 = the effect never ends (step) / never saturates

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise GenerationError(f"unknown effect shape {self.shape!r}")
        if not math.isfinite(self.magnitude):
            raise GenerationError("effect magnitude must be finite")
        if self.duration < 0:
            raise GenerationError("duration must be non-negative")

    def effect(self, offsets: np.ndarray) -> np.ndarray:
        """Effect on engagement at ``offsets`` days after the event (day 0 = event)."""
        d = np.asarray(offsets, dtype=float)
        after = d >= 1
        m = self.magnitude
        if self.shape == "step":
            live = after if self.duration == 0 else after & (d <= self.duration)
            out = np.where(live, m, 0.0)
        elif self.shape == "ramp":
            span = self.duration or 1
            out = np.where(after, m * np.minimum(d, span) / span, 0.0)
        else:
            tau = self.duration or 1
            out = np.where(after, m * np.exp(-(d - 1) / tau), 0.0)
        return out


@dataclass(frozen=True)
class ScenarioSpec:
    n_sources: int = 1
    days: int = 200
    start: date = date(2020, 1, 1)
    platform: Platform = Platform.FACEBOOK
    posts_per_day: int = 8
    base_interactions: float = 200.0
    count_log_sd: float = 0.0
    share_fraction: float = 0.2
    comment_fraction: float = 0.1
    views_per_interaction: float = 20.0
    followers: int = 100_000
    trend_slopes: tuple[float, ...] = (0.0,)
    noise_sd: float = 1.0
    viral_gap: float = 8.0
    events: tuple[InjectedEvent, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "platform", Platform.parse(self.platform)
                           if isinstance(self.platform, str) else self.platform)
        object.__setattr__(self, "trend_slopes", tuple(self.trend_slopes) or (0.0,))
        object.__setattr__(self, "events", tuple(self.events))
        if self.n_sources < 1 or self.days < 1 or self.posts_per_day < 1:
            raise GenerationError("n_sources, days and posts_per_day must be positive")
        if self.noise_sd < 0 or self.count_log_sd < 0:
            raise GenerationError("noise parameters must be non-negative")
        if not 0 <= self.share_fraction + self.comment_fraction <= 1:
            raise GenerationError("share and comment fractions must sum to at most 1")
        for ev in self.events:
            if not 0 <= ev.source < self.n_sources:
                raise GenerationError(f"event source {ev.source} out of range")
            if not 0 <= ev.day < self.days:
                raise GenerationError(f"event day {ev.day} outside the grid")

    def source_id(self, i: int) -> str:
        return f"src{i:03d}"

    def slope(self, i: int) -> float:
        return self.trend_slopes[i % len(self.trend_slopes)]

    @property
    def baseline_engagement(self) -> float:
        return self.posts_per_day * math.log1p(self.base_interactions)


@dataclass
class TrueEffect:
    source_id: str
    post_id: str
    day: int
    sign: int
    avg_effect: dict[int, float]

    def to_dict(self) -> dict:
        return {"source_id": self.source_id, "post_id": self.post_id, "day": self.day,
                "sign": self.sign,
                "avg_effect": {str(n): v for n, v in sorted(self.avg_effect.items())}}


@dataclass
class GroundTruth:
    events: list[TrueEffect]
    baseline: dict[str, np.ndarray] = field(repr=False)   # trend only
    target: dict[str, np.ndarray] = field(repr=False)     # trend + effects + noise

    def to_dict(self) -> dict:
        return {"events": [e.to_dict() for e in self.events],
                "baseline": {k: v.tolist() for k, v in sorted(self.baseline.items())},
                "target": {k: v.tolist() for k, v in sorted(self.target.items())}}


def _timestamp(start: date, day: int, slot: int) -> datetime:
    base = datetime.combine(start + timedelta(days=day), time(8, 0), tzinfo=timezone.utc)
    return base + timedelta(minutes=5 * slot)


def _render_post(spec: ScenarioSpec, source_id: str, post_id: str, ts: datetime,
                 interactions: int, views: int | None = None) -> PostRecord:
    if spec.platform is Platform.FACEBOOK:
        shares = int(round(interactions * spec.share_fraction))
        comments = int(round(interactions * spec.comment_fraction))
        likes = interactions - shares - comments
        return PostRecord(spec.platform, source_id, post_id, ts, likes, comments,
                          shares=shares, followers_at_post=spec.followers)
    comments = int(round(interactions * spec.comment_fraction))
    if views is None:
        views = int(round(interactions * spec.views_per_interaction))
    return PostRecord(spec.platform, source_id, post_id, ts, interactions - comments,
                      comments, views=views)


def generate(spec: ScenarioSpec,
             detection: DetectionConfig = DetectionConfig()) -> tuple[list[PostRecord], GroundTruth]:
    """Posts for every source plus the ground truth of the injected effects."""
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.days, dtype=float)
    posts: list[PostRecord] = []
    truths: list[TrueEffect] = []
    baselines, targets = {}, {}
    for i in range(spec.n_sources):
        sid = spec.source_id(i)
        baseline = spec.baseline_engagement + spec.slope(i) * (t - spec.days / 2)
        events = sorted((e for e in spec.events if e.source == i), key=lambda e: e.day)
        effect = np.zeros(spec.days)
        for ev in events:
            effect += ev.effect(t - ev.day)
        noise = rng.normal(0.0, spec.noise_sd, spec.days) if spec.noise_sd > 0 else 0.0
        target = np.maximum(baseline + effect + noise, 0.0)
        baselines[sid], targets[sid] = baseline, target

        k = spec.posts_per_day
        if spec.count_log_sd > 0:
            w = np.exp(spec.count_log_sd * rng.standard_normal((spec.days, k)))
            w /= w.sum(axis=1, keepdims=True)
        else:
            w = np.full((spec.days, k), 1.0 / k)
        counts = np.rint(np.expm1(target[:, None] * w)).astype(np.int64)
        source_posts = []
        for d in range(spec.days):
            for j in range(k):
                source_posts.append(_render_post(
                    spec, sid, f"{sid}-d{d:05d}-p{j:02d}", _timestamp(spec.start, d, j),
                    int(counts[d, j])))

        top = math.log1p(int(counts.max()))
        for ev in events:
            pid = f"{sid}-d{ev.day:05d}-viral"
            viral_count = int(math.ceil(math.expm1(top + spec.viral_gap)))
            viral_views = int(round(viral_count * spec.views_per_interaction))
            source_posts.append(_render_post(spec, sid, pid,
                                             _timestamp(spec.start, ev.day, k), viral_count,
                                             views=viral_views))
            truths.append(TrueEffect(
                sid, pid, ev.day, int(np.sign(ev.magnitude)),
                {n: float(ev.effect(np.arange(1, 7 * n + 1)).mean())
                 for n in causal.WINDOW_WEEKS}))
        _check_calibration(spec, sid, source_posts, events, detection)
        posts.extend(source_posts)
    return posts, GroundTruth(truths, baselines, targets)


def _check_calibration(spec, sid, source_posts, events, detection):
    if not events:
        return
    if len(source_posts) < detection.min_posts_per_source:
        raise GenerationError(f"{sid}: too few posts for z-score calibration")
    tl = SourceTimeline.from_posts(source_posts)
    flagged = {m.post_id for m in source_metrics(tl, detection) if m.is_viral}
    missing = [f"{sid}-d{e.day:05d}-viral" for e in events
               if f"{sid}-d{e.day:05d}-viral" not in flagged]
    if missing:
        raise GenerationError(f"{sid}: injected posts fail the z-thresholds: {missing}")
    if spec.noise_sd == 0 and spec.count_log_sd == 0:
        # noiseless scenarios promise exact ground truth, so effects alone
        # must not lift ordinary posts over the thresholds
        injected = {f"{sid}-d{e.day:05d}-viral" for e in events}
        extra = sorted(flagged - injected)
        if extra:
            raise GenerationError(
                f"{sid}: effects push {len(extra)} ordinary posts over the viral "
                f"thresholds (first: {extra[0]}); reduce effect magnitudes")


def timelines_from_posts(posts: Sequence[PostRecord]) -> list[SourceTimeline]:
    by_source: dict[str, list[PostRecord]] = {}
    for p in posts:
        by_source.setdefault(p.source_id, []).append(p)
    return [SourceTimeline.from_posts(v) for _, v in sorted(by_source.items())]


@dataclass
class NullEnsemble:
    p_values: np.ndarray
    n_weeks: np.ndarray
    avg_effects: np.ndarray
    classifications: list[str]
    n_excluded: int = 0

    def false_positive_rate(self, alpha: float = 0.05) -> float:
        return float(np.mean(self.p_values < alpha))


def event_ensemble(spec: ScenarioSpec, runs: int, seed: int,
                   impact: causal.ImpactConfig = causal.ImpactConfig(),
                   weeks: Sequence[int] = causal.WINDOW_WEEKS,
                   detection: DetectionConfig = DetectionConfig(),
                   max_attempts: int | None = None) -> NullEnsemble:
    """Run the detect -> engagement -> impact chain until ``runs`` events complete.

    ``spec`` must describe a single source with exactly one event.  Attempt
    ``a`` reseeds the scenario from ``(seed, a)`` and takes trend slope ``a``
    (cycled); completed events rotate through ``weeks``.  Attempts whose
    window is excluded (an accidental viral post nearby) are counted and
    replaced.
    """
    if spec.n_sources != 1 or len(spec.events) != 1:
        raise GenerationError("ensemble specs need one source with one event")
    ev = spec.events[0]
    max_attempts = max_attempts or 2 * runs
    ps, ns, effects, classes = [], [], [], []
    excluded = 0
    for a in range(max_attempts):
        if len(ps) == runs:
            break
        run_seed = int(np.random.SeedSequence([seed, a]).generate_state(1, np.uint64)[0] >> 1)
        run_spec = replace(spec, seed=run_seed,
                           trend_slopes=(spec.trend_slopes[a % len(spec.trend_slopes)],))
        posts, _ = generate(run_spec, detection)
        tl = timelines_from_posts(posts)[0]
        viral = [m.post_id for m in source_metrics(tl, detection) if m.is_viral]
        series = engagement_series(tl, detection.smoothing, viral)
        n = weeks[len(ps) % len(weeks)]
        try:
            pre, post = causal.build_window(series, ev.day, n, impact.overlap_policy)
        except causal.WindowExcluded:
            excluded += 1
            continue
        res = causal.estimate_impact(pre, post, impact, seed=run_seed, n_weeks=n)
        if res.excluded:
            excluded += 1
            continue
        ps.append(res.p_value)
        ns.append(n)
        effects.append(res.avg_absolute_effect)
        classes.append(res.classification.value)
    if len(ps) < runs:
        raise GenerationError(f"only {len(ps)} of {runs} events completed")
    return NullEnsemble(np.array(ps), np.array(ns), np.array(effects), classes, excluded)


def null_ensemble(spec: ScenarioSpec, runs: int, seed: int,
                  impact: causal.ImpactConfig = causal.ImpactConfig(),
                  weeks: Sequence[int] = causal.WINDOW_WEEKS) -> NullEnsemble:
    """p-values of effect-free events, for false-positive-rate estimation."""
    if runs < 100:
        raise GenerationError("null ensembles need at least 100 runs")
    if any(e.magnitude != 0 for e in spec.events):
        raise GenerationError("null ensemble spec must not carry effects")
    return event_ensemble(spec, runs, seed, impact, weeks)


def default_null_spec() -> ScenarioSpec:
    """One source, one effect-free event in the middle of a 6-week-capable grid."""
    return ScenarioSpec(n_sources=1, days=7 * 6 * 2 + 1 + 14, posts_per_day=8,
                        count_log_sd=0.05, noise_sd=1.0,
                        trend_slopes=(0.0, 0.05, -0.05, 0.1, -0.1),
                        events=(InjectedEvent(0, 7 * 6 + 7, "step", 0.0),))
