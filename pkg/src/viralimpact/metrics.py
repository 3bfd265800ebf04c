"""Spreading / Total Interactions metrics, viral-post detection, daily engagement."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from viralimpact.domain import CalendarGrid, Platform, PostRecord, SchemaError, SourceTimeline


class Smoothing(str, enum.Enum):
    PLUS_ONE = "plus-one"
    STRICT = "strict"


class UndefinedMetricError(ValueError):
    """Log of a zero count under strict smoothing."""


class DegenerateDispersionError(ValueError):
    """Constant series: z-scores are undefined."""


class InsufficientDataError(ValueError):
    """Too few posts for stable z-scores."""


@dataclass(frozen=True)
class DetectionConfig:
    threshold_facebook: float = 3.0
    threshold_youtube: float = 2.5
    min_posts_per_source: int = 30
    smoothing: Smoothing = Smoothing.PLUS_ONE

    def __post_init__(self):
        if self.threshold_facebook <= 0 or self.threshold_youtube <= 0:
            raise ValueError("detection thresholds must be positive")
        if self.min_posts_per_source < 2:
            raise ValueError("min_posts_per_source must be at least 2")
        object.__setattr__(self, "smoothing", Smoothing(self.smoothing))

    def threshold_for(self, platform: Platform) -> float:
        if platform is Platform.FACEBOOK:
            return self.threshold_facebook
        return self.threshold_youtube


def _require(post: PostRecord, *names: str) -> None:
    for name in names:
        if getattr(post, name) is None:
            raise SchemaError(f"{post.platform.value} post {post.post_id} lacks {name}")


def spreading(post: PostRecord, smoothing: Smoothing = Smoothing.PLUS_ONE) -> float:
    """Log share rate (facebook-like) or log views (youtube-like)."""
    smoothing = Smoothing(smoothing)
    plus = 1 if smoothing is Smoothing.PLUS_ONE else 0
    if post.platform is Platform.FACEBOOK:
        _require(post, "shares", "followers_at_post")
        numerator = post.shares + plus
        denominator = post.followers_at_post
    else:
        _require(post, "views")
        numerator = post.views + plus
        denominator = 1
    if numerator == 0:
        raise UndefinedMetricError(f"spreading of {post.post_id} is ln(0)")
    return math.log(numerator) - math.log(denominator)


def total_interactions(post: PostRecord, smoothing: Smoothing = Smoothing.PLUS_ONE) -> float:
    """Log of likes + comments (+ shares on facebook-like platforms)."""
    smoothing = Smoothing(smoothing)
    total = post.likes + post.comments
    if post.platform is Platform.FACEBOOK:
        _require(post, "shares")
        total += post.shares
    if smoothing is Smoothing.PLUS_ONE:
        total += 1
    if total == 0:
        raise UndefinedMetricError(f"total interactions of {post.post_id} is ln(0)")
    return math.log(total)


def zscore_by_source(values: Sequence[float], min_posts: int = 30) -> np.ndarray:
    """Standardize with the sample (n-1) standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.size < min_posts or x.size < 2:
        raise InsufficientDataError(f"{x.size} posts, need at least {min_posts}")
    mean = x.mean()
    centered = x - mean
    sd = math.sqrt(float(centered @ centered) / (x.size - 1))
    if sd == 0.0 or sd <= 1e-14 * max(1.0, abs(mean)):
        raise DegenerateDispersionError("zero dispersion; z-scores undefined")
    return centered / sd


@dataclass(frozen=True)
class PostMetrics:
    source_id: str
    post_id: str
    spreading: float
    total_interactions: float
    z_spreading: float
    z_total_interactions: float
    is_viral: bool = False

    @property
    def key(self) -> tuple[str, str]:
        return (self.source_id, self.post_id)


def is_viral(z_spreading: float, z_total_interactions: float, threshold: float) -> bool:
    return z_spreading > threshold and z_total_interactions > threshold


def detect_viral(metrics: Iterable[PostMetrics], threshold: float) -> set[tuple[str, str]]:
    """Keys of posts whose two z-scores both strictly exceed ``threshold``."""
    return {m.key for m in metrics
            if is_viral(m.z_spreading, m.z_total_interactions, threshold)}


def source_metrics(timeline: SourceTimeline, config: DetectionConfig) -> list[PostMetrics]:
    """Per-post metrics, z-scores and viral flags for one source.

    Raises ``InsufficientDataError``, ``DegenerateDispersionError`` or
    ``UndefinedMetricError`` when the source cannot be scored.
    """
    posts = timeline.posts
    s = [spreading(p, config.smoothing) for p in posts]
    ti = [total_interactions(p, config.smoothing) for p in posts]
    zs = zscore_by_source(s, config.min_posts_per_source)
    zti = zscore_by_source(ti, config.min_posts_per_source)
    theta = config.threshold_for(timeline.platform)
    return [PostMetrics(p.source_id, p.post_id, s[i], ti[i], float(zs[i]),
                        float(zti[i]), is_viral(zs[i], zti[i], theta))
            for i, p in enumerate(posts)]


@dataclass
class SourceDetection:
    source_id: str
    platform: Platform
    metrics: list[PostMetrics] = field(default_factory=list)
    excluded_reason: str | None = None

    @property
    def viral(self) -> list[PostMetrics]:
        return [m for m in self.metrics if m.is_viral]


def detect_sources(timelines: Iterable[SourceTimeline],
                   config: DetectionConfig) -> list[SourceDetection]:
    """Run detection over every source, recording exclusions instead of failing."""
    out = []
    for tl in sorted(timelines, key=lambda t: t.source_id):
        try:
            out.append(SourceDetection(tl.source_id, tl.platform, source_metrics(tl, config)))
        except InsufficientDataError:
            out.append(SourceDetection(tl.source_id, tl.platform,
                                       excluded_reason="insufficient-data"))
        except DegenerateDispersionError:
            out.append(SourceDetection(tl.source_id, tl.platform,
                                       excluded_reason="degenerate-dispersion"))
        except UndefinedMetricError:
            out.append(SourceDetection(tl.source_id, tl.platform,
                                       excluded_reason="undefined-metric"))
    return out


@dataclass(frozen=True)
class EngagementSeries:
    source_id: str
    grid: CalendarGrid
    values: np.ndarray
    viral_days: frozenset[int] = frozenset()

    def __post_init__(self):
        if len(self.values) != self.grid.length:
            raise ValueError("engagement values must cover the grid exactly")
        if any(not 0 <= d < self.grid.length for d in self.viral_days):
            raise ValueError("viral day outside the grid")


def engagement_series(timeline: SourceTimeline,
                      smoothing: Smoothing = Smoothing.PLUS_ONE,
                      viral_posts: Iterable[str] = (),
                      grid: CalendarGrid | None = None) -> EngagementSeries:
    """Daily sum of Total Interactions; empty days are 0.

    ``viral_posts`` are post ids of this source flagged by detection; their
    posting days become ``viral_days``.
    """
    grid = grid or timeline.grid
    values = np.zeros(grid.length)
    viral = set(viral_posts)
    viral_days = set()
    for p in timeline.posts:
        d = grid.day_index(p.timestamp)
        values[d] += total_interactions(p, smoothing)
        if p.post_id in viral:
            viral_days.add(d)
    return EngagementSeries(timeline.source_id, grid, values, frozenset(viral_days))
