"""Shared data model: posts, per-source timelines and the daily calendar grid."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Optional


class SchemaError(ValueError):
    """A record violates the data model."""


class Platform(str, enum.Enum):
    FACEBOOK = "facebook-like"
    YOUTUBE = "youtube-like"

    @classmethod
    def parse(cls, value: str) -> "Platform":
        aliases = {"facebook": cls.FACEBOOK, "youtube": cls.YOUTUBE}
        key = value.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise SchemaError(f"unknown platform {value!r}") from None


def to_utc(instant: datetime) -> datetime:
    """Normalize to an aware UTC datetime; naive values are taken as UTC."""
    if instant.tzinfo is None:
        return instant.replace(tzinfo=timezone.utc)
    return instant.astimezone(timezone.utc)


def _check_count(name: str, value, required: bool, positive: bool = False):
    if value is None:
        if required:
            raise SchemaError(f"{name} is required")
        return
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{name} must be an integer, got {value!r}")
    if value < 0 or (positive and value == 0):
        sign = "positive" if positive else "non-negative"
        raise SchemaError(f"{name} must be {sign}, got {value}")


@dataclass(frozen=True)
class PostRecord:
    platform: Platform
    source_id: str
    post_id: str
    timestamp: datetime
    likes: int
    comments: int
    shares: Optional[int] = None
    views: Optional[int] = None
    followers_at_post: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "platform", Platform.parse(self.platform)
                           if isinstance(self.platform, str) else self.platform)
        if not self.source_id or not self.post_id:
            raise SchemaError("source_id and post_id must be non-empty")
        object.__setattr__(self, "timestamp", to_utc(self.timestamp))
        fb = self.platform is Platform.FACEBOOK
        _check_count("likes", self.likes, True)
        _check_count("comments", self.comments, True)
        _check_count("shares", self.shares, fb)
        _check_count("views", self.views, not fb)
        _check_count("followers_at_post", self.followers_at_post, fb,
                     positive=True)

    @property
    def day(self) -> date:
        return self.timestamp.date()

    @property
    def key(self) -> tuple[str, str]:
        return (self.source_id, self.post_id)


@dataclass(frozen=True)
class CalendarGrid:
    start: date
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("grid length must be positive")

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.length - 1)

    def day_index(self, instant: datetime | date) -> int:
        """0-based day offset of ``instant`` (a UTC instant or a date)."""
        d = to_utc(instant).date() if isinstance(instant, datetime) else instant
        offset = (d - self.start).days
        if not 0 <= offset < self.length:
            raise IndexError(f"{d} outside grid {self.start}..{self.end}")
        return offset

    def date_at(self, offset: int) -> date:
        if not 0 <= offset < self.length:
            raise IndexError(f"offset {offset} outside grid of {self.length} days")
        return self.start + timedelta(days=offset)


def sort_posts(posts: Iterable[PostRecord]) -> tuple[PostRecord, ...]:
    """Stable chronological sort."""
    return tuple(sorted(posts, key=lambda p: p.timestamp))


@dataclass(frozen=True)
class SourceTimeline:
    source_id: str
    platform: Platform
    posts: tuple[PostRecord, ...]
    first_day: date
    last_day: date

    def __post_init__(self):
        if not self.posts:
            raise SchemaError(f"source {self.source_id} has no posts")
        seen = set()
        prev = None
        for p in self.posts:
            if p.source_id != self.source_id or p.platform is not self.platform:
                raise SchemaError(f"post {p.post_id} does not belong to {self.source_id}")
            if p.post_id in seen:
                raise SchemaError(f"duplicate post_id {p.post_id} in {self.source_id}")
            seen.add(p.post_id)
            if prev is not None and p.timestamp < prev:
                raise SchemaError(f"posts of {self.source_id} are not time-sorted")
            prev = p.timestamp
            if not self.first_day <= p.day <= self.last_day:
                raise SchemaError(f"post {p.post_id} falls outside the timeline span")

    @classmethod
    def from_posts(cls, posts: Iterable[PostRecord], first_day: date | None = None,
                   last_day: date | None = None) -> "SourceTimeline":
        ordered = sort_posts(posts)
        if not ordered:
            raise SchemaError("cannot build a timeline from zero posts")
        head = ordered[0]
        return cls(head.source_id, head.platform, ordered,
                   first_day or ordered[0].day, last_day or ordered[-1].day)

    @property
    def grid(self) -> CalendarGrid:
        return CalendarGrid(self.first_day, (self.last_day - self.first_day).days + 1)
