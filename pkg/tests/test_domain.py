from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import fb_post, yt_post
from viralimpact.domain import (CalendarGrid, Platform, PostRecord, SchemaError,
                                SourceTimeline, sort_posts, to_utc)

UTC = timezone.utc


def test_day_index_same_day():
    grid = CalendarGrid(date(2020, 1, 1), 60)
    assert grid.day_index(datetime(2020, 1, 1, 23, 59, tzinfo=UTC)) == 0


def test_day_index_one_week():
    grid = CalendarGrid(date(2020, 1, 1), 60)
    assert grid.day_index(datetime(2020, 1, 8, 0, 0, tzinfo=UTC)) == 7


def test_day_index_uses_utc_day():
    grid = CalendarGrid(date(2020, 1, 1), 60)
    plus5 = timezone(timedelta(hours=5))
    # 03:00 at +05:00 is 22:00 UTC on the previous calendar day
    assert grid.day_index(datetime(2020, 1, 2, 3, 0, tzinfo=plus5)) == 0


def test_day_index_outside_grid():
    grid = CalendarGrid(date(2020, 1, 1), 10)
    with pytest.raises(IndexError):
        grid.day_index(date(2019, 12, 31))
    with pytest.raises(IndexError):
        grid.day_index(date(2020, 1, 11))


def test_day_index_round_trip_random_instants():
    start = date(2019, 3, 1)
    grid = CalendarGrid(start, 2000)
    rng = np.random.default_rng(11)
    base = datetime.combine(start, datetime.min.time(), tzinfo=UTC)
    for sec in rng.integers(0, 2000 * 86400, size=1000):
        x = base + timedelta(seconds=int(sec))
        assert grid.date_at(grid.day_index(x)) == x.date()


@given(st.datetimes(min_value=datetime(2020, 1, 1), max_value=datetime(2024, 12, 31)),
       st.datetimes(min_value=datetime(2020, 1, 1), max_value=datetime(2024, 12, 31)))
def test_day_index_monotone(a, b):
    grid = CalendarGrid(date(2020, 1, 1), 366 * 5)
    a, b = sorted([a, b])
    assert grid.day_index(a) <= grid.day_index(b)


def test_naive_timestamp_taken_as_utc():
    assert to_utc(datetime(2020, 1, 1, 5)).tzinfo is UTC


def test_platform_aliases():
    assert Platform.parse("Facebook") is Platform.FACEBOOK
    assert Platform.parse("youtube-like") is Platform.YOUTUBE
    with pytest.raises(SchemaError):
        Platform.parse("myspace")


@pytest.mark.parametrize("kwargs", [
    {"likes": -1}, {"comments": -3}, {"shares": None}, {"followers": 0}, {"followers": None},
])
def test_facebook_record_validation(kwargs):
    with pytest.raises(SchemaError):
        fb_post(**kwargs)


def test_youtube_requires_views():
    with pytest.raises(SchemaError):
        yt_post(views=None)


def test_missing_optional_counts_stay_absent():
    p = yt_post()
    assert p.shares is None and p.followers_at_post is None


@given(st.lists(st.integers(0, 5), min_size=1, max_size=30))
def test_sort_stable_and_idempotent(days):
    posts = [fb_post(post_id=f"p{i}", day=d) for i, d in enumerate(days)]
    once = sort_posts(posts)
    assert sort_posts(once) == once
    # equal timestamps keep input order
    expected = [p for _, _, p in sorted((p.timestamp, i, p) for i, p in enumerate(posts))]
    assert list(once) == expected


def test_timeline_rejects_duplicates_and_foreign_posts():
    a = fb_post("p1")
    with pytest.raises(SchemaError):
        SourceTimeline.from_posts([a, fb_post("p1", day=1)])
    with pytest.raises(SchemaError):
        SourceTimeline.from_posts([a, fb_post("p2", source="other")])


def test_timeline_grid_spans_posts():
    tl = SourceTimeline.from_posts([fb_post("b", day=9), fb_post("a", day=0)])
    assert [p.post_id for p in tl.posts] == ["a", "b"]
    assert tl.grid.length == 10
    assert isinstance(tl.posts[0], PostRecord)
