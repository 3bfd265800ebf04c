from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from viralimpact.domain import Platform, PostRecord

T0 = datetime(2020, 1, 1, 12, 0, tzinfo=timezone.utc)


def fb_post(post_id="p0", likes=10, comments=2, shares=1, followers=1000,
            source="s", when=T0, day=None):
    if day is not None:
        when = T0 + timedelta(days=day)
    return PostRecord(Platform.FACEBOOK, source, post_id, when, likes, comments,
                      shares=shares, followers_at_post=followers)


def yt_post(post_id="v0", likes=10, comments=2, views=500, source="y", when=T0, day=None):
    if day is not None:
        when = T0 + timedelta(days=day)
    return PostRecord(Platform.YOUTUBE, source, post_id, when, likes, comments, views=views)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte-Carlo ensembles")


@pytest.fixture
def make_fb():
    return fb_post


@pytest.fixture
def make_yt():
    return yt_post


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
