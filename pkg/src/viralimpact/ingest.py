"""Delimited-text post files: reading, validation and writing.

One post per row with the header
``platform,source_id,post_id,timestamp,likes,comments,shares,views,followers_at_post``.
Timestamps are ISO-8601 (UTC assumed when no offset is given); an empty cell
means the count is absent.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from viralimpact.domain import Platform, PostRecord, SchemaError, SourceTimeline

logger = logging.getLogger(__name__)

COLUMNS = ("platform", "source_id", "post_id", "timestamp", "likes", "comments",
           "shares", "views", "followers_at_post")


class IngestError(Exception):
    """Fatal ingestion failure (unreadable file, bad header, no valid rows)."""


@dataclass(frozen=True)
class RowError:
    path: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}: {self.message}"


@dataclass
class IngestReport:
    timelines: list[SourceTimeline]
    errors: list[RowError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    n_rows: int = 0

    @property
    def n_posts(self) -> int:
        return sum(len(t.posts) for t in self.timelines)


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def _count(text: str, name: str) -> int | None:
    text = text.strip()
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        raise SchemaError(f"{name} is not an integer: {text!r}") from None


def parse_row(row: Mapping[str, str], platform_map: Mapping[str, Platform]) -> PostRecord:
    label = row["platform"].strip().lower()
    platform = platform_map.get(label) or Platform.parse(label)
    try:
        ts = parse_timestamp(row["timestamp"])
    except ValueError:
        raise SchemaError(f"bad timestamp {row['timestamp']!r}") from None
    return PostRecord(
        platform=platform, source_id=row["source_id"].strip(),
        post_id=row["post_id"].strip(), timestamp=ts,
        likes=_count(row["likes"], "likes"), comments=_count(row["comments"], "comments"),
        shares=_count(row["shares"], "shares"), views=_count(row["views"], "views"),
        followers_at_post=_count(row["followers_at_post"], "followers_at_post"))


def read_posts(path: Path, platform_map: Mapping[str, Platform] = {}):
    """Yield ``(line_number, PostRecord | RowError)`` for each data row."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != COLUMNS:
            raise IngestError(f"{path}: header must be exactly {','.join(COLUMNS)}")
        for row in reader:
            line = reader.line_num
            if None in row or any(v is None for v in row.values()):
                yield line, RowError(str(path), line, "wrong number of fields")
                continue
            try:
                yield line, parse_row(row, platform_map)
            except SchemaError as exc:
                yield line, RowError(str(path), line, str(exc))


def ingest(paths: Sequence[Path], platform_map: Mapping[str, Platform] = {}) -> IngestReport:
    """Read, validate and merge post files into per-source timelines.

    Malformed rows are rejected with line-numbered diagnostics.  A repeated
    (source_id, post_id) keeps the last occurrence.
    """
    if not paths:
        raise IngestError("no input files")
    posts: dict[tuple[str, str], PostRecord] = {}
    platforms: dict[str, Platform] = {}
    errors, warnings = [], []
    n_rows = 0
    for path in paths:
        for line, item in read_posts(Path(path), platform_map):
            n_rows += 1
            if isinstance(item, RowError):
                errors.append(item)
                continue
            known = platforms.setdefault(item.source_id, item.platform)
            if known is not item.platform:
                errors.append(RowError(str(path), line,
                                       f"source {item.source_id} mixes platforms"))
                continue
            if item.key in posts:
                warnings.append(f"{path}:{line}: duplicate post {item.source_id}/"
                                f"{item.post_id}, keeping the later row")
            posts[item.key] = item
    for w in warnings:
        logger.warning(w)
    for e in errors:
        logger.warning("rejected row %s", e)
    if not posts:
        raise IngestError("no valid posts in input")
    by_source: dict[str, list[PostRecord]] = {}
    for p in posts.values():
        by_source.setdefault(p.source_id, []).append(p)
    timelines = [SourceTimeline.from_posts(v) for _, v in sorted(by_source.items())]
    return IngestReport(timelines, errors, warnings, n_rows)


def _cell(value) -> str:
    return "" if value is None else str(value)


def write_posts(path: Path, posts: Iterable[PostRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for p in posts:
            writer.writerow([p.platform.value, p.source_id, p.post_id,
                             p.timestamp.isoformat().replace("+00:00", "Z"),
                             p.likes, p.comments, _cell(p.shares), _cell(p.views),
                             _cell(p.followers_at_post)])


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
