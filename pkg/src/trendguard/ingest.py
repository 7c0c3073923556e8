"""
Parsing of archived event-stream files (line-delimited JSON status and
delete-notice records, optionally gzip/bzip2-compressed) and trend snapshot
CSVs, plus the join that associates tweets with trend-days.

A tweet is associated with a trend when it textually contains the keyword
and was posted on the trend's local day or the day before. Deletion notices
are attached by tweet id regardless of where they occur in the stream, so
instance construction is independent of event ordering.
"""

from __future__ import annotations

import bz2
import calendar
import csv
import gzip
import io
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Iterator, Optional, Sequence, Union

from .core import (
    DEFAULT_LOCALE,
    DEFAULT_TZ_OFFSET,
    GeoPoint,
    HASHTAG,
    Keyword,
    Timestamp,
    TrendGuardError,
    fold_case,
    normalize_keyword,
)


class MalformedLine(TrendGuardError):
    """A stream line with broken syntax; counted by read_stream, never fatal."""


class BadRank(TrendGuardError):
    """Trend-epoch ranks are not a contiguous 1..n sequence."""


class BadTimestamp(TrendGuardError):
    """A timestamp field could not be parsed."""


@dataclass(frozen=True, slots=True)
class Tweet:
    id: int
    user_id: int
    text: str
    created_at: Timestamp
    hashtags: tuple[str, ...] = ()
    mentions: tuple[int, ...] = ()
    urls: int = 0
    is_retweet: bool = False
    is_reply: bool = False
    geo: Optional[GeoPoint] = None
    lang: Optional[str] = None
    source_app: Optional[str] = None


@dataclass(frozen=True, slots=True)
class Creation:
    tweet: Tweet


@dataclass(frozen=True, slots=True)
class Deletion:
    tweet_id: int
    user_id: int
    time: Timestamp


@dataclass(frozen=True, slots=True)
class Skip:
    """A recognized but irrelevant record (limit notices, blank lines, ...)."""

    reason: str = ""


TweetEvent = Union[Creation, Deletion]


@dataclass
class ParseStats:
    """Per-read counters; lines_read always equals the sum of the others."""

    lines_read: int = 0
    creations: int = 0
    deletions: int = 0
    malformed_skipped: int = 0
    other_skipped: int = 0

    @property
    def consistent(self) -> bool:
        return self.lines_read == (
            self.creations + self.deletions + self.malformed_skipped + self.other_skipped
        )


@dataclass(frozen=True, slots=True)
class TrendDay:
    """One unique (date, keyword) pair; trends are counted once per day."""

    date: date
    keyword: Keyword

    def day_number(self, tz_offset: int = DEFAULT_TZ_OFFSET) -> int:
        # Days since the epoch of this local calendar day; tz_offset is
        # accepted for signature symmetry but a calendar date is already local.
        return self.date.toordinal() - _EPOCH_ORDINAL


_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()


def day_number_to_date(day_number: int) -> date:
    return date.fromordinal(day_number + _EPOCH_ORDINAL)


@dataclass(frozen=True, slots=True)
class TrendEpoch:
    """One snapshot of the ranked trends list at a point in time."""

    captured_at: Timestamp
    location: str
    entries: tuple[tuple[int, Keyword, Optional[int]], ...]  # (rank, keyword, volume)

    def rank_of(self, normalized: str) -> Optional[int]:
        for rank, kw, _ in self.entries:
            if kw.normalized == normalized:
                return rank
        return None


@dataclass
class TrendInstance:
    """A trend-day joined with its associated tweets and their deletion times.

    ``tweets`` is sorted by (created_at, id); ``deletions`` maps tweet id to
    the earliest deletion notice at or after the tweet's creation. Notices
    that would imply a negative lifetime are rejected and counted in
    ``invalid_deletions``.
    """

    trend: TrendDay
    tweets: list[Tweet] = field(default_factory=list)
    deletions: dict[int, Timestamp] = field(default_factory=dict)
    invalid_deletions: int = 0

    @property
    def keyword(self) -> Keyword:
        return self.trend.keyword

    def is_deleted(self, tweet_id: int) -> bool:
        return tweet_id in self.deletions


# ---------------------------------------------------------------------------
# Stream line parsing
# ---------------------------------------------------------------------------

_MONTHS = {
    "Jan": 1, "Feb": 2, "Mar": 3, "Apr": 4, "May": 5, "Jun": 6,
    "Jul": 7, "Aug": 8, "Sep": 9, "Oct": 10, "Nov": 11, "Dec": 12,
}

_SOURCE_RE = re.compile(r">([^<]*)</a>")
_HASHTAG_RE = re.compile(r"#(\w+)", re.UNICODE)


def _parse_created_at(value: str) -> int:
    """Parse the classic 'Wed Aug 27 13:08:45 +0000 2008' form to epoch seconds."""
    parts = value.split()
    if len(parts) != 6:
        raise BadTimestamp(f"unrecognized created_at: {value!r}")
    try:
        month = _MONTHS[parts[1]]
        day = int(parts[2])
        hh, mm, ss = parts[3].split(":")
        offset_txt = parts[4]
        year = int(parts[5])
        seconds = calendar.timegm((year, month, day, int(hh), int(mm), int(ss), 0, 0, 0))
        sign = -1 if offset_txt.startswith("-") else 1
        offset = sign * (int(offset_txt[1:3]) * 3600 + int(offset_txt[3:5]) * 60)
        return seconds - offset
    except (KeyError, ValueError, IndexError) as exc:
        raise BadTimestamp(f"unrecognized created_at: {value!r}") from exc


def _event_time(obj: dict) -> Timestamp:
    ms = obj.get("timestamp_ms")
    if ms is not None:
        return Timestamp.from_millis(int(ms))
    created = obj.get("created_at")
    if created is None:
        raise BadTimestamp("record has neither timestamp_ms nor created_at")
    return Timestamp(_parse_created_at(created))


def _extract_geo(obj: dict) -> Optional[GeoPoint]:
    geo = obj.get("geo")
    if isinstance(geo, dict):
        coords = geo.get("coordinates")
        if isinstance(coords, (list, tuple)) and len(coords) == 2:
            try:
                return GeoPoint(float(coords[0]), float(coords[1]))
            except (TypeError, ValueError):
                return None
    coords_obj = obj.get("coordinates")
    if isinstance(coords_obj, dict):
        coords = coords_obj.get("coordinates")
        if isinstance(coords, (list, tuple)) and len(coords) == 2:
            try:
                # GeoJSON order is (lon, lat).
                return GeoPoint(float(coords[1]), float(coords[0]))
            except (TypeError, ValueError):
                return None
    return None


def _parse_status(obj: dict) -> Creation:
    try:
        tweet_id = int(obj["id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine("status record without usable id") from exc

    user = obj.get("user")
    if isinstance(user, dict) and "id" in user:
        user_id = int(user["id"])
    elif "user_id" in obj:
        user_id = int(obj["user_id"])
    else:
        raise MalformedLine(f"status {tweet_id} has no user id")

    extended = obj.get("extended_tweet")
    if isinstance(extended, dict) and extended.get("full_text"):
        text = extended["full_text"]
        entities = extended.get("entities") or obj.get("entities") or {}
    else:
        text = obj.get("text")
        entities = obj.get("entities") or {}
    if not isinstance(text, str):
        raise MalformedLine(f"status {tweet_id} has no text")

    try:
        when = _event_time(obj)
    except BadTimestamp as exc:
        raise MalformedLine(str(exc)) from exc

    hashtags = tuple(
        h["text"]
        for h in entities.get("hashtags", ())
        if isinstance(h, dict) and isinstance(h.get("text"), str)
    )
    mentions = tuple(
        int(m["id"])
        for m in entities.get("user_mentions", ())
        if isinstance(m, dict) and m.get("id") is not None
    )
    urls = len(entities.get("urls", ()) or ())

    source_app = None
    source = obj.get("source")
    if isinstance(source, str):
        m = _SOURCE_RE.search(source)
        source_app = m.group(1) if m else (source or None)

    return Creation(
        Tweet(
            id=tweet_id,
            user_id=user_id,
            text=text,
            created_at=when,
            hashtags=hashtags,
            mentions=mentions,
            urls=urls,
            is_retweet="retweeted_status" in obj or text.startswith("RT @"),
            is_reply=obj.get("in_reply_to_status_id") is not None
            or obj.get("in_reply_to_user_id") is not None,
            geo=_extract_geo(obj),
            lang=obj.get("lang"),
            source_app=source_app,
        )
    )


def _parse_delete(obj: dict) -> Deletion:
    delete = obj["delete"]
    try:
        status = delete["status"]
        tweet_id = int(status["id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine("delete notice without usable status id") from exc
    user_raw = status.get("user_id", status.get("user_id_str", 0))
    try:
        user_id = int(user_raw)
    except (TypeError, ValueError):
        user_id = 0
    ms = delete.get("timestamp_ms", obj.get("timestamp_ms"))
    if ms is None:
        raise MalformedLine(f"delete notice for {tweet_id} lacks timestamp_ms")
    try:
        when = Timestamp.from_millis(int(ms))
    except (TypeError, ValueError) as exc:
        raise MalformedLine(f"delete notice for {tweet_id} has bad timestamp") from exc
    return Deletion(tweet_id=tweet_id, user_id=user_id, time=when)


def parse_stream_line(line: str) -> Union[Creation, Deletion, Skip]:
    """Parse one archive line into a Creation, Deletion, or Skip.

    Raises MalformedLine on broken syntax; callers are expected to count
    these rather than abort.
    """
    stripped = line.strip()
    if not stripped:
        return Skip("empty")
    try:
        obj = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedLine("line is not a JSON object")
    if "delete" in obj:
        return _parse_delete(obj)
    if "id" in obj and ("text" in obj or "extended_tweet" in obj):
        return _parse_status(obj)
    return Skip("other")


def _open_source(source, compressed: Union[bool, str] = "auto") -> io.TextIOBase:
    """Open a path or binary stream as text, transparently decompressing."""
    if isinstance(source, (str, bytes)):
        path = source if isinstance(source, str) else source.decode()
        with open(path, "rb") as probe:
            magic = probe.read(3)
        if compressed == "auto":
            if magic[:2] == b"\x1f\x8b":
                return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
            if magic == b"BZh":
                return io.TextIOWrapper(bz2.open(path, "rb"), encoding="utf-8")
            return open(path, "r", encoding="utf-8")
        if compressed:
            return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
        return open(path, "r", encoding="utf-8")
    if isinstance(source, io.TextIOBase):
        return source
    raw = source
    if compressed == "auto":
        peek = raw.peek(3) if hasattr(raw, "peek") else b""
        if peek[:2] == b"\x1f\x8b":
            return io.TextIOWrapper(gzip.GzipFile(fileobj=raw), encoding="utf-8")
        if peek[:3] == b"BZh":
            return io.TextIOWrapper(bz2.BZ2File(raw), encoding="utf-8")
        return io.TextIOWrapper(raw, encoding="utf-8")
    if compressed:
        return io.TextIOWrapper(gzip.GzipFile(fileobj=raw), encoding="utf-8")
    return io.TextIOWrapper(raw, encoding="utf-8")


def read_stream(
    source,
    compressed: Union[bool, str] = "auto",
    stats: Optional[ParseStats] = None,
) -> Iterator[TweetEvent]:
    """Stream TweetEvents from a path or binary stream, one pass, bounded memory.

    Malformed lines are counted in ``stats`` and skipped. The stats object is
    complete once the iterator is exhausted.
    """
    if stats is None:
        stats = ParseStats()
    handle = _open_source(source, compressed)
    try:
        for line in handle:
            stats.lines_read += 1
            try:
                event = parse_stream_line(line)
            except MalformedLine:
                stats.malformed_skipped += 1
                continue
            if isinstance(event, Creation):
                stats.creations += 1
                yield event
            elif isinstance(event, Deletion):
                stats.deletions += 1
                yield event
            else:
                stats.other_skipped += 1
    finally:
        handle.close()


def read_stream_list(source, compressed: Union[bool, str] = "auto") -> tuple[list[TweetEvent], ParseStats]:
    """Materialize a whole stream; convenience for small files and tests."""
    stats = ParseStats()
    events = list(read_stream(source, compressed, stats))
    return events, stats


# ---------------------------------------------------------------------------
# Trend snapshot files
# ---------------------------------------------------------------------------

def _parse_iso_timestamp(value: str) -> Timestamp:
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise BadTimestamp(f"unparsable timestamp: {value!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return Timestamp(int(dt.timestamp()))


def load_trend_epochs(source, locale: str = DEFAULT_LOCALE) -> list[TrendEpoch]:
    """Load a `captured_at,location,rank,keyword,volume` CSV into epochs.

    Rows sharing (captured_at, location) form one epoch; ranks must be the
    contiguous sequence 1..n. An empty volume cell means the platform
    reported none.
    """
    close = False
    if isinstance(source, (str, bytes)):
        handle = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        handle = source
    try:
        reader = csv.DictReader(handle)
        grouped: dict[tuple[int, int, str], list[tuple[int, Keyword, Optional[int]]]] = {}
        order: list[tuple[int, int, str]] = []
        for row in reader:
            when = _parse_iso_timestamp(row["captured_at"])
            location = (row.get("location") or "").strip()
            try:
                rank = int(row["rank"])
            except (TypeError, ValueError) as exc:
                raise BadRank(f"unparsable rank: {row.get('rank')!r}") from exc
            keyword = normalize_keyword(row["keyword"], locale)
            vol_text = (row.get("volume") or "").strip()
            volume = int(vol_text) if vol_text else None
            key = (when.seconds, when.millis, location)
            if key not in grouped:
                grouped[key] = []
                order.append(key)
            grouped[key].append((rank, keyword, volume))
        epochs = []
        for key in sorted(order):
            entries = sorted(grouped[key], key=lambda e: e[0])
            ranks = [r for r, _, _ in entries]
            if ranks != list(range(1, len(ranks) + 1)):
                raise BadRank(f"epoch at {key[0]} has ranks {ranks}, expected 1..{len(ranks)}")
            if len(entries) > 50:
                raise BadRank(f"epoch at {key[0]} lists {len(entries)} trends, limit is 50")
            epochs.append(
                TrendEpoch(
                    captured_at=Timestamp(key[0], key[1]),
                    location=key[2],
                    entries=tuple(entries),
                )
            )
        return epochs
    finally:
        if close:
            handle.close()


def load_trend_days(source, locale: str = DEFAULT_LOCALE) -> list[TrendDay]:
    """Load a `date,keyword` CSV into unique TrendDays, input order preserved."""
    close = False
    if isinstance(source, (str, bytes)):
        handle = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        handle = source
    try:
        reader = csv.DictReader(handle)
        seen = set()
        days = []
        for row in reader:
            day = date.fromisoformat(row["date"].strip())
            keyword = normalize_keyword(row["keyword"], locale)
            key = (day, keyword.normalized)
            if key in seen:
                continue
            seen.add(key)
            days.append(TrendDay(date=day, keyword=keyword))
        return days
    finally:
        if close:
            handle.close()


# ---------------------------------------------------------------------------
# Keyword matching and instance construction
# ---------------------------------------------------------------------------

_EDGE_PUNCT_RE = re.compile(r"^\W+|\W+$", re.UNICODE)


def _clean_token(token: str) -> str:
    return _EDGE_PUNCT_RE.sub("", token)


def extract_hashtags(text: str, locale: str = DEFAULT_LOCALE) -> set[str]:
    """Case-folded hashtag bodies occurring in the text."""
    return {fold_case(tag, locale) for tag in _HASHTAG_RE.findall(text)}


def text_tokens(text: str, locale: str = DEFAULT_LOCALE) -> list[str]:
    """Case-folded whitespace tokens with edge punctuation stripped."""
    folded = fold_case(text, locale)
    return [cleaned for token in folded.split() if (cleaned := _clean_token(token))]


def _ngram_occurs(tokens: Sequence[str], ngram: Sequence[str]) -> bool:
    n = len(ngram)
    if n == 0 or n > len(tokens):
        return False
    first = ngram[0]
    for i in range(len(tokens) - n + 1):
        if tokens[i] == first and list(tokens[i : i + n]) == list(ngram):
            return True
    return False


def match_keyword(text: str, keyword: Keyword, locale: str = DEFAULT_LOCALE) -> bool:
    """True when the tweet text contains the keyword.

    Hashtag keywords match only the exact hashtag token (case-folded), so
    '#tag' does not match '#tagging'. N-gram keywords match at token
    boundaries, never as substrings.
    """
    if keyword.kind == HASHTAG:
        return keyword.normalized in extract_hashtags(text, locale)
    return _ngram_occurs(text_tokens(text, locale), keyword.normalized.split())


def _tweet_in_day_window(tweet: Tweet, trend_day_number: int, tz_offset: int) -> bool:
    day = tweet.created_at.local_day(tz_offset)
    return day == trend_day_number or day == trend_day_number - 1


class _InstanceBuilder:
    """Accumulates matched tweets for one trend-day."""

    def __init__(self, trend: TrendDay, tz_offset: int):
        self.trend = trend
        self.day_number = trend.day_number(tz_offset)
        self.tweets: dict[int, Tweet] = {}

    def offer_tweet(self, tweet: Tweet) -> None:
        if tweet.id not in self.tweets:
            self.tweets[tweet.id] = tweet

    def build(self, deletions: dict[int, Timestamp]) -> TrendInstance:
        instance = TrendInstance(trend=self.trend)
        instance.tweets = sorted(self.tweets.values(), key=lambda t: (t.created_at, t.id))
        for tweet in instance.tweets:
            when = deletions.get(tweet.id)
            if when is None:
                continue
            if when < tweet.created_at:
                instance.invalid_deletions += 1
                continue
            instance.deletions[tweet.id] = when
        return instance


def _note_deletion(pending: dict[int, Timestamp], tweet_id: int, when: Timestamp) -> None:
    prior = pending.get(tweet_id)
    if prior is None or when < prior:
        pending[tweet_id] = when


def build_trend_instance(
    trend: TrendDay,
    events: Iterable[TweetEvent],
    locale: str = DEFAULT_LOCALE,
    tz_offset: int = DEFAULT_TZ_OFFSET,
) -> TrendInstance:
    """Join one trend-day against an event collection.

    The result is a pure function of the event *set*: shuffling the input
    yields an identical instance. Tweets qualify when their text matches the
    keyword and they fall on the trend's local day or the day before;
    deletion notices attach by tweet id wherever they occur in the input.
    """
    builder = _InstanceBuilder(trend, tz_offset)
    keyword = trend.keyword
    pending: dict[int, Timestamp] = {}
    for event in events:
        if isinstance(event, Creation):
            tweet = event.tweet
            if _tweet_in_day_window(tweet, builder.day_number, tz_offset) and match_keyword(
                tweet.text, keyword, locale
            ):
                builder.offer_tweet(tweet)
        elif isinstance(event, Deletion):
            _note_deletion(pending, event.tweet_id, event.time)
    return builder.build(pending)


def build_trend_instances(
    trends: Sequence[TrendDay],
    events: Iterable[TweetEvent],
    locale: str = DEFAULT_LOCALE,
    tz_offset: int = DEFAULT_TZ_OFFSET,
    collect_deletions: bool = True,
) -> dict[tuple[date, str], TrendInstance]:
    """Join many trend-days against one pass over an event collection.

    Returns a mapping keyed by (date, normalized keyword). Matching is
    indexed: hashtag keywords are looked up against the tweet's extracted
    hashtags, n-gram keywords against its token stream. Deletion notices are
    buffered by id (memory proportional to deletions in the input); callers
    that need bounded memory over large files should use
    build_instances_from_files, which attaches deletions in a second pass.
    """
    builders: dict[tuple[date, str], _InstanceBuilder] = {}
    hashtag_index: dict[str, dict[int, list[_InstanceBuilder]]] = {}
    ngram_index: dict[str, list[tuple[tuple[str, ...], dict[int, list[_InstanceBuilder]]]]] = {}

    for trend in trends:
        key = (trend.date, trend.keyword.normalized)
        if key in builders:
            continue
        builder = _InstanceBuilder(trend, tz_offset)
        builders[key] = builder
        if trend.keyword.kind == HASHTAG:
            by_day = hashtag_index.setdefault(trend.keyword.normalized, {})
            by_day.setdefault(builder.day_number, []).append(builder)
        else:
            tokens = tuple(trend.keyword.normalized.split())
            entries = ngram_index.setdefault(tokens[0], [])
            existing = next((e for e in entries if e[0] == tokens), None)
            if existing is None:
                by_day = {}
                entries.append((tokens, by_day))
            else:
                by_day = existing[1]
            by_day.setdefault(builder.day_number, []).append(builder)

    def offer(by_day: dict[int, list[_InstanceBuilder]], tweet: Tweet, day: int) -> None:
        # A tweet on local day d belongs to trend-days d (same day) and
        # d+1 (posted the day before the trend).
        for day_number in (day, day + 1):
            for builder in by_day.get(day_number, ()):
                builder.offer_tweet(tweet)

    pending: dict[int, Timestamp] = {}
    for event in events:
        if isinstance(event, Creation):
            tweet = event.tweet
            day = tweet.created_at.local_day(tz_offset)
            if hashtag_index:
                for tag in extract_hashtags(tweet.text, locale):
                    by_day = hashtag_index.get(tag)
                    if by_day:
                        offer(by_day, tweet, day)
            if ngram_index:
                tokens = text_tokens(tweet.text, locale)
                for i, token in enumerate(tokens):
                    for ngram_tokens, by_day in ngram_index.get(token, ()):
                        if tuple(tokens[i : i + len(ngram_tokens)]) == ngram_tokens:
                            offer(by_day, tweet, day)
        elif isinstance(event, Deletion) and collect_deletions:
            _note_deletion(pending, event.tweet_id, event.time)

    return {key: builder.build(pending) for key, builder in builders.items()}


def build_instances_from_files(
    trends: Sequence[TrendDay],
    paths: Sequence[str],
    locale: str = DEFAULT_LOCALE,
    tz_offset: int = DEFAULT_TZ_OFFSET,
    stats: Optional[ParseStats] = None,
) -> dict[tuple[date, str], TrendInstance]:
    """Two-pass streaming join over archive files with per-trend memory.

    Pass one collects matching tweets; pass two attaches deletion notices
    for the collected tweet ids only, so peak memory tracks trend content
    rather than corpus size.
    """
    if stats is None:
        stats = ParseStats()

    instances = build_trend_instances(
        trends,
        (e for path in paths for e in read_stream(path, stats=stats)),
        locale,
        tz_offset,
        collect_deletions=False,
    )

    wanted: dict[int, tuple[Tweet, list[TrendInstance]]] = {}
    for instance in instances.values():
        for tweet in instance.tweets:
            if tweet.id in wanted:
                wanted[tweet.id][1].append(instance)
            else:
                wanted[tweet.id] = (tweet, [instance])
    if not wanted:
        return instances

    pending: dict[int, Timestamp] = {}
    for path in paths:
        for event in read_stream(path):
            if isinstance(event, Deletion) and event.tweet_id in wanted:
                _note_deletion(pending, event.tweet_id, event.time)

    for tid, when in pending.items():
        tweet, targets = wanted[tid]
        for instance in targets:
            if when < tweet.created_at:
                instance.invalid_deletions += 1
            else:
                instance.deletions[tid] = when
    return instances
