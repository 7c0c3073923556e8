"""
Attack-success measurements over real-time trend snapshots: trend
lifecycles (entry/exit/rank), speed from pre-entry tweet activity, deletion
ratios before entry, daily prevalence of attacked trends in the top-K,
entry-hour histograms, geotag travel distances, and the undeleted-volume
comparison between attacked and other trends.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import (
    DEFAULT_TZ_OFFSET,
    Duration,
    GeoPoint,
    Keyword,
    Timestamp,
    TrendGuardError,
    haversine_km,
)
from .ingest import TrendEpoch, TrendInstance, day_number_to_date
from .detector import Verdict


class NeverTrended(TrendGuardError):
    """The keyword appears in no trend epoch."""


class NoPriorTweets(TrendGuardError):
    """No tweets precede the trend's first list entry."""


class InsufficientPoints(TrendGuardError):
    """Fewer than two geotagged points fall inside the window."""


class InconsistentTimeline(TrendGuardError):
    """Derived time quantities contradict each other (negative speed)."""


@dataclass(frozen=True, slots=True)
class TrendLifecycle:
    keyword: Keyword
    first_entry: Timestamp
    first_exit: Timestamp
    initial_rank: int
    best_rank: int

    @property
    def listed_for(self) -> Duration:
        return self.first_exit - self.first_entry


def lifecycle(keyword: Keyword, epochs: Sequence[TrendEpoch]) -> TrendLifecycle:
    """First entry/exit and ranks for a keyword over time-ordered epochs.

    Exit time is the capture time of the first epoch missing the keyword
    after its entry (an upper bound within one snapshot interval). A keyword
    still listed in the final epoch uses that epoch's capture time. Only the
    first listing span is considered; re-entries start new lifecycles and
    are ignored here.
    """
    normalized = keyword.normalized
    first_entry = None
    initial_rank = None
    best_rank = None
    first_exit = None
    last_seen = None
    for epoch in epochs:
        rank = epoch.rank_of(normalized)
        if first_entry is None:
            if rank is not None:
                first_entry = epoch.captured_at
                initial_rank = rank
                best_rank = rank
                last_seen = epoch.captured_at
        else:
            if rank is None:
                first_exit = epoch.captured_at
                break
            best_rank = min(best_rank, rank)
            last_seen = epoch.captured_at
    if first_entry is None:
        raise NeverTrended(f"{keyword.raw!r} never appears in the epochs")
    if first_exit is None:
        first_exit = last_seen
    return TrendLifecycle(
        keyword=keyword,
        first_entry=first_entry,
        first_exit=first_exit,
        initial_rank=initial_rank,
        best_rank=best_rank,
    )


def trend_speed(instance: TrendInstance, cycle: TrendLifecycle) -> Duration:
    """Entry time minus the median creation time of pre-entry tweets."""
    pre_entry = [t.created_at.seconds for t in instance.tweets if t.created_at < cycle.first_entry]
    if not pre_entry:
        raise NoPriorTweets(f"no tweets precede entry of {cycle.keyword.raw!r}")
    median = statistics.median(pre_entry)
    speed = cycle.first_entry.seconds - median
    if speed < 0:
        raise InconsistentTimeline(
            f"median pre-entry time is after entry for {cycle.keyword.raw!r}"
        )
    return Duration(round(speed))


def pre_entry_deletion_ratio(instance: TrendInstance, cycle: TrendLifecycle) -> float:
    """Among pre-entry tweets, the fraction already deleted before entry."""
    total = 0
    deleted = 0
    for tweet in instance.tweets:
        if tweet.created_at >= cycle.first_entry:
            continue
        total += 1
        deleted_at = instance.deletions.get(tweet.id)
        if deleted_at is not None and deleted_at < cycle.first_entry:
            deleted += 1
    return deleted / total if total else 0.0


VerdictMap = Mapping[tuple[date, str], bool]


def _as_verdict_map(verdicts: Union[VerdictMap, Iterable[Verdict]]) -> VerdictMap:
    if isinstance(verdicts, Mapping):
        return verdicts
    mapping = {}
    for verdict in verdicts:
        if verdict.trend is None:
            continue
        key = (verdict.trend.date, verdict.trend.keyword.normalized)
        mapping[key] = mapping.get(key, False) or verdict.attacked
    return mapping


def prevalence(
    verdicts: Union[VerdictMap, Iterable[Verdict]],
    epochs: Sequence[TrendEpoch],
    k: int = 10,
    tz_offset: int = DEFAULT_TZ_OFFSET,
) -> dict[date, float]:
    """Per-day fraction of unique top-k entrants classified as attacked.

    A keyword counts once per local day it appears at rank <= k. Days with
    no entrants are omitted. The daily average of the returned fractions is
    the headline prevalence number.
    """
    verdict_map = _as_verdict_map(verdicts)
    entrants: dict[int, set[str]] = {}
    for epoch in epochs:
        day = epoch.captured_at.local_day(tz_offset)
        for rank, keyword, _ in epoch.entries:
            if rank <= k:
                entrants.setdefault(day, set()).add(keyword.normalized)
    result = {}
    for day, keywords in sorted(entrants.items()):
        day_date = day_number_to_date(day)
        attacked = sum(1 for kw in keywords if verdict_map.get((day_date, kw), False))
        result[day_date] = attacked / len(keywords)
    return result


def daily_average(per_day: Mapping[date, float]) -> float:
    return sum(per_day.values()) / len(per_day) if per_day else 0.0


def entry_hour_histogram(
    lifecycles: Iterable[TrendLifecycle], tz_offset: int = DEFAULT_TZ_OFFSET
) -> list[int]:
    """Counts of first-entry hour of day (24 bins, reporting timezone)."""
    bins = [0] * 24
    for cycle in lifecycles:
        bins[cycle.first_entry.local_hour(tz_offset)] += 1
    return bins


def user_travel_distance(
    points: Sequence[tuple[Timestamp, GeoPoint]], window: Duration = Duration.days(5)
) -> float:
    """Total chronological great-circle distance over points within the window.

    The window anchors at the earliest point. Raises InsufficientPoints when
    fewer than two points remain inside it.
    """
    ordered = sorted(points, key=lambda p: p[0])
    if not ordered:
        raise InsufficientPoints("no geotagged points")
    t0 = ordered[0][0]
    inside = [p for p in ordered if (p[0] - t0).seconds <= window.seconds]
    if len(inside) < 2:
        raise InsufficientPoints(f"need at least 2 points in window, have {len(inside)}")
    total = 0.0
    for (_, a), (_, b) in zip(inside, inside[1:]):
        total += haversine_km(a, b)
    return total


@dataclass(frozen=True, slots=True)
class VolumeRow:
    label: str
    n_trends: int
    median_undeleted: Optional[float]
    median_volume: Optional[float]


def volume_report(
    instances: Mapping[tuple[date, str], TrendInstance],
    verdicts: Union[VerdictMap, Iterable[Verdict]],
    epochs: Sequence[TrendEpoch],
    tz_offset: int = DEFAULT_TZ_OFFSET,
) -> list[VolumeRow]:
    """Median undeleted tweet count and reported volume, attacked vs other.

    A trend's volume is the largest value the snapshots report for its
    keyword on its local day; trends whose snapshots never report a volume
    contribute nothing to the volume median.
    """
    verdict_map = _as_verdict_map(verdicts)
    volume_index: dict[tuple[int, str], int] = {}
    for epoch in epochs:
        day = epoch.captured_at.local_day(tz_offset)
        for _, keyword, volume in epoch.entries:
            if volume is None:
                continue
            key = (day, keyword.normalized)
            volume_index[key] = max(volume, volume_index.get(key, 0))

    undeleted: dict[str, list[int]] = {"attacked": [], "other": []}
    volumes: dict[str, list[int]] = {"attacked": [], "other": []}
    for key, instance in instances.items():
        day_date, normalized = key
        label = "attacked" if verdict_map.get(key, False) else "other"
        undeleted[label].append(len(instance.tweets) - len(instance.deletions))
        day_number = day_date.toordinal() - date(1970, 1, 1).toordinal()
        volume = volume_index.get((day_number, normalized))
        if volume is not None:
            volumes[label].append(volume)

    rows = []
    for label in ("attacked", "other"):
        counts = undeleted[label]
        vols = volumes[label]
        rows.append(
            VolumeRow(
                label=label,
                n_trends=len(counts),
                median_undeleted=float(np.median(counts)) if counts else None,
                median_volume=float(np.median(vols)) if vols else None,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# CSV writers
# ---------------------------------------------------------------------------

def write_lifecycles_csv(handle, lifecycles: Iterable[TrendLifecycle]) -> None:
    writer = csv.writer(handle)
    writer.writerow(["keyword", "first_entry_s", "first_exit_s", "initial_rank", "best_rank"])
    for cycle in lifecycles:
        writer.writerow(
            [
                cycle.keyword.normalized,
                cycle.first_entry.seconds,
                cycle.first_exit.seconds,
                cycle.initial_rank,
                cycle.best_rank,
            ]
        )


def write_prevalence_csv(handle, per_day: Mapping[date, float]) -> None:
    writer = csv.writer(handle)
    writer.writerow(["date", "attacked_fraction"])
    for day in sorted(per_day):
        writer.writerow([day.isoformat(), per_day[day]])


def write_histogram_csv(handle, bins: Sequence[int]) -> None:
    writer = csv.writer(handle)
    writer.writerow(["hour", "count"])
    for hour, count in enumerate(bins):
        writer.writerow([hour, count])


def write_volume_csv(handle, rows: Iterable[VolumeRow]) -> None:
    writer = csv.writer(handle)
    writer.writerow(["class", "n_trends", "median_undeleted", "median_volume"])
    for row in rows:
        writer.writerow(
            [
                row.label,
                row.n_trends,
                "" if row.median_undeleted is None else row.median_undeleted,
                "" if row.median_volume is None else row.median_volume,
            ]
        )
