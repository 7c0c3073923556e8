"""
Shared primitive types used across the pipeline: timestamps, durations,
normalized keywords, and geo points, plus the great-circle distance helper.

All values are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0

# Reporting timezone offset in seconds (UTC+3, Turkey time). Day boundaries
# and hour-of-day statistics default to this unless overridden.
DEFAULT_TZ_OFFSET = 3 * 3600

DEFAULT_LOCALE = "tr"


class TrendGuardError(Exception):
    """Base class for all errors raised by this package."""


class EmptyKeyword(TrendGuardError):
    """Raised when a keyword is empty after trimming."""


@dataclass(frozen=True, slots=True, order=True)
class Duration:
    """A signed span of time in whole seconds."""

    seconds: int

    def __add__(self, other: "Duration") -> "Duration":
        return Duration(self.seconds + other.seconds)

    def __sub__(self, other: "Duration") -> "Duration":
        return Duration(self.seconds - other.seconds)

    def __abs__(self) -> "Duration":
        return Duration(abs(self.seconds))

    def __int__(self) -> int:
        return self.seconds

    @classmethod
    def minutes(cls, m: int) -> "Duration":
        return cls(m * 60)

    @classmethod
    def hours(cls, h: int) -> "Duration":
        return cls(h * 3600)

    @classmethod
    def days(cls, d: int) -> "Duration":
        return cls(d * 86400)


ZERO_DURATION = Duration(0)


@dataclass(frozen=True, slots=True, order=True)
class Timestamp:
    """A UTC instant: integer seconds since the epoch plus optional milliseconds.

    Ordering is total over (seconds, millis). Subtracting two timestamps
    yields a Duration equal to their *second* difference exactly; the
    sub-second part only participates in ordering.
    """

    seconds: int
    millis: int = 0

    def __sub__(self, other: "Timestamp") -> Duration:
        return Duration(self.seconds - other.seconds)

    def shift(self, d: Duration) -> "Timestamp":
        return Timestamp(self.seconds + d.seconds, self.millis)

    @classmethod
    def from_millis(cls, ms: int) -> "Timestamp":
        return cls(ms // 1000, ms % 1000)

    def to_millis(self) -> int:
        return self.seconds * 1000 + self.millis

    def local_day(self, tz_offset: int = DEFAULT_TZ_OFFSET) -> int:
        """Days since the epoch of the local calendar day containing this instant."""
        return (self.seconds + tz_offset) // 86400

    def local_hour(self, tz_offset: int = DEFAULT_TZ_OFFSET) -> int:
        return ((self.seconds + tz_offset) // 3600) % 24


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A (lat, lon) pair in degrees; bounds are enforced at construction."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


HASHTAG = "hashtag"
NGRAM = "ngram"


@dataclass(frozen=True, slots=True)
class Keyword:
    """A target keyword: raw form, locale-folded normalized form, and kind.

    Hashtag keywords keep the leading '#' in ``raw`` but not in
    ``normalized``. Normalization is idempotent.
    """

    raw: str
    normalized: str
    kind: str  # HASHTAG or NGRAM


def fold_case(text: str, locale: str = DEFAULT_LOCALE) -> str:
    """Lowercase ``text`` using locale rules.

    For Turkish, dotted and dotless I are folded per the locale ('I' -> 'ı',
    'İ' -> 'i'); everything else uses the default Unicode lowering.
    """
    if locale == "tr":
        text = text.replace("İ", "i").replace("I", "ı")
    return text.lower()


def normalize_keyword(raw: str, locale: str = DEFAULT_LOCALE) -> Keyword:
    """Build a Keyword from raw text: trim, strip a leading '#', case-fold.

    Raises EmptyKeyword when the input is empty after trimming.
    """
    trimmed = raw.strip()
    if not trimmed:
        raise EmptyKeyword(f"keyword is empty after trimming: {raw!r}")
    if trimmed.startswith("#"):
        body = trimmed.lstrip("#")
        if not body:
            raise EmptyKeyword(f"hashtag has no body: {raw!r}")
        return Keyword(raw=trimmed, normalized=fold_case(body, locale), kind=HASHTAG)
    return Keyword(raw=trimmed, normalized=fold_case(trimmed, locale), kind=NGRAM)


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in kilometers (R = 6371.0 km)."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))
