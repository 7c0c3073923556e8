"""
Per-trend behavioral features consumed by the detectors: deletion counts
and ratios over several tweet subsets, the initial-deletion prefix, creation
and deletion windows over attack-candidate tweets, lifetimes, and the
per-minute burst entropy of creations and deletions.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .core import Duration, Timestamp, TrendGuardError, ZERO_DURATION
from .ingest import TrendInstance, Tweet
from .classify import TweetFlags


class NoCandidates(TrendGuardError):
    """attack_windows was asked for a window over an empty candidate subset."""


@dataclass(frozen=True, slots=True)
class FeatureVector:
    n_tweets: int
    n_deleted: int
    n_nonretweet: int
    n_deleted_nonretweet: int
    n_set: int
    n_deleted_set: int
    n_lexicon: int
    n_deleted_lexicon: int
    deletion_ratio: float
    nonretweet_deletion_ratio: float
    set_deletion_ratio: float
    lexicon_deletion_ratio: float
    initial_deletions: int
    creation_window: Duration
    deletion_window: Duration
    lifetime_median: Optional[float]  # seconds
    lifetime_mean: Optional[float]    # seconds
    entropy_create: float             # bits
    entropy_delete: float             # bits

    def to_dict(self) -> dict:
        return {
            "n_tweets": self.n_tweets,
            "n_deleted": self.n_deleted,
            "n_nonretweet": self.n_nonretweet,
            "n_deleted_nonretweet": self.n_deleted_nonretweet,
            "n_set": self.n_set,
            "n_deleted_set": self.n_deleted_set,
            "n_lexicon": self.n_lexicon,
            "n_deleted_lexicon": self.n_deleted_lexicon,
            "deletion_ratio": self.deletion_ratio,
            "nonretweet_deletion_ratio": self.nonretweet_deletion_ratio,
            "set_deletion_ratio": self.set_deletion_ratio,
            "lexicon_deletion_ratio": self.lexicon_deletion_ratio,
            "initial_deletions": self.initial_deletions,
            "creation_window_s": self.creation_window.seconds,
            "deletion_window_s": self.deletion_window.seconds,
            "lifetime_median_s": self.lifetime_median,
            "lifetime_mean_s": self.lifetime_mean,
            "entropy_create": self.entropy_create,
            "entropy_delete": self.entropy_delete,
        }


FEATURE_COLUMNS = (
    "n_tweets",
    "n_deleted",
    "n_nonretweet",
    "n_deleted_nonretweet",
    "n_set",
    "n_deleted_set",
    "n_lexicon",
    "n_deleted_lexicon",
    "deletion_ratio",
    "nonretweet_deletion_ratio",
    "set_deletion_ratio",
    "lexicon_deletion_ratio",
    "initial_deletions",
    "creation_window_s",
    "deletion_window_s",
    "lifetime_median_s",
    "lifetime_mean_s",
    "entropy_create",
    "entropy_delete",
)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _ordered(tweets: Iterable[Tweet]) -> list[Tweet]:
    return sorted(tweets, key=lambda t: (t.created_at, t.id))


def minute_entropy(timestamps: Iterable[Timestamp]) -> float:
    """Shannon entropy (bits) of event counts per absolute epoch minute.

    Bins align to epoch minutes, so the value is independent of input order
    and of which event happens to come first. An empty input has entropy 0.
    """
    counts = Counter(ts.seconds // 60 for ts in timestamps)
    if not counts:
        return 0.0
    # Summation in canonical bin order keeps the value exactly
    # permutation-invariant despite floating-point non-associativity.
    values = np.array([counts[b] for b in sorted(counts)], dtype=np.float64)
    probs = values / values.sum()
    return float(-(probs * np.log2(probs)).sum())


def initial_deletions(instance: TrendInstance, flags: Mapping[int, TweetFlags]) -> int:
    """Length of the creation-ordered prefix of deleted single-engagement tweets.

    Ties in creation time break by ascending tweet id. The count stops at
    the first tweet that is kept or engages anything beyond the keyword.
    """
    count = 0
    for tweet in _ordered(instance.tweets):
        flag = flags[tweet.id]
        if flag.is_single_engagement and tweet.id in instance.deletions:
            count += 1
        else:
            break
    return count


@dataclass(frozen=True, slots=True)
class LifetimeStats:
    lifetimes: tuple[int, ...]       # seconds, per deleted tweet
    median: Optional[float]          # seconds; None when nothing was deleted
    mean: Optional[float]
    negative_excluded: int


def lifetime_stats(instance: TrendInstance) -> LifetimeStats:
    """Deletion-minus-creation lifetimes over deleted tweets.

    Negative lifetimes (inconsistent notices) are excluded and counted.
    """
    lifetimes = []
    negative = 0
    for tweet in instance.tweets:
        deleted_at = instance.deletions.get(tweet.id)
        if deleted_at is None:
            continue
        span = (deleted_at - tweet.created_at).seconds
        if span < 0:
            negative += 1
            continue
        lifetimes.append(span)
    if not lifetimes:
        return LifetimeStats((), None, None, negative)
    arr = np.array(lifetimes, dtype=np.int64)
    return LifetimeStats(tuple(lifetimes), float(np.median(arr)), float(arr.mean()), negative)


def _candidate_subset(
    instance: TrendInstance, flags: Mapping[int, TweetFlags]
) -> list[Tweet]:
    """Deleted-lexicon tweets if any exist, else deleted single-engagement tweets."""
    deleted = [t for t in instance.tweets if t.id in instance.deletions]
    lexicon = [t for t in deleted if flags[t.id].is_lexicon]
    if lexicon:
        return lexicon
    return [t for t in deleted if flags[t.id].is_single_engagement]


def attack_windows(
    instance: TrendInstance, flags: Mapping[int, TweetFlags]
) -> tuple[Duration, Duration]:
    """Creation and deletion spans over the attack-candidate tweet subset.

    Raises NoCandidates when no deleted lexicon or single-engagement tweet
    exists.
    """
    subset = _candidate_subset(instance, flags)
    if not subset:
        raise NoCandidates(f"no attack-candidate tweets for {instance.trend}")
    creations = [t.created_at.seconds for t in subset]
    deletions = [instance.deletions[t.id].seconds for t in subset]
    return (
        Duration(max(creations) - min(creations)),
        Duration(max(deletions) - min(deletions)),
    )


def count_features(instance: TrendInstance, flags: Mapping[int, TweetFlags]) -> FeatureVector:
    """All counts, ratios, windows, and entropies for one trend instance."""
    n_tweets = len(instance.tweets)
    n_deleted = n_nonretweet = n_deleted_nonretweet = 0
    n_set = n_deleted_set = n_lexicon = n_deleted_lexicon = 0
    for tweet in instance.tweets:
        flag = flags[tweet.id]
        deleted = tweet.id in instance.deletions
        n_deleted += deleted
        if not tweet.is_retweet:
            n_nonretweet += 1
            n_deleted_nonretweet += deleted
        if flag.is_single_engagement:
            n_set += 1
            n_deleted_set += deleted
        if flag.is_lexicon:
            n_lexicon += 1
            n_deleted_lexicon += deleted

    try:
        creation_window, deletion_window = attack_windows(instance, flags)
    except NoCandidates:
        creation_window = deletion_window = ZERO_DURATION

    lifetimes = lifetime_stats(instance)

    return FeatureVector(
        n_tweets=n_tweets,
        n_deleted=n_deleted,
        n_nonretweet=n_nonretweet,
        n_deleted_nonretweet=n_deleted_nonretweet,
        n_set=n_set,
        n_deleted_set=n_deleted_set,
        n_lexicon=n_lexicon,
        n_deleted_lexicon=n_deleted_lexicon,
        deletion_ratio=_ratio(n_deleted, n_tweets),
        nonretweet_deletion_ratio=_ratio(n_deleted_nonretweet, n_nonretweet),
        set_deletion_ratio=_ratio(n_deleted_set, n_set),
        lexicon_deletion_ratio=_ratio(n_deleted_lexicon, n_lexicon),
        initial_deletions=initial_deletions(instance, flags),
        creation_window=creation_window,
        deletion_window=deletion_window,
        lifetime_median=lifetimes.median,
        lifetime_mean=lifetimes.mean,
        entropy_create=minute_entropy(t.created_at for t in instance.tweets),
        entropy_delete=minute_entropy(instance.deletions.values()),
    )


def write_feature_csv(handle, rows: Iterable[tuple[TrendInstance, FeatureVector]]) -> None:
    """One row per trend instance, fixed column order."""
    writer = csv.writer(handle)
    writer.writerow(("date", "keyword") + FEATURE_COLUMNS)
    for instance, vector in rows:
        record = vector.to_dict()
        writer.writerow(
            [instance.trend.date.isoformat(), instance.keyword.normalized]
            + [record[col] for col in FEATURE_COLUMNS]
        )
