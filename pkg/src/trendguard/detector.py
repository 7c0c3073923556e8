"""
Trend-level attack classification and tweet-level attack-window detection.

Classification applies configurable rule presets (count and ratio thresholds
over FeatureVector fields) as small decision formulas in disjunctive normal
form. Window detection finds maximal clusters of deleted single-engagement
tweets whose creation span, deletion span, and per-tweet lifetimes all fit
the configured attack parameters, with at most one tweet per user.
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Optional, Sequence

from .core import (
    DEFAULT_LOCALE,
    DEFAULT_TZ_OFFSET,
    Duration,
    HASHTAG,
    Keyword,
    Timestamp,
    TrendGuardError,
)
from .ingest import (
    Creation,
    Deletion,
    TrendDay,
    TrendInstance,
    Tweet,
    TweetEvent,
    day_number_to_date,
    extract_hashtags,
)
from .classify import TweetFlags, flags_for_instance
from .features import FeatureVector, count_features


class UnknownRule(TrendGuardError):
    """A formula referenced a rule id that is not defined."""


@dataclass(frozen=True, slots=True)
class AttackParams:
    """Quantitative attack-model parameters; all CLI-overridable.

    Defaults suit 1%-sampled data: clusters of at least 4 tweets created and
    deleted within five-minute windows, every tweet gone within ten minutes.
    """

    kappa: int = 4
    alpha_p: Duration = Duration(300)
    alpha_d: Duration = Duration(300)
    theta: Duration = Duration(600)

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be at least 1")
        if min(self.alpha_p.seconds, self.alpha_d.seconds, self.theta.seconds) < 0:
            raise ValueError("window durations must be non-negative")


# The nine threshold rules; each maps to one FeatureVector field.
RULE_FEATURES: dict[str, str] = {
    "1": "n_deleted",
    "2": "deletion_ratio",
    "3": "n_deleted_nonretweet",
    "4": "nonretweet_deletion_ratio",
    "5": "n_deleted_set",
    "6": "set_deletion_ratio",
    "7": "initial_deletions",
    "8": "n_deleted_lexicon",
    "9": "lexicon_deletion_ratio",
}

GE = ">="
GT = ">"


@dataclass(frozen=True, slots=True)
class RuleCheck:
    """One conjunct of a preset formula: feature(rule_id) op threshold."""

    rule_id: str
    threshold: float
    op: str = GE


# Formulas are OR-of-ANDs over rule checks. The default lexicon tree wants
# at least 4 deleted lexicon tweets with strictly more than 45% of lexicon
# tweets deleted; the strict variant raises the ratio cut to 68% for extra
# precision headroom. The lexicon-agnostic tree's strong branch needs many
# deleted single-engagement tweets at a high deletion share, and its second
# branch admits smaller bursts whose initial-deletion prefix is long.
PRESET_FORMULAS: dict[str, tuple[tuple[RuleCheck, ...], ...]] = {
    "lexicon-tree": ((RuleCheck("8", 4), RuleCheck("9", 0.45, GT)),),
    "lexicon-tree-strict": ((RuleCheck("8", 4), RuleCheck("9", 0.68)),),
    "lexicon-agnostic-tree": (
        (RuleCheck("5", 10), RuleCheck("6", 0.50)),
        (RuleCheck("5", 4), RuleCheck("7", 4)),
    ),
    "ratio-only": ((RuleCheck("1", 17), RuleCheck("2", 0.25)),),
}

PRESETS = tuple(PRESET_FORMULAS) + ("custom",)


@dataclass
class DetectorConfig:
    """A preset name plus optional per-rule threshold overrides.

    Overrides apply to every occurrence of the rule id in the preset's
    formula. A fully custom formula (preset="custom") supplies its own
    DNF clause list.
    """

    preset: str = "lexicon-tree"
    thresholds: dict[str, float] = field(default_factory=dict)
    formula: Optional[Sequence[Sequence[RuleCheck]]] = None

    def resolved_formula(self) -> tuple[tuple[RuleCheck, ...], ...]:
        if self.preset == "custom":
            if not self.formula:
                raise UnknownRule("custom preset requires an explicit formula")
            clauses = tuple(tuple(clause) for clause in self.formula)
        else:
            try:
                clauses = PRESET_FORMULAS[self.preset]
            except KeyError:
                raise UnknownRule(f"unknown preset: {self.preset!r}") from None
        resolved = []
        for clause in clauses:
            slots = []
            for check in clause:
                if check.rule_id not in RULE_FEATURES:
                    raise UnknownRule(f"undefined rule id: {check.rule_id!r}")
                threshold = self.thresholds.get(check.rule_id, check.threshold)
                slots.append(RuleCheck(check.rule_id, threshold, check.op))
            resolved.append(tuple(slots))
        return tuple(resolved)


@dataclass(frozen=True, slots=True)
class RuleResult:
    rule_id: str
    value: float
    threshold: float
    op: str
    passed: bool


@dataclass
class Verdict:
    trend: Optional[TrendDay]
    attacked: bool
    fired_rules: list[RuleResult]
    features: FeatureVector
    preset: str


def classify_trend(
    features: FeatureVector, config: DetectorConfig, trend: Optional[TrendDay] = None
) -> Verdict:
    """Evaluate the preset formula over a feature vector.

    The verdict is attacked exactly when some clause has every rule passing.
    """
    clauses = config.resolved_formula()
    results: list[RuleResult] = []
    attacked = False
    for clause in clauses:
        clause_ok = True
        for check in clause:
            value = float(getattr(features, RULE_FEATURES[check.rule_id]))
            passed = value > check.threshold if check.op == GT else value >= check.threshold
            results.append(RuleResult(check.rule_id, value, check.threshold, check.op, passed))
            clause_ok = clause_ok and passed
        attacked = attacked or clause_ok
    return Verdict(
        trend=trend,
        attacked=attacked,
        fired_rules=results,
        features=features,
        preset=config.preset,
    )


# ---------------------------------------------------------------------------
# Attack-window detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class AttackEvent:
    """A concrete tweet cluster satisfying all attack-model conditions."""

    tweet_ids: frozenset[int]
    users: frozenset[int]
    start: Timestamp
    end: Timestamp
    creation_window: Duration
    deletion_window: Duration
    max_lifetime: Duration


def attack_candidates(
    instance: TrendInstance,
    flags: Mapping[int, TweetFlags],
    params: AttackParams,
    require_lexicon: bool = False,
) -> list[tuple[Tweet, Timestamp]]:
    """Deleted single-engagement tweets eligible for clustering.

    Tweets whose lifetime exceeds theta can belong to no cluster and are
    dropped here. A user contributes at most their earliest eligible tweet,
    so every cluster automatically has one tweet per user.
    """
    eligible = []
    for tweet in instance.tweets:
        deleted_at = instance.deletions.get(tweet.id)
        if deleted_at is None:
            continue
        flag = flags[tweet.id]
        if not flag.is_single_engagement:
            continue
        if require_lexicon and not flag.is_lexicon:
            continue
        lifetime = (deleted_at - tweet.created_at).seconds
        if lifetime < 0 or lifetime > params.theta.seconds:
            continue
        eligible.append((tweet, deleted_at))
    eligible.sort(key=lambda td: (td[0].created_at, td[0].id))
    per_user: dict[int, tuple[Tweet, Timestamp]] = {}
    for tweet, deleted_at in eligible:
        if tweet.user_id not in per_user:
            per_user[tweet.user_id] = (tweet, deleted_at)
    return sorted(per_user.values(), key=lambda td: (td[0].created_at, td[0].id))


def detect_attack_windows(
    instance: TrendInstance,
    flags: Mapping[int, TweetFlags],
    params: AttackParams,
    require_lexicon: bool = False,
    merge_overlapping: bool = False,
) -> list[AttackEvent]:
    """Find every maximal attack cluster in a trend instance.

    A cluster is a candidate subset with at least kappa tweets whose
    creation span fits alpha_p and deletion span fits alpha_d; maximal means
    no eligible tweet can be added without breaking a window. Clusters are
    enumerated by anchoring a creation window at each distinct creation time
    and a deletion window at each distinct deletion time inside it; subset
    clusters are discarded.

    Back-to-back bursts produce families of pairwise-overlapping maximal
    clusters (a window can straddle the tail of one burst and the head of
    the next). With merge_overlapping, each family of clusters sharing
    tweets collapses into one summary event whose tweet set is the union;
    a merged event's spans describe the whole burst region and may exceed
    alpha_p/alpha_d, unlike the per-cluster guarantees of the default mode.
    """
    cands = attack_candidates(instance, flags, params, require_lexicon)
    n = len(cands)
    if n < params.kappa:
        return []

    p = [t.created_at.seconds for t, _ in cands]
    alpha_p = params.alpha_p.seconds
    alpha_d = params.alpha_d.seconds

    raw: list[frozenset[int]] = []
    seen_anchor = set()
    for i in range(n):
        if p[i] in seen_anchor:
            continue
        seen_anchor.add(p[i])
        lo = bisect_left(p, p[i])
        hi = bisect_right(p, p[i] + alpha_p)
        window = sorted(range(lo, hi), key=lambda j: (cands[j][1], cands[j][0].id))
        dvals = [cands[j][1].seconds for j in window]
        seen_d = set()
        for a in range(len(window)):
            if dvals[a] in seen_d:
                continue
            seen_d.add(dvals[a])
            b = bisect_right(dvals, dvals[a] + alpha_d)
            members = window[a:b]
            if len(members) < params.kappa:
                continue
            # Canonical anchor only: the run is regenerated (possibly larger)
            # at the window anchored on its actual earliest creation.
            if min(p[j] for j in members) != p[i]:
                continue
            raw.append(frozenset(members))

    raw.sort(key=len, reverse=True)
    maximal: list[frozenset[int]] = []
    for cluster in raw:
        if any(cluster < kept or cluster == kept for kept in maximal):
            continue
        maximal.append(cluster)

    if merge_overlapping:
        maximal = _merge_components(maximal)

    events = []
    for cluster in maximal:
        members = [cands[j] for j in sorted(cluster)]
        creations = [t.created_at.seconds for t, _ in members]
        deletions = [d.seconds for _, d in members]
        events.append(
            AttackEvent(
                tweet_ids=frozenset(t.id for t, _ in members),
                users=frozenset(t.user_id for t, _ in members),
                start=min((t.created_at for t, _ in members)),
                end=max((d for _, d in members)),
                creation_window=Duration(max(creations) - min(creations)),
                deletion_window=Duration(max(deletions) - min(deletions)),
                max_lifetime=Duration(max(d.seconds - t.created_at.seconds for t, d in members)),
            )
        )
    events.sort(key=lambda e: (e.start, min(e.tweet_ids)))
    return events


def _merge_components(clusters: list[frozenset[int]]) -> list[frozenset[int]]:
    """Union clusters that share at least one member, via union-find."""
    parent = list(range(len(clusters)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for idx, cluster in enumerate(clusters):
        for member in cluster:
            if member in owner:
                a, b = find(owner[member]), find(idx)
                if a != b:
                    parent[b] = a
            else:
                owner[member] = idx
    merged: dict[int, set[int]] = {}
    for idx, cluster in enumerate(clusters):
        merged.setdefault(find(idx), set()).update(cluster)
    return [frozenset(members) for members in merged.values()]


# ---------------------------------------------------------------------------
# Astrobot labeling and non-trending candidate scan
# ---------------------------------------------------------------------------

def label_astrobots(
    instances: Iterable[TrendInstance],
    verdicts: Iterable[Verdict],
    flags: Mapping[tuple[date, str], Mapping[int, TweetFlags]],
    tz_offset: int = DEFAULT_TZ_OFFSET,
) -> set[int]:
    """Users who posted a same-day-deleted lexicon tweet into an attacked trend."""
    attacked_keys = {
        (v.trend.date, v.trend.keyword.normalized)
        for v in verdicts
        if v.attacked and v.trend is not None
    }
    bots: set[int] = set()
    for instance in instances:
        key = (instance.trend.date, instance.keyword.normalized)
        if key not in attacked_keys:
            continue
        instance_flags = flags[key]
        for tweet in instance.tweets:
            deleted_at = instance.deletions.get(tweet.id)
            if deleted_at is None:
                continue
            if not instance_flags[tweet.id].is_lexicon:
                continue
            if deleted_at.local_day(tz_offset) == tweet.created_at.local_day(tz_offset):
                bots.add(tweet.user_id)
    return bots


def scan_candidates(
    events: Iterable[TweetEvent],
    known_trends: set[tuple[date, str]],
    config: DetectorConfig,
    locale: str = DEFAULT_LOCALE,
    min_tweets: int = 4,
    tz_offset: int = DEFAULT_TZ_OFFSET,
) -> list[Verdict]:
    """Classify hashtag-days that never made the trends list.

    Hashtags are grouped per local day; groups with at least ``min_tweets``
    tweets that were not trending that day or the next are run through the
    feature pipeline. Positive verdicts are unsuccessful attacks.
    """
    groups: dict[tuple[int, str], dict[int, Tweet]] = {}
    deletions: dict[int, Timestamp] = {}
    for event in events:
        if isinstance(event, Creation):
            tweet = event.tweet
            day = tweet.created_at.local_day(tz_offset)
            for tag in extract_hashtags(tweet.text, locale):
                groups.setdefault((day, tag), {}).setdefault(tweet.id, tweet)
        elif isinstance(event, Deletion):
            prior = deletions.get(event.tweet_id)
            if prior is None or event.time < prior:
                deletions[event.tweet_id] = event.time

    verdicts = []
    for (day, tag), tweets in sorted(groups.items()):
        if len(tweets) < min_tweets:
            continue
        day_date = day_number_to_date(day)
        next_date = day_number_to_date(day + 1)
        if (day_date, tag) in known_trends or (next_date, tag) in known_trends:
            continue
        trend = TrendDay(date=day_date, keyword=Keyword("#" + tag, tag, HASHTAG))
        instance = TrendInstance(trend=trend)
        instance.tweets = sorted(tweets.values(), key=lambda t: (t.created_at, t.id))
        for tweet in instance.tweets:
            when = deletions.get(tweet.id)
            if when is None:
                continue
            if when < tweet.created_at:
                instance.invalid_deletions += 1
            else:
                instance.deletions[tweet.id] = when
        instance_flags = flags_for_instance(instance, locale)
        vector = count_features(instance, instance_flags)
        verdicts.append(classify_trend(vector, config, trend=trend))
    return verdicts


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def verdict_record(verdict: Verdict) -> dict:
    record = {
        "attacked": verdict.attacked,
        "preset": verdict.preset,
        "fired_rules": [
            {
                "rule": r.rule_id,
                "value": r.value,
                "threshold": r.threshold,
                "op": r.op,
                "passed": r.passed,
            }
            for r in verdict.fired_rules
        ],
        "features": verdict.features.to_dict(),
    }
    if verdict.trend is not None:
        record["date"] = verdict.trend.date.isoformat()
        record["keyword"] = verdict.trend.keyword.normalized
        record["kind"] = verdict.trend.keyword.kind
    return record


def write_verdicts_jsonl(handle, verdicts: Iterable[Verdict]) -> None:
    for verdict in verdicts:
        handle.write(json.dumps(verdict_record(verdict), sort_keys=True) + "\n")


def write_astrobots(handle, user_ids: Iterable[int]) -> None:
    for user_id in sorted(user_ids):
        handle.write(f"{user_id}\n")
