"""
Synthetic labeled event streams for detector validation: organic trends,
background chatter, and attack clusters that satisfy the attack model by
construction, plus a toy trending oracle with a deletion-penalty
countermeasure and an end-to-end evaluation harness.

Streams are replayable: LabeledStream.events() regenerates the identical
event sequence from the scenario seed, so serialization is byte-identical
across runs and memory stays bounded by one day of activity.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .core import (
    DEFAULT_LOCALE,
    DEFAULT_TZ_OFFSET,
    Duration,
    GeoPoint,
    Keyword,
    Timestamp,
    TrendGuardError,
    normalize_keyword,
)
from .ingest import (
    Creation,
    Deletion,
    TrendDay,
    Tweet,
    TweetEvent,
    extract_hashtags,
    text_tokens,
)
from .detector import AttackParams, DetectorConfig, classify_trend
from .features import count_features


class WordlistTooSmall(TrendGuardError):
    """The lexicon wordlist has fewer than 10 usable words."""


class InfeasibleParams(TrendGuardError):
    """No deletion schedule can satisfy the requested windows."""


def load_wordlist(path: Optional[str] = None) -> tuple[str, ...]:
    """Load the bundled (or a custom) lexicon wordlist: one lowercase word per line."""
    if path is None:
        from importlib.resources import files

        text = files("trendguard").joinpath("data/wordlist.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    words = tuple(w for w in (line.strip() for line in text.splitlines()) if w)
    if len(words) < 10:
        raise WordlistTooSmall(f"need at least 10 words, have {len(words)}")
    return words


def gen_lexicon_text(wordlist: Sequence[str], rng: random.Random) -> str:
    """2-9 uniformly chosen lowercase words joined by single spaces."""
    if len(wordlist) < 10:
        raise WordlistTooSmall(f"need at least 10 words, have {len(wordlist)}")
    count = rng.randint(2, 9)
    return " ".join(rng.choice(wordlist) for _ in range(count))


# ---------------------------------------------------------------------------
# Event cluster generators
# ---------------------------------------------------------------------------

@dataclass
class EventCluster:
    events: list[TweetEvent]
    user_ids: set[int]
    tweet_ids: set[int]


def _place_keyword(words: list[str], keyword: Keyword, rng: random.Random) -> str:
    position = rng.randint(0, len(words))
    return " ".join(words[:position] + keyword.raw.split() + words[position:])


def _keyword_hashtags(keyword: Keyword) -> tuple[str, ...]:
    if keyword.kind == "hashtag":
        return (keyword.raw.lstrip("#"),)
    return ()


def gen_attack(
    keyword: Keyword,
    params: AttackParams,
    n_bots: int,
    t0: int,
    rng: random.Random,
    wordlist: Sequence[str],
    tweet_id_start: int = 1,
    user_id_start: int = 1,
    creation_span: Optional[int] = None,
    deletion_span: Optional[int] = None,
    deletion_lag: int = 1,
    geo_rate: float = 0.0,
) -> EventCluster:
    """One attack: n_bots distinct users each post and delete one lexicon tweet.

    Creations land in [t0, t0 + alpha_p), deletions share an alpha_d window,
    and every lifetime stays under theta. Raises InfeasibleParams when theta
    leaves no room for a positive lifetime.
    """
    if n_bots < 1:
        raise ValueError("n_bots must be at least 1")
    theta = params.theta.seconds
    if theta < 2:
        raise InfeasibleParams(f"theta={theta}s leaves no room for deletion after creation")
    deletion_lag = max(1, deletion_lag)

    span_budget = min(params.alpha_p.seconds - 1, theta - 1 - deletion_lag)
    if params.alpha_p.seconds == 0:
        span_budget = 0
    if span_budget < 0:
        span_budget = 0
    if creation_span is not None:
        span_budget = min(span_budget, creation_span)

    creations = sorted(t0 + rng.randint(0, span_budget) for _ in range(n_bots))
    span_p = creations[-1] - creations[0]

    d_budget = min(params.alpha_d.seconds, theta - 1 - deletion_lag - span_p)
    if d_budget < 0:
        raise InfeasibleParams(
            f"theta={theta}s cannot cover creation span {span_p}s plus deletion lag"
        )
    if deletion_span is not None:
        d_budget = min(d_budget, deletion_span)
    d0 = creations[-1] + deletion_lag

    events: list[TweetEvent] = []
    users = set()
    tweet_ids = set()
    hashtags = _keyword_hashtags(keyword)
    for i, created in enumerate(creations):
        tweet_id = tweet_id_start + i
        user_id = user_id_start + i
        words = gen_lexicon_text(wordlist, rng).split()
        geo = None
        if geo_rate > 0 and rng.random() < geo_rate:
            geo = GeoPoint(rng.uniform(36.0, 42.0), rng.uniform(26.0, 45.0))
        tweet = Tweet(
            id=tweet_id,
            user_id=user_id,
            text=_place_keyword(words, keyword, rng),
            created_at=Timestamp(created),
            hashtags=hashtags,
            geo=geo,
            lang="tr",
            source_app="Twitter for Android",
        )
        deleted_at = Timestamp(d0 + rng.randint(0, d_budget))
        events.append(Creation(tweet))
        events.append(Deletion(tweet_id=tweet_id, user_id=user_id, time=deleted_at))
        users.add(user_id)
        tweet_ids.add(tweet_id)

    _assert_attack_conditions(events, params, n_bots)
    return EventCluster(events=events, user_ids=users, tweet_ids=tweet_ids)


def _assert_attack_conditions(events: list[TweetEvent], params: AttackParams, n_bots: int) -> None:
    creations = {e.tweet.id: e.tweet for e in events if isinstance(e, Creation)}
    deletions = {e.tweet_id: e.time for e in events if isinstance(e, Deletion)}
    p = [t.created_at.seconds for t in creations.values()]
    d = [deletions[tid].seconds for tid in creations]
    users = {t.user_id for t in creations.values()}
    ok = (
        len(creations) == n_bots
        and len(users) == n_bots
        and max(p) - min(p) <= params.alpha_p.seconds
        and max(d) - min(d) <= params.alpha_d.seconds
        and all(deletions[tid].seconds - t.created_at.seconds <= params.theta.seconds
                for tid, t in creations.items())
        and all(deletions[tid].seconds > t.created_at.seconds for tid, t in creations.items())
    )
    if not ok:
        raise AssertionError("generated attack violates its own model constraints")


_SENTENCE_OPENERS = (
    "Bugün", "Şimdi", "Gerçekten", "Acaba", "Yine", "Bence", "Herkes", "Sonunda",
)


def _organic_text(
    keyword: Keyword, wordlist: Sequence[str], rng: random.Random, lexicon_style: bool
) -> str:
    words = [rng.choice(wordlist) for _ in range(rng.randint(2, 7))]
    if lexicon_style:
        return _place_keyword(words, keyword, rng)
    opener = rng.choice(_SENTENCE_OPENERS)
    body = " ".join([opener] + words) + rng.choice((".", "!", "?"))
    position = rng.randint(0, 1)
    if position == 0:
        return f"{body} {keyword.raw}"
    return f"{keyword.raw} {body}"


@dataclass(frozen=True, slots=True)
class EngagementMix:
    retweet: float = 0.35
    reply: float = 0.10
    mention: float = 0.15
    url: float = 0.15
    extra_hashtag: float = 0.10


def gen_organic_trend(
    keyword: Keyword,
    n_users: int,
    span: int,
    rng: random.Random,
    wordlist: Sequence[str],
    t0: int = 0,
    tweet_id_start: int = 1,
    user_id_start: int = 1,
    deletion_rate: float = 0.023,
    lexicon_rate: float = 0.02,
    max_deletion_delay: int = 12 * 3600,
    mix: EngagementMix = EngagementMix(),
    geo_rate: float = 0.01,
) -> EventCluster:
    """Uncoordinated discussion: mixed engagement, background-level deletions.

    Each user posts once, spread uniformly over the span; deletions are rare
    and scattered, with no common window.
    """
    if span <= 0:
        raise ValueError("span must be positive")
    events: list[TweetEvent] = []
    users = set()
    tweet_ids = set()
    hashtags = _keyword_hashtags(keyword)
    for i in range(n_users):
        tweet_id = tweet_id_start + i
        user_id = user_id_start + i
        created = t0 + rng.randint(0, span)
        lexicon_style = rng.random() < lexicon_rate
        is_retweet = not lexicon_style and rng.random() < mix.retweet
        is_reply = not lexicon_style and not is_retweet and rng.random() < mix.reply
        mentions = ()
        if not lexicon_style and rng.random() < mix.mention:
            mentions = (rng.randint(1, 10_000_000),)
        urls = 1 if (not lexicon_style and rng.random() < mix.url) else 0
        tags = hashtags
        text = _organic_text(keyword, wordlist, rng, lexicon_style)
        if not lexicon_style and rng.random() < mix.extra_hashtag:
            extra = rng.choice(wordlist)
            text = f"{text} #{extra}"
            tags = hashtags + (extra,)
        if is_retweet:
            text = f"RT @user{rng.randint(1, 99999)}: {text}"
        geo = None
        if rng.random() < geo_rate:
            geo = GeoPoint(rng.uniform(36.0, 42.0), rng.uniform(26.0, 45.0))
        tweet = Tweet(
            id=tweet_id,
            user_id=user_id,
            text=text,
            created_at=Timestamp(created),
            hashtags=tags,
            mentions=mentions,
            urls=urls,
            is_retweet=is_retweet,
            is_reply=is_reply,
            geo=geo,
            lang="tr",
            source_app="Twitter for Android",
        )
        events.append(Creation(tweet))
        users.add(user_id)
        tweet_ids.add(tweet_id)
        if rng.random() < deletion_rate:
            delay = rng.randint(600, max_deletion_delay)
            events.append(
                Deletion(tweet_id=tweet_id, user_id=user_id, time=Timestamp(created + delay))
            )
    return EventCluster(events=events, user_ids=users, tweet_ids=tweet_ids)


def sample_stream(
    stream: Iterable[TweetEvent], rate: float, rng: random.Random
) -> Iterator[TweetEvent]:
    """Independent per-tweet sampling; a deletion survives iff its tweet did."""
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must be in (0, 1]")
    kept: set[int] = set()
    for event in stream:
        if isinstance(event, Creation):
            if rng.random() < rate:
                kept.add(event.tweet.id)
                yield event
        elif isinstance(event, Deletion):
            if event.tweet_id in kept:
                yield event


# ---------------------------------------------------------------------------
# Scenario configuration and stream assembly
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    """Knobs for one synthetic scenario; the defaults are the standard
    validation scenario: 10 days x (15 organic + 5 attacked) trend-days,
    4 attack waves per attacked trend with 100-600 bots each, 1% sampling.
    """

    n_days: int = 10
    organic_per_day: int = 15
    attacked_per_day: int = 5
    attacks_per_day: int = 20
    failed_attacks_per_day: int = 0
    bots_min: int = 100
    bots_max: int = 600
    sample_rate: float = 0.01
    seed: int = 7
    start_date: date = date(2019, 6, 18)
    tz_offset: int = DEFAULT_TZ_OFFSET
    epoch_seconds: int = 300
    params: AttackParams = field(default_factory=AttackParams)
    attack_creation_span: int = 55
    attack_deletion_lag: int = 5
    attack_deletion_span: int = 55
    organic_tweets_min: int = 500
    organic_tweets_max: int = 2500
    adoption_tweets_min: int = 200
    adoption_tweets_max: int = 1200
    background_per_day: int = 2000
    background_deletion_rate: float = 0.023
    background_lexicon_rate: float = 0.023
    organic_deletion_rate: float = 0.023
    organic_lexicon_rate: float = 0.02
    wordlist_path: Optional[str] = None

    def __post_init__(self):
        for name in ("sample_rate", "background_deletion_rate", "background_lexicon_rate",
                     "organic_deletion_rate", "organic_lexicon_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if not 0.0 < self.sample_rate <= 1.0:
            raise ValueError("sample_rate must be in (0, 1]")


def default_scenario(seed: int = 7) -> ScenarioConfig:
    return ScenarioConfig(seed=seed)


@dataclass(frozen=True, slots=True)
class AttackRecord:
    """Ground truth for one attack wave."""

    keyword: str  # normalized
    day: date
    t0: Timestamp
    n_bots: int
    succeeded: bool  # whether the target was a trending keyword that day


@dataclass(frozen=True, slots=True)
class _Wave:
    t0: int
    n_bots: int
    tweet_id_start: int
    user_id_start: int


@dataclass(frozen=True, slots=True)
class _TrendPlan:
    keyword: Keyword
    day: date
    day_number: int
    attacked: bool
    succeeded: bool            # False for planned unsuccessful attacks
    waves: tuple[_Wave, ...]
    organic_start: int
    organic_span: int
    organic_users: int
    organic_tweet_id_start: int
    organic_user_id_start: int


@dataclass(frozen=True, slots=True)
class _BackgroundPlan:
    day_number: int
    n_tweets: int
    tweet_id_start: int
    user_id_start: int
    tags: tuple[str, ...]


@dataclass
class _Plan:
    trends: list[_TrendPlan]
    background: list[_BackgroundPlan]


class LabeledStream:
    """A replayable synthetic stream plus its ground truth."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.wordlist = load_wordlist(config.wordlist_path)
        self._plan = _make_plan(config)
        self.truth: dict[tuple[date, str], bool] = {}
        self.keywords: dict[str, str] = {}  # normalized -> raw
        self.truth_bots: set[int] = set()
        self.truth_attacks: list[AttackRecord] = []
        self.failed_attacks: set[tuple[date, str]] = set()
        for plan in self._plan.trends:
            key = (plan.day, plan.keyword.normalized)
            self.keywords[plan.keyword.normalized] = plan.keyword.raw
            if plan.succeeded:
                self.truth[key] = plan.attacked
            if plan.attacked and not plan.succeeded:
                self.failed_attacks.add(key)
            for wave in plan.waves:
                self.truth_attacks.append(
                    AttackRecord(
                        keyword=plan.keyword.normalized,
                        day=plan.day,
                        t0=Timestamp(wave.t0),
                        n_bots=wave.n_bots,
                        succeeded=plan.succeeded,
                    )
                )
                self.truth_bots.update(
                    range(wave.user_id_start, wave.user_id_start + wave.n_bots)
                )

    def trend_days(self) -> list[TrendDay]:
        """The scenario's trending trend-days (successful keywords only)."""
        return [
            TrendDay(date=plan.day, keyword=plan.keyword)
            for plan in self._plan.trends
            if plan.succeeded
        ]

    def events(self) -> Iterator[TweetEvent]:
        """Regenerate the identical time-ordered event stream."""
        return _generate_events(self.config, self._plan, self.wordlist)


def build_stream(config: ScenarioConfig) -> LabeledStream:
    return LabeledStream(config)


def _day_start_utc(config: ScenarioConfig, day_index: int) -> int:
    ordinal = config.start_date.toordinal() - date(1970, 1, 1).toordinal() + day_index
    return ordinal * 86400 - config.tz_offset


def _make_plan(config: ScenarioConfig) -> _Plan:
    rng = random.Random(f"{config.seed}:plan")
    wordlist = load_wordlist(config.wordlist_path)
    trends: list[_TrendPlan] = []
    background: list[_BackgroundPlan] = []
    tweet_id = 1_000_000
    user_id = 5_000_000
    epoch = config.epoch_seconds

    for day_index in range(config.n_days):
        day_date = date.fromordinal(config.start_date.toordinal() + day_index)
        day_number = day_date.toordinal() - date(1970, 1, 1).toordinal()
        day_start = _day_start_utc(config, day_index)

        def plan_trend(kind: str, serial: int, attacked: bool, succeeded: bool) -> None:
            nonlocal tweet_id, user_id
            word = rng.choice(wordlist)
            raw = f"#{word.capitalize()}{kind}{day_index}x{serial}"
            keyword = normalize_keyword(raw, "tr")

            waves: list[_Wave] = []
            if attacked:
                n_waves = max(1, plan_waves.pop(0)) if succeeded else rng.randint(1, 2)
                slots = rng.sample(range(day_start + 8 * 3600, day_start + 23 * 3600, epoch),
                                   n_waves)
                for slot in sorted(slots):
                    t0 = slot + rng.randint(5, 40)
                    n_bots = rng.randint(config.bots_min, config.bots_max)
                    waves.append(_Wave(t0, n_bots, tweet_id, user_id))
                    tweet_id += n_bots
                    user_id += n_bots

            if attacked and succeeded:
                organic_users = rng.randint(config.adoption_tweets_min, config.adoption_tweets_max)
                organic_start = min(w.t0 for w in waves) + 1800
                organic_span = max(3600, day_start + 86400 - 3600 - organic_start)
            elif attacked:
                organic_users = 0
                organic_start = day_start
                organic_span = 3600
            else:
                organic_users = rng.randint(config.organic_tweets_min, config.organic_tweets_max)
                organic_start = day_start + rng.randint(6 * 3600, 14 * 3600)
                organic_span = rng.randint(2 * 3600, 8 * 3600)

            trends.append(
                _TrendPlan(
                    keyword=keyword,
                    day=day_date,
                    day_number=day_number,
                    attacked=attacked,
                    succeeded=succeeded,
                    waves=tuple(waves),
                    organic_start=organic_start,
                    organic_span=organic_span,
                    organic_users=organic_users,
                    organic_tweet_id_start=tweet_id,
                    organic_user_id_start=user_id,
                )
            )
            tweet_id += organic_users
            user_id += organic_users

        # Deal the day's attack waves round-robin across its attacked trends.
        plan_waves = [0] * config.attacked_per_day
        if config.attacked_per_day:
            for i in range(config.attacks_per_day):
                plan_waves[i % config.attacked_per_day] += 1

        for serial in range(config.attacked_per_day):
            plan_trend("t", serial, attacked=True, succeeded=True)
        for serial in range(config.organic_per_day):
            plan_trend("o", serial, attacked=False, succeeded=True)
        for serial in range(config.failed_attacks_per_day):
            plan_trend("f", serial, attacked=True, succeeded=False)

        n_background = config.background_per_day
        tags = tuple(f"gunluk{day_index}x{j}" for j in range(40))
        background.append(
            _BackgroundPlan(
                day_number=day_number,
                n_tweets=n_background,
                tweet_id_start=tweet_id,
                user_id_start=user_id,
                tags=tags,
            )
        )
        tweet_id += n_background
        user_id += n_background

    return _Plan(trends=trends, background=background)


def _gen_background(
    config: ScenarioConfig,
    plan: _BackgroundPlan,
    day_start: int,
    rng: random.Random,
    wordlist: Sequence[str],
) -> list[TweetEvent]:
    events: list[TweetEvent] = []
    for i in range(plan.n_tweets):
        tweet_id = plan.tweet_id_start + i
        user_id = plan.user_id_start + i
        created = day_start + rng.randint(0, 86400 - 1)
        deleted = rng.random() < config.background_deletion_rate
        lexicon_style = deleted and rng.random() < config.background_lexicon_rate
        words = [rng.choice(wordlist) for _ in range(rng.randint(2, 7))]
        if lexicon_style:
            text = " ".join(words)
            tags: tuple[str, ...] = ()
        else:
            text = rng.choice(_SENTENCE_OPENERS) + " " + " ".join(words) + "."
            if rng.random() < 0.3:
                tag = rng.choice(plan.tags)
                text = f"{text} #{tag}"
                tags = (tag,)
            else:
                tags = ()
        tweet = Tweet(
            id=tweet_id,
            user_id=user_id,
            text=text,
            created_at=Timestamp(created),
            hashtags=tags,
            lang="tr",
            source_app="Twitter for Android",
        )
        events.append(Creation(tweet))
        if deleted:
            delay = rng.randint(300, 6 * 3600)
            events.append(
                Deletion(tweet_id=tweet_id, user_id=user_id, time=Timestamp(created + delay))
            )
    return events


def _generate_events(
    config: ScenarioConfig, plan: _Plan, wordlist: Sequence[str]
) -> Iterator[TweetEvent]:
    rng = random.Random(f"{config.seed}:events")
    trends_by_day: dict[int, list[_TrendPlan]] = {}
    for trend in plan.trends:
        trends_by_day.setdefault(trend.day_number, []).append(trend)
    background_by_day = {b.day_number: b for b in plan.background}

    day_numbers = sorted(set(trends_by_day) | set(background_by_day))
    buckets: dict[int, list[tuple[int, int, int, TweetEvent]]] = {}

    def bucket_event(event: TweetEvent) -> None:
        if isinstance(event, Creation):
            when = event.tweet.created_at
            order = (when.seconds, when.millis, 0, event.tweet.id)
        else:
            order = (event.time.seconds, event.time.millis, 1, event.tweet_id)
        day = (order[0] + config.tz_offset) // 86400
        buckets.setdefault(day, []).append((*order[:3], event))

    for day_number in day_numbers:
        day_start = day_number * 86400 - config.tz_offset
        for trend in trends_by_day.get(day_number, ()):
            for wave in trend.waves:
                cluster = gen_attack(
                    trend.keyword,
                    config.params,
                    wave.n_bots,
                    wave.t0,
                    rng,
                    wordlist,
                    tweet_id_start=wave.tweet_id_start,
                    user_id_start=wave.user_id_start,
                    creation_span=config.attack_creation_span,
                    deletion_span=config.attack_deletion_span,
                    deletion_lag=config.attack_deletion_lag,
                    geo_rate=0.05,
                )
                for event in cluster.events:
                    bucket_event(event)
            if trend.organic_users:
                cluster = gen_organic_trend(
                    trend.keyword,
                    trend.organic_users,
                    trend.organic_span,
                    rng,
                    wordlist,
                    t0=trend.organic_start,
                    tweet_id_start=trend.organic_tweet_id_start,
                    user_id_start=trend.organic_user_id_start,
                    deletion_rate=config.organic_deletion_rate,
                    lexicon_rate=config.organic_lexicon_rate,
                )
                for event in cluster.events:
                    bucket_event(event)
        background = background_by_day.get(day_number)
        if background is not None:
            for event in _gen_background(config, background, day_start, rng, wordlist):
                bucket_event(event)
        if day_number in buckets:
            ready = buckets.pop(day_number)
            ready.sort(key=lambda item: item[:3] + (_event_id(item[3]),))
            for item in ready:
                yield item[3]

    for day_number in sorted(buckets):
        ready = buckets.pop(day_number)
        ready.sort(key=lambda item: item[:3] + (_event_id(item[3]),))
        for item in ready:
            yield item[3]


def _event_id(event: TweetEvent) -> int:
    return event.tweet.id if isinstance(event, Creation) else event.tweet_id


# ---------------------------------------------------------------------------
# Toy trending oracle with the deletion-penalty countermeasure
# ---------------------------------------------------------------------------

def group_stream_by_keyword(
    events: Iterable[TweetEvent],
    keywords: Iterable[str],
    locale: str = DEFAULT_LOCALE,
) -> dict[str, list[TweetEvent]]:
    """Split a stream into per-keyword event lists (hashtag keywords only
    match their hashtag token; n-grams match at token boundaries). Deletions
    follow their tweet's keyword(s).
    """
    wanted = set(keywords)
    hashtag_keys = {k for k in wanted if " " not in k}
    ngram_keys = [tuple(k.split()) for k in wanted if " " in k]
    streams: dict[str, list[TweetEvent]] = {k: [] for k in wanted}
    owner: dict[int, list[str]] = {}
    for event in events:
        if isinstance(event, Creation):
            tweet = event.tweet
            hits = []
            for tag in extract_hashtags(tweet.text, locale):
                if tag in hashtag_keys:
                    hits.append(tag)
            if ngram_keys:
                tokens = text_tokens(tweet.text, locale)
                for ngram in ngram_keys:
                    n = len(ngram)
                    for i in range(len(tokens) - n + 1):
                        if tuple(tokens[i : i + n]) == ngram:
                            hits.append(" ".join(ngram))
                            break
            if hits:
                owner[tweet.id] = hits
                for key in hits:
                    streams[key].append(event)
        elif isinstance(event, Deletion):
            for key in owner.get(event.tweet_id, ()):
                streams[key].append(event)
    return streams


def trend_oracle(
    streams: Mapping[str, Sequence[TweetEvent]],
    window: Duration = Duration(600),
    mitigation: bool = False,
    k: int = 10,
    epoch_seconds: int = 300,
    penalty_weight: float = 2.0,
    locale: str = DEFAULT_LOCALE,
) -> list[tuple[Timestamp, list[str]]]:
    """Rank keywords every epoch by distinct posting users in a trailing window.

    With mitigation on, each deletion in the window subtracts penalty_weight
    from the score, so a mass-deleted burst scores itself out of the list.
    Returns (epoch time, top-k keywords best first) pairs.
    """
    per_keyword: dict[str, tuple[list[tuple[int, int]], list[int]]] = {}
    t_min: Optional[int] = None
    t_max: Optional[int] = None
    for key, events in streams.items():
        creations: list[tuple[int, int]] = []
        deletions: list[int] = []
        for event in events:
            if isinstance(event, Creation):
                creations.append((event.tweet.created_at.seconds, event.tweet.user_id))
            else:
                deletions.append(event.time.seconds)
        creations.sort()
        deletions.sort()
        if creations:
            lo, hi = creations[0][0], creations[-1][0]
            t_min = lo if t_min is None else min(t_min, lo)
            t_max = hi if t_max is None else max(t_max, hi)
        if deletions:
            t_min = deletions[0] if t_min is None else min(t_min, deletions[0])
            t_max = deletions[-1] if t_max is None else max(t_max, deletions[-1])
        per_keyword[key] = (creations, deletions)
    if t_min is None:
        return []

    first_epoch = (t_min // epoch_seconds + 1) * epoch_seconds
    last_epoch = (t_max // epoch_seconds + 1) * epoch_seconds
    w = window.seconds

    state = {
        key: {"c_lo": 0, "c_hi": 0, "d_lo": 0, "d_hi": 0, "users": {}}
        for key in per_keyword
    }
    result = []
    for t in range(first_epoch, last_epoch + 1, epoch_seconds):
        scored = []
        for key in sorted(per_keyword):
            creations, deletions = per_keyword[key]
            st = state[key]
            users: dict[int, int] = st["users"]
            while st["c_hi"] < len(creations) and creations[st["c_hi"]][0] <= t:
                user = creations[st["c_hi"]][1]
                users[user] = users.get(user, 0) + 1
                st["c_hi"] += 1
            while st["c_lo"] < st["c_hi"] and creations[st["c_lo"]][0] <= t - w:
                user = creations[st["c_lo"]][1]
                users[user] -= 1
                if users[user] == 0:
                    del users[user]
                st["c_lo"] += 1
            while st["d_hi"] < len(deletions) and deletions[st["d_hi"]] <= t:
                st["d_hi"] += 1
            while st["d_lo"] < st["d_hi"] and deletions[st["d_lo"]] <= t - w:
                st["d_lo"] += 1
            score = float(len(users))
            if mitigation:
                score -= penalty_weight * (st["d_hi"] - st["d_lo"])
            if score > 0:
                scored.append((-score, key))
        scored.sort()
        result.append((Timestamp(t), [key for _, key in scored[:k]]))
    return result


# ---------------------------------------------------------------------------
# Evaluation harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def evaluate(
    config: DetectorConfig,
    labeled: LabeledStream,
    locale: str = DEFAULT_LOCALE,
) -> EvalReport:
    """Sample the stream at the scenario rate, run the full detection
    pipeline over the truth trend-days, and score verdicts against truth.
    """
    from .ingest import build_trend_instances
    from .classify import flags_for_instance

    scenario = labeled.config
    rng = random.Random(f"{scenario.seed}:sample")
    events = sample_stream(labeled.events(), scenario.sample_rate, rng)
    instances = build_trend_instances(
        labeled.trend_days(), events, locale, scenario.tz_offset
    )
    tp = fp = tn = fn = 0
    for key, instance in instances.items():
        flags = flags_for_instance(instance, locale)
        verdict = classify_trend(count_features(instance, flags), config, trend=instance.trend)
        truth = labeled.truth[key]
        if verdict.attacked and truth:
            tp += 1
        elif verdict.attacked:
            fp += 1
        elif truth:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, tn=tn, fn=fn)


# ---------------------------------------------------------------------------
# Serialization: archive-format JSON lines plus truth sidecars
# ---------------------------------------------------------------------------

_WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
_MONTH_NAMES = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def format_created_at(ts: Timestamp) -> str:
    import time as _time

    tm = _time.gmtime(ts.seconds)
    return (
        f"{_WEEKDAYS[tm.tm_wday]} {_MONTH_NAMES[tm.tm_mon - 1]} {tm.tm_mday:02d} "
        f"{tm.tm_hour:02d}:{tm.tm_min:02d}:{tm.tm_sec:02d} +0000 {tm.tm_year}"
    )


def event_to_record(event: TweetEvent) -> dict:
    if isinstance(event, Deletion):
        return {
            "delete": {
                "status": {
                    "id": event.tweet_id,
                    "id_str": str(event.tweet_id),
                    "user_id": event.user_id,
                    "user_id_str": str(event.user_id),
                },
                "timestamp_ms": str(event.time.to_millis()),
            }
        }
    tweet = event.tweet
    record = {
        "created_at": format_created_at(tweet.created_at),
        "id": tweet.id,
        "id_str": str(tweet.id),
        "text": tweet.text,
        "user": {"id": tweet.user_id, "id_str": str(tweet.user_id)},
        "entities": {
            "hashtags": [{"text": tag} for tag in tweet.hashtags],
            "user_mentions": [{"id": m, "id_str": str(m)} for m in tweet.mentions],
            "urls": [{"url": f"https://t.co/x{i}"} for i in range(tweet.urls)],
        },
        "timestamp_ms": str(tweet.created_at.to_millis()),
    }
    if tweet.lang:
        record["lang"] = tweet.lang
    if tweet.source_app:
        record["source"] = f'<a href="https://twitter.com/download">{tweet.source_app}</a>'
    if tweet.is_retweet and not tweet.text.startswith("RT @"):
        record["retweeted_status"] = {"id": tweet.id - 1}
    if tweet.is_reply:
        record["in_reply_to_status_id"] = tweet.id - 1
    if tweet.geo is not None:
        record["geo"] = {"type": "Point", "coordinates": [tweet.geo.lat, tweet.geo.lon]}
    return record


def write_stream_jsonl(handle, events: Iterable[TweetEvent]) -> None:
    for event in events:
        handle.write(json.dumps(event_to_record(event), sort_keys=True, ensure_ascii=False))
        handle.write("\n")


def write_truth_csv(handle, labeled: LabeledStream) -> None:
    handle.write("date,keyword,attacked\n")
    for (day, normalized), attacked in sorted(labeled.truth.items()):
        raw = labeled.keywords[normalized]
        handle.write(f"{day.isoformat()},{raw},{int(attacked)}\n")


def write_trends_csv(handle, labeled: LabeledStream) -> None:
    handle.write("date,keyword\n")
    for (day, normalized) in sorted(labeled.truth):
        handle.write(f"{day.isoformat()},{labeled.keywords[normalized]}\n")


def write_bots(handle, labeled: LabeledStream) -> None:
    for user_id in sorted(labeled.truth_bots):
        handle.write(f"{user_id}\n")


def write_epochs_csv(
    handle,
    epochs: Iterable[tuple[Timestamp, Sequence[str]]],
    keywords: Mapping[str, str],
    location: str = "simulated",
) -> None:
    """Serialize toy-oracle output in the trend-epoch CSV format."""
    from datetime import datetime, timezone

    handle.write("captured_at,location,rank,keyword,volume\n")
    for when, ranked in epochs:
        if not ranked:
            continue
        iso = datetime.fromtimestamp(when.seconds, tz=timezone.utc).strftime(
            "%Y-%m-%dT%H:%M:%SZ"
        )
        for rank, normalized in enumerate(ranked, start=1):
            raw = keywords.get(normalized, normalized)
            handle.write(f"{iso},{location},{rank},{raw},\n")


def load_truth_csv(path: str, locale: str = DEFAULT_LOCALE) -> dict[tuple[date, str], bool]:
    import csv as _csv

    truth = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in _csv.DictReader(handle):
            keyword = normalize_keyword(row["keyword"], locale)
            truth[(date.fromisoformat(row["date"]), keyword.normalized)] = bool(
                int(row["attacked"])
            )
    return truth


# ---------------------------------------------------------------------------
# Flat key=value scenario files
# ---------------------------------------------------------------------------

_SCENARIO_INT_KEYS = {
    "n_days", "organic_per_day", "attacked_per_day", "attacks_per_day",
    "failed_attacks_per_day", "bots_min", "bots_max", "seed", "tz_offset",
    "epoch_seconds", "attack_creation_span", "attack_deletion_lag",
    "attack_deletion_span", "organic_tweets_min", "organic_tweets_max",
    "adoption_tweets_min", "adoption_tweets_max", "background_per_day",
}
_SCENARIO_FLOAT_KEYS = {
    "sample_rate", "background_deletion_rate", "background_lexicon_rate",
    "organic_deletion_rate", "organic_lexicon_rate",
}
_PARAM_KEYS = {"kappa", "alpha_p", "alpha_d", "theta"}


def save_scenario(config: ScenarioConfig, target) -> None:
    """Write a scenario as flat `key = value` lines readable by load_scenario."""
    lines = []
    for key in sorted(_SCENARIO_INT_KEYS):
        lines.append(f"{key} = {getattr(config, key)}")
    for key in sorted(_SCENARIO_FLOAT_KEYS):
        lines.append(f"{key} = {getattr(config, key)!r}")
    lines.append(f"start_date = {config.start_date.isoformat()}")
    lines.append(f"kappa = {config.params.kappa}")
    lines.append(f"alpha_p = {config.params.alpha_p.seconds}")
    lines.append(f"alpha_d = {config.params.alpha_d.seconds}")
    lines.append(f"theta = {config.params.theta.seconds}")
    if config.wordlist_path:
        lines.append(f'wordlist_path = "{config.wordlist_path}"')
    text = "\n".join(lines) + "\n"
    if isinstance(target, str):
        with open(target, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        target.write(text)


def load_scenario(path: str) -> ScenarioConfig:
    """Parse a flat `key = value` scenario file (TOML-style scalars only).

    Recognized keys are the ScenarioConfig field names, the attack
    parameters kappa/alpha_p/alpha_d/theta (seconds), start_date (ISO), and
    wordlist_path.
    """
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw_line in enumerate(handle, 1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip().strip('"').strip("'")

    config = ScenarioConfig()
    params = config.params
    kwargs = {}
    for key, text in values.items():
        if key in _SCENARIO_INT_KEYS:
            kwargs[key] = int(text)
        elif key in _SCENARIO_FLOAT_KEYS:
            kwargs[key] = float(text)
        elif key == "start_date":
            kwargs[key] = date.fromisoformat(text)
        elif key == "wordlist_path":
            kwargs[key] = text
        elif key in _PARAM_KEYS:
            if key == "kappa":
                params = replace(params, kappa=int(text))
            else:
                params = replace(params, **{key: Duration(int(text))})
        else:
            raise ValueError(f"{path}: unknown scenario key {key!r}")
    kwargs["params"] = params
    return replace(config, **kwargs)
