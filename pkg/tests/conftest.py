from __future__ import annotations

from datetime import date

import pytest

from trendguard.core import Timestamp, normalize_keyword
from trendguard.ingest import TrendDay, TrendInstance, Tweet

# Local noon on 2019-06-18 (UTC+3).
DAY = date(2019, 6, 18)
DAY_NOON = (DAY.toordinal() - date(1970, 1, 1).toordinal()) * 86400 - 10800 + 12 * 3600


def make_tweet(
    tweet_id: int,
    user_id: int,
    text: str,
    seconds: int,
    hashtags=None,
    mentions=(),
    urls=0,
    is_retweet=False,
    is_reply=False,
    geo=None,
) -> Tweet:
    if hashtags is None:
        hashtags = tuple(tag.lstrip("#") for tag in text.split() if tag.startswith("#"))
    return Tweet(
        id=tweet_id,
        user_id=user_id,
        text=text,
        created_at=Timestamp(seconds),
        hashtags=tuple(hashtags),
        mentions=tuple(mentions),
        urls=urls,
        is_retweet=is_retweet,
        is_reply=is_reply,
        geo=geo,
    )


def make_instance(keyword_raw: str, tweets, deletions, day: date = DAY) -> TrendInstance:
    trend = TrendDay(date=day, keyword=normalize_keyword(keyword_raw, "tr"))
    instance = TrendInstance(trend=trend)
    instance.tweets = sorted(tweets, key=lambda t: (t.created_at, t.id))
    for tid, seconds in deletions.items():
        instance.deletions[tid] = Timestamp(seconds)
    return instance


@pytest.fixture
def tag_keyword():
    return normalize_keyword("#tag", "tr")
