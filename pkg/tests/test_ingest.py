import bz2
import gzip
import io
import json
import random

import pytest

from trendguard.core import Timestamp, normalize_keyword
from trendguard.ingest import (
    BadRank,
    BadTimestamp,
    Creation,
    Deletion,
    MalformedLine,
    ParseStats,
    Skip,
    TrendDay,
    build_trend_instance,
    build_trend_instances,
    load_trend_days,
    load_trend_epochs,
    match_keyword,
    parse_stream_line,
    read_stream,
    read_stream_list,
)

from conftest import DAY, DAY_NOON, make_tweet

STATUS_LINE = json.dumps(
    {
        "created_at": "Tue Jun 18 09:00:00 +0000 2019",
        "id": 7,
        "id_str": "7",
        "text": "a b #Tag",
        "user": {"id": 3, "id_str": "3"},
        "entities": {
            "hashtags": [{"text": "Tag"}],
            "user_mentions": [{"id": 42}],
            "urls": [{"url": "https://t.co/x"}],
        },
        "lang": "tr",
        "source": '<a href="http://example">Twitter for Android</a>',
        "geo": {"type": "Point", "coordinates": [41.0, 29.0]},
    }
)

DELETE_LINE = '{"delete":{"status":{"id":7,"user_id":3},"timestamp_ms":"1000"}}'


class TestParseStreamLine:
    def test_status_record(self):
        event = parse_stream_line(STATUS_LINE)
        assert isinstance(event, Creation)
        tweet = event.tweet
        assert tweet.id == 7
        assert tweet.user_id == 3
        assert tweet.text == "a b #Tag"
        assert tweet.hashtags == ("Tag",)
        assert tweet.mentions == (42,)
        assert tweet.urls == 1
        assert not tweet.is_retweet and not tweet.is_reply
        assert tweet.geo.lat == pytest.approx(41.0)
        assert tweet.source_app == "Twitter for Android"
        # Tue Jun 18 09:00:00 UTC 2019
        assert tweet.created_at == Timestamp(1560848400)

    def test_delete_notice_millisecond_timestamp(self):
        event = parse_stream_line(DELETE_LINE)
        assert isinstance(event, Deletion)
        assert event.tweet_id == 7
        assert event.user_id == 3
        assert event.time == Timestamp(1, 0)

    def test_empty_line_skips(self):
        assert isinstance(parse_stream_line(""), Skip)
        assert isinstance(parse_stream_line("   \n"), Skip)

    def test_limit_notice_skips(self):
        assert isinstance(parse_stream_line('{"limit":{"track":5}}'), Skip)

    def test_garbage_is_malformed(self):
        with pytest.raises(MalformedLine):
            parse_stream_line("{not json")
        with pytest.raises(MalformedLine):
            parse_stream_line('"just a string"')

    def test_status_without_time_is_malformed(self):
        with pytest.raises(MalformedLine):
            parse_stream_line('{"id": 1, "text": "x", "user": {"id": 2}}')

    def test_timestamp_ms_preferred(self):
        line = json.dumps(
            {
                "created_at": "Tue Jun 18 09:00:00 +0000 2019",
                "timestamp_ms": "1560848401500",
                "id": 1,
                "text": "x",
                "user": {"id": 2},
            }
        )
        event = parse_stream_line(line)
        assert event.tweet.created_at == Timestamp(1560848401, 500)

    def test_retweet_and_reply_flags(self):
        line = json.dumps(
            {
                "timestamp_ms": "1000",
                "id": 1,
                "text": "RT @x: hi",
                "user": {"id": 2},
                "retweeted_status": {"id": 99},
                "in_reply_to_status_id": 5,
            }
        )
        event = parse_stream_line(line)
        assert event.tweet.is_retweet and event.tweet.is_reply


class TestReadStream:
    def test_counts_valid_lines(self):
        payload = "\n".join([STATUS_LINE, STATUS_LINE, DELETE_LINE]) + "\n"
        events, stats = read_stream_list(io.BytesIO(payload.encode()))
        assert len(events) == 3
        assert (stats.creations, stats.deletions) == (2, 1)
        assert stats.malformed_skipped == 0
        assert stats.consistent

    def test_garbage_counted_not_fatal(self):
        payload = STATUS_LINE + "\n{broken\n" + STATUS_LINE + "\n"
        events, stats = read_stream_list(io.BytesIO(payload.encode()))
        assert len(events) == 2
        assert stats.malformed_skipped == 1
        assert stats.consistent

    def test_fixture_five_creations_two_deletions(self, tmp_path):
        lines = [STATUS_LINE] * 5 + [DELETE_LINE] * 2 + ["", '{"limit":{}}']
        path = tmp_path / "events.json"
        path.write_text("\n".join(lines) + "\n")
        stats = ParseStats()
        events = list(read_stream(str(path), stats=stats))
        assert len(events) == 7
        assert (stats.creations, stats.deletions) == (5, 2)
        assert stats.other_skipped == 2
        assert stats.lines_read == 9
        assert stats.consistent

    @pytest.mark.parametrize("codec", ["gzip", "bz2"])
    def test_compressed_sources(self, tmp_path, codec):
        payload = (STATUS_LINE + "\n" + DELETE_LINE + "\n").encode()
        if codec == "gzip":
            path = tmp_path / "events.json.gz"
            path.write_bytes(gzip.compress(payload))
        else:
            path = tmp_path / "events.json.bz2"
            path.write_bytes(bz2.compress(payload))
        events, stats = read_stream_list(str(path))
        assert len(events) == 2
        assert stats.consistent


EPOCH_CSV = """captured_at,location,rank,keyword,volume
2019-06-18T12:00:00Z,turkey,1,#a,12000
2019-06-18T12:00:00Z,turkey,2,#b,
2019-06-18T12:05:00Z,turkey,1,#b,15000
"""


class TestTrendFiles:
    def test_load_epochs(self):
        epochs = load_trend_epochs(io.StringIO(EPOCH_CSV))
        assert len(epochs) == 2
        first = epochs[0]
        assert first.entries[0][0] == 1
        assert first.entries[0][1].normalized == "a"
        assert first.entries[0][2] == 12000
        assert first.entries[1][2] is None  # volume below reporting floor
        assert epochs[0].captured_at < epochs[1].captured_at

    def test_bad_rank(self):
        csv_text = "captured_at,location,rank,keyword,volume\n2019-06-18T12:00:00Z,tr,1,#a,\n2019-06-18T12:00:00Z,tr,3,#b,\n"
        with pytest.raises(BadRank):
            load_trend_epochs(io.StringIO(csv_text))

    def test_bad_timestamp(self):
        csv_text = "captured_at,location,rank,keyword,volume\nnot-a-time,tr,1,#a,\n"
        with pytest.raises(BadTimestamp):
            load_trend_epochs(io.StringIO(csv_text))

    def test_epoch_capped_at_fifty(self):
        rows = ["captured_at,location,rank,keyword,volume"]
        rows += [f"2019-06-18T12:00:00Z,tr,{r},#k{r}," for r in range(1, 52)]
        with pytest.raises(BadRank):
            load_trend_epochs(io.StringIO("\n".join(rows) + "\n"))

    def test_load_trend_days_dedups(self):
        csv_text = "date,keyword\n2019-06-18,#Tag\n2019-06-18,#tag\n2019-06-19,#tag\n"
        days = load_trend_days(io.StringIO(csv_text))
        assert len(days) == 2
        assert days[0].keyword.normalized == "tag"


class TestMatchKeyword:
    def test_hashtag_exact_token(self, tag_keyword):
        assert match_keyword("i love #Tag today", tag_keyword)

    def test_hashtag_token_boundary(self, tag_keyword):
        assert not match_keyword("#tagging along", tag_keyword)

    def test_ngram_paper_case(self):
        kw = normalize_keyword("YSK'dan CHP", "tr")
        assert match_keyword("YSK'dan CHP ve İyi Parti Kararı", kw)

    def test_ngram_boundary_not_substring(self):
        kw = normalize_keyword("ara ver", "tr")
        assert not match_keyword("maskara verimli", kw)
        assert match_keyword("lütfen ara ver artık", kw)

    def test_plain_word_is_not_hashtag_match(self, tag_keyword):
        assert not match_keyword("tag without hash", tag_keyword)


def _day_events():
    noon = DAY_NOON
    tweets = [
        make_tweet(1, 10, "selam #tag", noon),
        make_tweet(2, 11, "baska konu", noon + 10),          # no keyword
        make_tweet(3, 12, "dün gece #tag", noon - 86400),    # day before
        make_tweet(4, 13, "çok eski #tag", noon - 2 * 86400),  # two days before
        make_tweet(5, 14, "yarin #tag", noon + 86400),       # day after
    ]
    events = [Creation(t) for t in tweets]
    events.append(Deletion(tweet_id=1, user_id=10, time=Timestamp(noon + 60)))
    events.append(Deletion(tweet_id=99, user_id=1, time=Timestamp(noon)))  # orphan
    return events


class TestBuildTrendInstance:
    def test_day_window_and_matching(self, tag_keyword):
        trend = TrendDay(date=DAY, keyword=tag_keyword)
        instance = build_trend_instance(trend, _day_events())
        assert [t.id for t in instance.tweets] == [3, 1]
        assert instance.deletions[1] == Timestamp(DAY_NOON + 60)

    def test_order_independence(self, tag_keyword):
        trend = TrendDay(date=DAY, keyword=tag_keyword)
        events = _day_events()
        base = build_trend_instance(trend, events)
        rng = random.Random(3)
        for _ in range(5):
            shuffled = events[:]
            rng.shuffle(shuffled)
            other = build_trend_instance(trend, shuffled)
            assert [t.id for t in other.tweets] == [t.id for t in base.tweets]
            assert other.deletions == base.deletions

    def test_negative_lifetime_rejected_and_counted(self, tag_keyword):
        trend = TrendDay(date=DAY, keyword=tag_keyword)
        events = [
            Creation(make_tweet(1, 10, "selam #tag", DAY_NOON)),
            Deletion(tweet_id=1, user_id=10, time=Timestamp(DAY_NOON - 5)),
        ]
        instance = build_trend_instance(trend, events)
        assert instance.deletions == {}
        assert instance.invalid_deletions == 1

    def test_earliest_deletion_wins(self, tag_keyword):
        trend = TrendDay(date=DAY, keyword=tag_keyword)
        events = [
            Creation(make_tweet(1, 10, "selam #tag", DAY_NOON)),
            Deletion(tweet_id=1, user_id=10, time=Timestamp(DAY_NOON + 100)),
            Deletion(tweet_id=1, user_id=10, time=Timestamp(DAY_NOON + 50)),
        ]
        instance = build_trend_instance(trend, events)
        assert instance.deletions[1] == Timestamp(DAY_NOON + 50)

    def test_multi_trend_join_matches_single(self, tag_keyword):
        trends = [
            TrendDay(date=DAY, keyword=tag_keyword),
            TrendDay(date=DAY, keyword=normalize_keyword("baska konu", "tr")),
        ]
        events = _day_events()
        combined = build_trend_instances(trends, events)
        for trend in trends:
            single = build_trend_instance(trend, events)
            multi = combined[(trend.date, trend.keyword.normalized)]
            assert [t.id for t in multi.tweets] == [t.id for t in single.tweets]
            assert multi.deletions == single.deletions
