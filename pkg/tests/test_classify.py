import random

import pytest

from trendguard.core import normalize_keyword
from trendguard.classify import (
    EmptyCorpus,
    compute_flags,
    is_lexicon_tweet,
    is_single_engagement,
    lexicon_stats,
    strip_keyword_and_emoji,
)

from conftest import make_instance, make_tweet


class TestStripKeywordAndEmoji:
    def test_hashtag_removed(self):
        kw = normalize_keyword("#DonaldTrump", "tr")
        out = strip_keyword_and_emoji("apple to cycle #DonaldTrump trigonometry", kw)
        assert out == "apple to cycle trigonometry"

    def test_keyword_only_becomes_empty(self, tag_keyword):
        assert strip_keyword_and_emoji("#tag", tag_keyword) == ""

    def test_emoji_removed(self, tag_keyword):
        assert strip_keyword_and_emoji("ok \U0001F600 ok", tag_keyword) == "ok ok"
        assert strip_keyword_and_emoji("fire\U0001F525works", tag_keyword) == "fire works"

    def test_ngram_sequence_removed(self):
        kw = normalize_keyword("YSK'dan CHP", "tr")
        out = strip_keyword_and_emoji("karar YSK'dan CHP hakkında", kw)
        assert out == "karar hakkında"

    def test_case_folded_occurrences(self, tag_keyword):
        assert strip_keyword_and_emoji("x #TAG y #Tag z", tag_keyword) == "x y z"


class TestIsLexiconTweet:
    def test_paper_frequent_lexicon_tweet(self):
        assert is_lexicon_tweet("tenkidi kaynaştırabilme siperisaika")

    def test_uppercase_and_punctuation_rejected(self):
        assert not is_lexicon_tweet("Easy come easy go.")

    def test_single_token_rejected(self):
        assert not is_lexicon_tweet("kelime")

    def test_ten_tokens_rejected(self):
        assert not is_lexicon_tweet(" ".join(["kelime"] * 10))

    def test_nine_tokens_accepted(self):
        assert is_lexicon_tweet(" ".join(["kelime"] * 9))

    def test_two_tokens_accepted(self):
        assert is_lexicon_tweet("yarım gün")

    def test_parentheses_allowed(self):
        assert is_lexicon_tweet("elma (meyve) dolaşmak")

    def test_digits_rejected(self):
        assert not is_lexicon_tweet("kelime 123 kelime")

    def test_keyword_excluded_before_counting(self, tag_keyword):
        # Keyword adds a token and a '#'; both must be ignored.
        assert is_lexicon_tweet("yarım gün #tag", tag_keyword)

    def test_whitespace_invariance(self):
        rng = random.Random(2)
        text = "tenkidi kaynaştırabilme siperisaika"
        for _ in range(20):
            padded = " " * rng.randint(0, 3) + text + " " * rng.randint(0, 3)
            assert is_lexicon_tweet(padded)

    def test_emoji_do_not_count_as_tokens(self):
        assert is_lexicon_tweet("yarım gün \U0001F600")
        assert not is_lexicon_tweet("kelime \U0001F600")  # one real token


class TestIsSingleEngagement:
    def test_plain_lexicon_tweet_with_target(self, tag_keyword):
        tweet = make_tweet(1, 1, "yarım gün #tag", 0, hashtags=["tag"])
        assert is_single_engagement(tweet, tag_keyword)

    def test_mention_breaks_it(self, tag_keyword):
        tweet = make_tweet(1, 1, "yarım gün #tag", 0, hashtags=["tag"], mentions=[5])
        assert not is_single_engagement(tweet, tag_keyword)

    def test_retweet_breaks_it(self, tag_keyword):
        tweet = make_tweet(1, 1, "RT @x: yarım gün #tag", 0, hashtags=["tag"], is_retweet=True)
        assert not is_single_engagement(tweet, tag_keyword)

    def test_url_and_reply_break_it(self, tag_keyword):
        assert not is_single_engagement(
            make_tweet(1, 1, "yarım gün #tag", 0, hashtags=["tag"], urls=1), tag_keyword
        )
        assert not is_single_engagement(
            make_tweet(1, 1, "yarım gün #tag", 0, hashtags=["tag"], is_reply=True), tag_keyword
        )

    def test_foreign_hashtag_breaks_it(self, tag_keyword):
        tweet = make_tweet(1, 1, "yarım gün #tag #other", 0, hashtags=["tag", "other"])
        assert not is_single_engagement(tweet, tag_keyword)

    def test_ngram_keyword_admits_no_hashtags(self):
        kw = normalize_keyword("ysk'dan chp", "tr")
        clean = make_tweet(1, 1, "ysk'dan chp karar", 0, hashtags=[])
        tagged = make_tweet(2, 1, "ysk'dan chp karar #x", 0, hashtags=["x"])
        assert is_single_engagement(clean, kw)
        assert not is_single_engagement(tagged, kw)

    def test_monotone_under_added_engagement(self, tag_keyword):
        rng = random.Random(7)
        for _ in range(50):
            base = make_tweet(1, 1, "yarım gün #tag", 0, hashtags=["tag"])
            assert is_single_engagement(base, tag_keyword)
            spoiled = [
                make_tweet(1, 1, base.text, 0, hashtags=["tag"], mentions=[rng.randint(1, 9)]),
                make_tweet(1, 1, base.text, 0, hashtags=["tag"], urls=1),
                make_tweet(1, 1, base.text + " #z", 0, hashtags=["tag", "z"]),
                make_tweet(1, 1, base.text, 0, hashtags=["tag"], is_retweet=True),
                make_tweet(1, 1, base.text, 0, hashtags=["tag"], is_reply=True),
            ]
            assert not any(is_single_engagement(s, tag_keyword) for s in spoiled)


class TestFlagsAndStats:
    def test_compute_flags_token_count(self, tag_keyword):
        tweet = make_tweet(1, 1, "yarım gün #tag", 0, hashtags=["tag"])
        flags = compute_flags(tweet, tag_keyword)
        assert flags.is_lexicon and flags.is_single_engagement
        assert flags.token_count == 2

    def test_all_lexicon_all_deleted(self):
        tweets = [
            make_tweet(i, i, "yarım gün #tag", i, hashtags=["tag"]) for i in range(1, 4)
        ]
        instance = make_instance("#tag", tweets, {1: 100, 2: 100, 3: 100})
        table = lexicon_stats([instance])
        rows = dict((label, (a, b)) for label, a, b in table.rows())
        assert rows["deleted_lex_over_all_deleted"][0] == 1.0
        assert rows["deleted_lex_over_all_lex"][0] == 1.0

    def test_hand_counted_ratio(self):
        # 10 deleted tweets, 3 of them lexicon.
        tweets = []
        deletions = {}
        for i in range(1, 11):
            text = "yarım gün #tag" if i <= 3 else "Organik bir cümle burada! #tag"
            tweets.append(make_tweet(i, i, text, i, hashtags=["tag"]))
            deletions[i] = 1000
        instance = make_instance("#tag", tweets, deletions)
        table = lexicon_stats([instance])
        rows = dict((label, (a, b)) for label, a, b in table.rows())
        assert rows["deleted_lex_over_all_deleted"][0] == pytest.approx(0.3)

    def test_background_column(self):
        background = [
            (make_tweet(1, 1, "yarım gün", 0, hashtags=[]), True),
            (make_tweet(2, 2, "Organik cümle.", 0, hashtags=[]), True),
            (make_tweet(3, 3, "başka bir şey", 0, hashtags=[]), False),
        ]
        table = lexicon_stats([], background)
        rows = dict((label, (a, b)) for label, a, b in table.rows())
        assert rows["all_tweets"][1] == 3
        assert rows["deleted_lex_over_all_deleted"][1] == pytest.approx(0.5)

    def test_empty_corpus_raises(self):
        with pytest.raises(EmptyCorpus):
            lexicon_stats([], [])

    def test_csv_has_six_rows(self, tmp_path):
        import io

        tweets = [make_tweet(1, 1, "yarım gün #tag", 0, hashtags=["tag"])]
        table = lexicon_stats([make_instance("#tag", tweets, {})])
        buffer = io.StringIO()
        table.write_csv(buffer)
        lines = buffer.getvalue().strip().splitlines()
        assert len(lines) == 7  # header + six statistics rows
