import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from moonvol.exceptions import LexiconError, MoonvolError
from moonvol.market_data import TweetRecord
from moonvol.sentiment import (
    Lexicon,
    LexiconSentiment,
    Token,
    classify,
    normalize,
    score_batch,
    score_compound,
    tokenize,
)

TINY = Lexicon({"good": 2.0, "bad": -2.0}, {"very": 0.293}, frozenset({"not"}))


def rec(i, text):
    return TweetRecord(str(i), dt.datetime(2021, 1, 27, tzinfo=dt.timezone.utc), text)


class TestTokenize:
    def test_caps_and_exclamations(self):
        assert tokenize("GME to the MOON!!") == [
            Token("gme", True, 0),
            Token("to"),
            Token("the"),
            Token("moon", True, 2),
        ]

    def test_empty(self):
        assert tokenize("") == []

    def test_apostrophe_survives(self):
        assert [t.text for t in tokenize("don't sell")] == ["don't", "sell"]

    def test_single_letter_is_not_caps(self):
        assert tokenize("I")[0].all_caps is False

    def test_punctuation_only(self):
        assert [t.text for t in tokenize("wow !!! :)")] == ["wow", ":)"]


class TestScoreCompound:
    def test_single_token(self):
        s = score_compound("good", TINY)
        assert s.compound == pytest.approx(2 / math.sqrt(19), rel=1e-14)
        assert (s.label, s.ternary) == ("positive", 1)

    def test_no_lexicon_tokens(self):
        s = score_compound("the stock opened", TINY)
        assert (s.compound, s.label, s.ternary) == (0.0, "neutral", 0)

    def test_negated(self):
        s = score_compound("not good", TINY)
        # raw valence 2.0 * -0.74 = -1.48
        assert s.compound == pytest.approx(-1.48 / math.sqrt(1.48**2 + 15), rel=1e-14)
        assert s.compound == pytest.approx(-0.35696, abs=1e-5)
        assert (s.label, s.ternary) == ("negative", -1)

    def test_negator_outside_window(self):
        assert score_compound("not a b c good", TINY).compound == score_compound("good", TINY).compound

    def test_booster_is_sign_aligned(self):
        assert score_compound("very good", TINY).compound == pytest.approx(normalize(2.293))
        assert score_compound("very bad", TINY).compound == pytest.approx(normalize(-2.293))

    def test_caps_and_exclamation(self):
        assert score_compound("GOOD", TINY).compound == pytest.approx(normalize(2.733))
        assert score_compound("good!!!!!", TINY).compound == pytest.approx(normalize(2 + 3 * 0.292))

    def test_thresholds(self):
        assert classify(0.05) == 1 and classify(-0.05) == -1 and classify(0.049) == 0
        assert classify(0.3, (-0.5, 0.5)) == 0


def test_lexicon_file_format(tmp_path):
    text = "# demo\nmoon\t2.0\t0.5\t[1,2]\n[boosters]\nvery\t0.293\n[negators]\nnot\n"
    lex = Lexicon.from_text(text)
    assert lex.valences == {"moon": 2.0} and lex.boosters == {"very": 0.293} and lex.negators == {"not"}
    p = tmp_path / "lex.tsv"
    p.write_text(text)
    assert Lexicon.load(p) == lex


def test_lexicon_errors(tmp_path):
    with pytest.raises(LexiconError, match="lexicon not found"):
        Lexicon.load(tmp_path / "missing.tsv")
    with pytest.raises(LexiconError, match="more than one table"):
        Lexicon({"not": 1.0}, {}, frozenset({"not"}))
    with pytest.raises(LexiconError):
        Lexicon.from_text("moon\tabc\n")
    with pytest.raises(LexiconError, match="unknown section"):
        Lexicon.from_text("[idioms]\n")


def test_bundled_lexicon(lexicon):
    assert lexicon.valences["moon"] == 2.0
    assert score_compound("GME to the MOON!!", lexicon).ternary == 1
    assert score_compound("this is a scam", lexicon).ternary == -1


def test_score_batch_examples(lexicon):
    assert score_batch([], lexicon) == []
    [(i, s)] = score_batch([rec(7, "love it")], lexicon)
    assert i == "7" and s == score_compound("love it", lexicon)
    out = score_batch([rec(i, "great day") for i in range(5)], lexicon)
    assert len({s for _, s in out}) == 1 and [i for i, _ in out] == list("01234")


def test_score_batch_rejects_bad_thresholds(lexicon):
    with pytest.raises(MoonvolError):
        score_batch([rec(1, "x")], lexicon, (0.1, 0.1))


words = st.sampled_from(
    ["moon", "love", "bad", "scam", "very", "not", "never", "slightly", "the", "gme", "crash", ":)", "!!"]
)


@st.composite
def texts(draw):
    toks = draw(st.lists(words, max_size=15))
    out = []
    for t in toks:
        if draw(st.booleans()):
            t = t.upper()
        out.append(t + "!" * draw(st.integers(0, 4)))
    return " ".join(out)


@given(texts())
def test_compound_bounded_and_sign_symmetric(lexicon, text):
    s = score_compound(text, lexicon)
    assert -1.0 <= s.compound <= 1.0
    assert score_compound(text, lexicon.negated()).compound == -s.compound


@given(st.floats(-1e6, 1e6), st.floats(0, 1e3))
def test_normalize_monotone(a, d):
    assert normalize(a + d) >= normalize(a)
    assert normalize(-a) == -normalize(a)


@given(st.lists(texts(), max_size=8), st.floats(-0.9, -0.01), st.floats(0.01, 0.9))
def test_batch_and_thresholds(lexicon, batch, neg, pos):
    recs = [rec(i, t) for i, t in enumerate(batch)]
    base = score_batch(recs, lexicon)
    moved = score_batch(recs, lexicon, (neg, pos))
    for (i, a), (_, b), r in zip(base, moved, recs):
        assert a == score_compound(r.text, lexicon)
        assert a.compound == b.compound
        assert b.ternary == classify(b.compound, (neg, pos))


class TestLexiconSentiment:
    def test_transform_and_predict(self, lexicon):
        est = LexiconSentiment().fit()
        X = ["to the moon", "what a scam", "opening bell"]
        np.testing.assert_array_equal(
            est.transform(X).ravel(), [score_compound(t, lexicon).compound for t in X]
        )
        np.testing.assert_array_equal(est.predict(X), [1, -1, 0])

    def test_params(self, tmp_path):
        p = tmp_path / "l.tsv"
        p.write_text("good\t2\n")
        est = LexiconSentiment(lexicon=str(p), thresholds=(-0.2, 0.2))
        assert clone(est).get_params()["thresholds"] == (-0.2, 0.2)
        assert est.fit().predict(["good"])[0] == 1
        with pytest.raises(TypeError):
            est.transform("good")
