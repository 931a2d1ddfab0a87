"""Lexicon-based tweet sentiment: compound valence score and ternary label.

Implements a reduced rule set on top of a valence dictionary: boosters and
negators in a three-token look-back window, all-caps emphasis and trailing
exclamation marks. Raw valences are summed and squashed by
``s / sqrt(s**2 + alpha)``.
"""
from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import LexiconError
from .validation import check_thresholds

ALPHA = 15.0
NEGATION_SCALAR = -0.74
CAPS_INCREMENT = 0.733
EXCLAMATION_INCREMENT = 0.292
MAX_EXCLAMATIONS = 3
WINDOW = 3
DEFAULT_THRESHOLDS = (-0.05, 0.05)
RULE_SET = (
    "lexicon",
    "boosters(window=3)",
    "negation(window=3,scalar=-0.74)",
    "caps(+0.733)",
    "exclamation(+0.292,max=3)",
    "normalize(alpha=15)",
)

_STRIP = string.punctuation + "‘’“”…"
_BARE_PUNCT = set(".,!?;:\"'`-…")


class Token(NamedTuple):
    text: str
    all_caps: bool = False
    exclamations: int = 0


@dataclass(frozen=True)
class Lexicon:
    valences: Mapping[str, float]
    boosters: Mapping[str, float] = field(default_factory=dict)
    negators: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "valences", dict(self.valences))
        object.__setattr__(self, "boosters", dict(self.boosters))
        object.__setattr__(self, "negators", frozenset(self.negators))
        tables = (self.valences, self.boosters, self.negators)
        for table in tables:
            for tok in table:
                if not tok or tok != tok.lower():
                    raise LexiconError(f"lexicon tokens must be non-empty lower case: {tok!r}")
        overlap = (
            (self.valences.keys() & self.boosters.keys())
            | (self.valences.keys() & self.negators)
            | (self.boosters.keys() & self.negators)
        )
        if overlap:
            raise LexiconError(f"tokens in more than one table: {sorted(overlap)}")

    def negated(self) -> "Lexicon":
        """Same lexicon with every valence sign-flipped."""
        return Lexicon({k: -v for k, v in self.valences.items()}, self.boosters, self.negators)

    @classmethod
    def load(cls, path) -> "Lexicon":
        path = Path(path)
        if not path.is_file():
            raise LexiconError(f"lexicon not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"), source=str(path))

    @classmethod
    def bundled(cls) -> "Lexicon":
        text = resources.files("moonvol").joinpath("data/demo_lexicon.tsv").read_text(encoding="utf-8")
        return cls.from_text(text, source="demo_lexicon.tsv")

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "Lexicon":
        """Parse the TSV format.

        Lines before any section header, or under ``[valences]``, are
        ``token<TAB>valence`` (extra columns ignored, so the original VADER
        lexicon file loads unchanged). ``[boosters]`` lines are
        ``token<TAB>increment``; ``[negators]`` lines hold one token each.
        Lines starting with ``#`` are comments.
        """
        valences, boosters, negators = {}, {}, set()
        section = "valences"
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.rstrip("\r\n")
            stripped = line.strip()
            if not stripped or stripped.startswith("#") and "\t" not in line:
                continue
            if stripped.startswith("[") and stripped.endswith("]") and "\t" not in line:
                section = stripped[1:-1].strip().lower()
                if section not in ("valences", "boosters", "negators"):
                    raise LexiconError(f"{source}:{line_no}: unknown section [{section}]")
                continue
            parts = line.split("\t")
            token = parts[0].strip().lower()
            if section == "negators":
                negators.add(token)
                continue
            if len(parts) < 2:
                raise LexiconError(f"{source}:{line_no}: expected token<TAB>value")
            try:
                value = float(parts[1])
            except ValueError:
                raise LexiconError(f"{source}:{line_no}: bad number {parts[1]!r}") from None
            (valences if section == "valences" else boosters)[token] = value
        return cls(valences, boosters, frozenset(negators))


@dataclass(frozen=True)
class SentimentScore:
    compound: float
    label: str
    ternary: int


def tokenize(text: str) -> list[Token]:
    """Split on whitespace, lower-case, and strip edge punctuation.

    Records whether the source word was fully upper case and how many
    ``!`` trailed it. Internal apostrophes survive (``don't``). A word made
    only of punctuation is kept verbatim when it could be an emoticon
    (``:)``) and dropped otherwise (``!!!``).
    """
    tokens = []
    for word in text.split():
        stripped = word.strip(_STRIP)
        if not stripped:
            if set(word) <= _BARE_PUNCT:
                continue
            tokens.append(Token(word.lower()))
            continue
        exclamations = word[len(word.rstrip(_STRIP)):].count("!")
        caps = stripped.isupper() and sum(ch.isalpha() for ch in stripped) > 1
        tokens.append(Token(stripped.lower(), caps, exclamations))
    return tokens


def _sign_aligned(v: float, inc: float) -> float:
    if v > 0:
        return v + inc
    if v < 0:
        return v - inc
    return v


def token_valences(tokens: Sequence[Token], lexicon: Lexicon) -> list[float]:
    """Per-token valence after modifiers (zero for tokens not in the lexicon)."""
    out = []
    for i, tok in enumerate(tokens):
        v = lexicon.valences.get(tok.text)
        if v is None or v == 0.0:
            out.append(0.0)
            continue
        window = tokens[max(0, i - WINDOW):i]
        for prev in window:
            inc = lexicon.boosters.get(prev.text)
            if inc is not None:
                v = _sign_aligned(v, inc)
        if any(prev.text in lexicon.negators for prev in window):
            v *= NEGATION_SCALAR
        if tok.all_caps:
            v = _sign_aligned(v, CAPS_INCREMENT)
        if tok.exclamations:
            v = _sign_aligned(v, EXCLAMATION_INCREMENT * min(tok.exclamations, MAX_EXCLAMATIONS))
        out.append(v)
    return out


def normalize(total: float, alpha: float = ALPHA) -> float:
    compound = total / math.sqrt(total * total + alpha)
    return min(1.0, max(-1.0, compound))


def classify(compound: float, thresholds=DEFAULT_THRESHOLDS) -> int:
    negative, positive = thresholds
    if compound >= positive:
        return 1
    if compound <= negative:
        return -1
    return 0


_LABELS = {1: "positive", 0: "neutral", -1: "negative"}


def score_compound(text: str, lexicon: Lexicon, thresholds=DEFAULT_THRESHOLDS) -> SentimentScore:
    compound = normalize(math.fsum(token_valences(tokenize(text), lexicon)))
    ternary = classify(compound, thresholds)
    return SentimentScore(compound, _LABELS[ternary], ternary)


def score_batch(records: Iterable, lexicon: Lexicon, thresholds=DEFAULT_THRESHOLDS):
    """Score records in order, returning ``[(record.id, SentimentScore), ...]``.

    Identical texts are scored once; scoring is pure so this only saves time.
    """
    thresholds = check_thresholds(*thresholds)
    cache: dict[str, SentimentScore] = {}
    out = []
    for rec in records:
        score = cache.get(rec.text)
        if score is None:
            score = cache[rec.text] = score_compound(rec.text, lexicon, thresholds)
        out.append((rec.id, score))
    return out


class LexiconSentiment(TransformerMixin, BaseEstimator):
    """Compound-score transformer over an iterable of texts.

    ``transform`` returns an ``(n, 1)`` column of compound scores and
    ``predict`` the ternary labels. ``lexicon`` may be a :class:`Lexicon`,
    a path to a TSV file, or ``None`` for the bundled demo lexicon.
    """

    def __init__(self, lexicon=None, thresholds=DEFAULT_THRESHOLDS):
        self.lexicon = lexicon
        self.thresholds = thresholds

    def fit(self, X=None, y=None):
        if isinstance(self.lexicon, Lexicon):
            self.lexicon_ = self.lexicon
        elif self.lexicon is None:
            self.lexicon_ = Lexicon.bundled()
        else:
            self.lexicon_ = Lexicon.load(self.lexicon)
        self.thresholds_ = check_thresholds(*self.thresholds)
        return self

    def _compound(self, X):
        if not hasattr(self, "lexicon_"):
            self.fit()
        if isinstance(X, str):
            raise TypeError("expected an iterable of strings, got a single string")
        return np.array(
            [normalize(math.fsum(token_valences(tokenize(t), self.lexicon_))) for t in X], dtype=float
        )

    def transform(self, X):
        return self._compound(X).reshape(-1, 1)

    def predict(self, X):
        return np.array([classify(c, self.thresholds_) for c in self._compound(X)], dtype=int)
