"""Linguistic metrics over forecast justifications.

Every per-record metric is computed from a :class:`~forecastskill.textproc.TokenizedText`.
A metric that cannot be evaluated for a text (no words, no sentences) is stored
as ``None`` and left out of author averages for that metric only.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import resources
from .textproc import (
    CategoryLexicon,
    PosCategory,
    TokenizedText,
    count_matches_in,
    count_syllables,
    find_quote_spans,
    load_lexicon,
    match_lexicon,
    pos_tags,
    tokenize,
)

NEGATORS = frozenset({"not", "n't", "no", "never", "neither", "nor"})
INTENSIFIERS = {
    "very": 1.25,
    "really": 1.25,
    "highly": 1.25,
    "extremely": 1.5,
    "incredibly": 1.5,
    "most": 1.5,
    "quite": 1.1,
    "rather": 0.9,
    "somewhat": 0.75,
    "slightly": 0.75,
    "fairly": 0.85,
    "barely": 0.5,
}
NEGATION_WINDOW = 2
LONG_ANSWER_TOKENS = 100

CONNECTIVE_CLASSES = ("comparison", "contingency", "expansion", "temporal")
POS_CLASSES = ("cardinal", "noun", "preposition", "pronoun", "first_person_pronoun", "verb")


class UndefinedMetricError(ValueError):
    """The metric has no value for this input (e.g. zero words or sentences)."""


@dataclass
class MetricVector:
    """Named metric values for one justification or one author."""

    token_count: float | None = None
    pct_over_100_tokens: float | None = None
    tokens_per_sentence: float | None = None
    flesch: float | None = None
    dale_chall: float | None = None
    sentiment_abs: float | None = None
    fin_positive_ratio: float | None = None
    fin_negative_ratio: float | None = None
    pct_uncertain_sentences: float | None = None
    tentative_rate: float | None = None
    quote_presence: float | None = None
    focuspast_rate: float | None = None
    focuspresentfuture_rate: float | None = None
    cardinal_rate: float | None = None
    noun_rate: float | None = None
    preposition_rate: float | None = None
    pronoun_rate: float | None = None
    first_person_pronoun_rate: float | None = None
    verb_rate: float | None = None
    comparison_rate: float | None = None
    contingency_rate: float | None = None
    expansion_rate: float | None = None
    temporal_rate: float | None = None
    analytical_score: float | None = None

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in self.names()}

    @classmethod
    def from_dict(cls, d: Mapping[str, float | None]) -> "MetricVector":
        return cls(**{k: (None if d.get(k) is None else float(d[k])) for k in cls.names()})

    def get(self, name: str) -> float | None:
        return getattr(self, name)


METRIC_NAMES = MetricVector.names()

# Feature groups used by the classifier and the comparison report.
TEXTUAL_METRICS = (
    "token_count",
    "pct_over_100_tokens",
    "tokens_per_sentence",
    "flesch",
    "dale_chall",
    "sentiment_abs",
    "cardinal_rate",
    "noun_rate",
    "preposition_rate",
    "pronoun_rate",
    "first_person_pronoun_rate",
    "verb_rate",
)
COGNITIVE_METRICS = (
    "pct_uncertain_sentences",
    "tentative_rate",
    "quote_presence",
    "focuspast_rate",
    "focuspresentfuture_rate",
    "comparison_rate",
    "contingency_rate",
    "expansion_rate",
    "temporal_rate",
    "analytical_score",
)
FINANCIAL_METRICS = ("fin_positive_ratio", "fin_negative_ratio")


@dataclass(frozen=True)
class Lexicons:
    """The lexicons a metric run needs; defaults are the bundled files."""

    liwc: CategoryLexicon
    function: CategoryLexicon
    hedges: CategoryLexicon
    connectives: CategoryLexicon
    sentiment: CategoryLexicon
    financial: CategoryLexicon
    easy_words: frozenset

    @classmethod
    def default(cls) -> "Lexicons":
        return cls(
            liwc=resources.lexicon("liwc"),
            function=resources.lexicon("function"),
            hedges=resources.lexicon("hedges"),
            connectives=resources.lexicon("connectives"),
            sentiment=resources.lexicon("sentiment"),
            financial=resources.lexicon("financial"),
            easy_words=resources.easy_words(),
        )

    @classmethod
    def with_overrides(cls, paths: Mapping[str, str | Path | None]) -> "Lexicons":
        """Bundled lexicons with some replaced by user files, keyed by field name."""
        base = cls.default()
        changes = {}
        for key, path in paths.items():
            if path is None:
                continue
            if key == "easy_words":
                with open(path, encoding="utf-8") as fh:
                    changes[key] = frozenset(ln.strip().lower() for ln in fh if ln.strip() and not ln.startswith("#"))
            elif key in ("liwc", "function", "hedges", "connectives", "sentiment", "financial"):
                changes[key] = load_lexicon(path, name=key)
            else:
                raise KeyError(f"unknown lexicon {key!r}")
        return replace(base, **changes)


def _require(tok: TokenizedText, words: bool = False, sentences: bool = False, tokens: bool = False):
    if tokens and len(tok.tokens) == 0:
        raise UndefinedMetricError("text has no tokens")
    if sentences and tok.n_sentences == 0:
        raise UndefinedMetricError("text has no sentences")
    if words and not tok.words():
        raise UndefinedMetricError("text has no words")


# ---------------------------------------------------------------------------
# Readability


def flesch_reading_ease(tok: TokenizedText) -> float:
    """Flesch reading ease over letter-bearing tokens.

    >>> round(flesch_reading_ease(tokenize("Go .")), 6)
    121.22
    """
    _require(tok, words=True, sentences=True)
    words = tok.words()
    syllables = sum(count_syllables(w) for w in words)
    return 206.835 - 1.015 * (len(words) / tok.n_sentences) - 84.6 * (syllables / len(words))


def dale_chall(tok: TokenizedText, easy_words: Iterable[str] | None = None) -> float:
    """New Dale-Chall score; words absent from ``easy_words`` count as difficult."""
    _require(tok, words=True, sentences=True)
    easy = resources.easy_words() if easy_words is None else easy_words
    words = tok.words()
    difficult = sum(1 for w in words if w.lower() not in easy)
    pct = 100.0 * difficult / len(words)
    score = 0.1579 * pct + 0.0496 * (len(words) / tok.n_sentences)
    if pct > 5.0:
        score += 3.6365
    return score


# ---------------------------------------------------------------------------
# Lexicon metrics


def sentiment_strength(
    tok: TokenizedText,
    lexicon: CategoryLexicon | None = None,
    negators: Iterable[str] = NEGATORS,
    intensifiers: Mapping[str, float] = INTENSIFIERS,
) -> float:
    """Absolute value of the summed word scores after negation and intensification.

    A negator up to two tokens before a scored word flips its sign; an
    intensifier directly before it scales it.
    """
    lexicon = lexicon or resources.lexicon("sentiment")
    negators = frozenset(negators)
    low = [t.lower() for t in tok.tokens]
    total = 0.0
    for start, _, entry in lexicon.scan(low):
        score = sum(s for s in entry.labels.values() if s is not None)
        if score == 0:
            continue
        if start >= 1 and low[start - 1] in intensifiers:
            score *= intensifiers[low[start - 1]]
        if any(low[j] in negators for j in range(max(0, start - NEGATION_WINDOW), start)):
            score = -score
        total += score
    return abs(total)


def financial_sentiment(tok: TokenizedText, lexicon: CategoryLexicon | None = None) -> tuple[float, float]:
    """(positive, negative) term counts divided by the token count."""
    _require(tok, tokens=True)
    lexicon = lexicon or resources.lexicon("financial")
    n = len(tok.tokens)
    hits = lexicon.scan(tok.tokens)
    return count_matches_in(hits, ["positive"]) / n, count_matches_in(hits, ["negative"]) / n


def uncertain_sentences(tok: TokenizedText, lexicon: CategoryLexicon | None = None) -> list[bool]:
    """Per-sentence flag: does the sentence contain a hedge cue?"""
    lexicon = lexicon or resources.lexicon("hedges")
    return [bool(lexicon.scan(sent)) for sent in tok.sentences()]


def uncertainty_rate(
    tok: TokenizedText,
    lexicon: CategoryLexicon | None = None,
    labels: Sequence[bool] | None = None,
) -> float:
    """Fraction of sentences judged uncertain.

    ``labels`` may carry one externally produced uncertain/certain flag per
    sentence, in which case the hedge lexicon is not consulted.
    """
    _require(tok, sentences=True)
    if labels is None:
        labels = uncertain_sentences(tok, lexicon)
    elif len(labels) != tok.n_sentences:
        raise ValueError(f"{len(labels)} uncertainty labels for {tok.n_sentences} sentences")
    return sum(1 for x in labels if x) / tok.n_sentences


def quote_presence(text: str) -> float:
    return 1.0 if find_quote_spans(text) else 0.0


def connective_rates(tok: TokenizedText, lexicon: CategoryLexicon | None = None) -> dict[str, float]:
    _require(tok, tokens=True)
    lexicon = lexicon or resources.lexicon("connectives")
    n = len(tok.tokens)
    hits = lexicon.scan(tok.tokens)
    return {c: count_matches_in(hits, [c]) / n for c in CONNECTIVE_CLASSES}


def temporal_orientation(tok: TokenizedText, lexicon: CategoryLexicon | None = None) -> tuple[float, float]:
    """(focuspast_rate, focuspresentfuture_rate) per token."""
    _require(tok, tokens=True)
    lexicon = lexicon or resources.lexicon("liwc")
    n = len(tok.tokens)
    hits = lexicon.scan(tok.tokens)
    past = count_matches_in(hits, ["focuspast"])
    presfut = count_matches_in(hits, ["focuspresent", "focusfuture"])
    return past / n, presfut / n


def tentative_rate(tok: TokenizedText, lexicon: CategoryLexicon | None = None) -> float:
    _require(tok, tokens=True)
    lexicon = lexicon or resources.lexicon("liwc")
    return count_matches_in(lexicon.scan(tok.tokens), ["tentative"]) / len(tok.tokens)


def pos_rates(tok: TokenizedText, tags: Sequence[PosCategory] | None = None) -> dict[str, float]:
    """Share of tokens in each reported part-of-speech class.

    >>> pos_rates(tokenize("I think"))["first_person_pronoun"]
    0.5
    """
    _require(tok, tokens=True)
    tags = pos_tags(tok) if tags is None else tags
    if len(tags) != len(tok.tokens):
        raise ValueError("one tag per token required")
    n = len(tok.tokens)
    return {c: sum(1 for t in tags if t.value == c) / n for c in POS_CLASSES}


def analytical_score(tok: TokenizedText, lexicon: CategoryLexicon | None = None) -> float:
    """Linear proxy for analytical thinking, on a 0-100 scale.

    50 * (1 + article + preposition - pronoun - auxverb - negate), each term a
    per-token rate, clipped to [0, 100]. This is an open stand-in for a
    proprietary composite, not a reimplementation of it.
    """
    _require(tok, tokens=True)
    lexicon = lexicon or resources.lexicon("function")
    n = len(tok.tokens)
    counts = match_lexicon(tok.tokens, lexicon)
    rate = {c: counts.get(c, 0) / n for c in ("article", "preposition", "pronoun", "auxverb", "negate")}
    raw = 1.0 + rate["article"] + rate["preposition"] - rate["pronoun"] - rate["auxverb"] - rate["negate"]
    return min(100.0, max(0.0, 50.0 * raw))


# ---------------------------------------------------------------------------
# Per-record and per-author vectors


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def compute_metrics(
    text: str,
    lexicons: Lexicons | None = None,
    tok: TokenizedText | None = None,
    uncertainty_labels: Sequence[bool] | None = None,
    tags: Sequence[PosCategory] | None = None,
) -> MetricVector:
    lex = lexicons or Lexicons.default()
    tok = tok if tok is not None else tokenize(text)
    n = len(tok.tokens)
    mv = MetricVector(
        token_count=float(n),
        pct_over_100_tokens=1.0 if n >= LONG_ANSWER_TOKENS else 0.0,
        tokens_per_sentence=n / tok.n_sentences if tok.n_sentences else None,
        flesch=_safe(flesch_reading_ease, tok),
        dale_chall=_safe(dale_chall, tok, lex.easy_words),
        sentiment_abs=sentiment_strength(tok, lex.sentiment),
        pct_uncertain_sentences=_safe(uncertainty_rate, tok, lex.hedges, uncertainty_labels),
        tentative_rate=_safe(tentative_rate, tok, lex.liwc),
        quote_presence=quote_presence(text),
        analytical_score=_safe(analytical_score, tok, lex.function),
    )
    if n:
        mv.fin_positive_ratio, mv.fin_negative_ratio = financial_sentiment(tok, lex.financial)
        mv.focuspast_rate, mv.focuspresentfuture_rate = temporal_orientation(tok, lex.liwc)
        for k, v in pos_rates(tok, tags).items():
            setattr(mv, f"{k}_rate", v)
        for k, v in connective_rates(tok, lex.connectives).items():
            setattr(mv, f"{k}_rate", v)
    return mv


def compute_many(texts: Sequence[str], lexicons: Lexicons | None = None, threads: int = 1) -> list[MetricVector]:
    """Metric vectors for many texts, in input order whatever ``threads`` is."""
    lex = lexicons or Lexicons.default()
    if threads <= 1 or len(texts) < 2:
        return [compute_metrics(t, lex) for t in texts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: compute_metrics(t, lex), texts))


def author_aggregate(vectors: Sequence[MetricVector]) -> MetricVector:
    """Unweighted per-metric mean, skipping records where the metric is missing.

    >>> author_aggregate([MetricVector(token_count=40.0), MetricVector(token_count=120.0)]).token_count
    80.0
    """
    if not vectors:
        raise ValueError("cannot aggregate zero records")
    out = MetricVector()
    for name in METRIC_NAMES:
        vals = [getattr(v, name) for v in vectors if getattr(v, name) is not None]
        setattr(out, name, math.fsum(vals) / len(vals) if vals else None)
    return out
