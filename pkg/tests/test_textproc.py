import pytest
from hypothesis import given, settings, strategies as st

from forecastskill.textproc import (
    FIRST_PERSON,
    LexiconFormatError,
    PosCategory,
    count_matching,
    count_syllables,
    find_quote_spans,
    lexicon_scores,
    match_lexicon,
    parse_lexicon,
    pos_categorize,
    pos_tags,
    tokenize,
)
from forecastskill import resources

QUESTION = "Will Kim Jong Un visit Seoul before 1 October 2019?"


def lex(*lines):
    return parse_lexicon(lines, name="t")


# ---------------------------------------------------------------------------
# tokenize


def test_question_tokens():
    tok = tokenize(QUESTION)
    # punctuation is its own token, so "?" makes 11; 10 are non-punctuation
    assert len(tok.tokens) == 11
    assert sum(1 for t in tok.tokens if any(c.isalnum() for c in t)) == 10
    assert tok.tokens[-1] == "?"
    assert tok.n_sentences == 1


def test_empty_text():
    tok = tokenize("")
    assert tok.tokens == ()
    assert tok.n_sentences == 0


def test_abbreviation_guard():
    tok = tokenize("U.S. will act. Soon.")
    assert tok.n_sentences == 2
    assert tok.tokens[0] == "U.S."


def test_sentence_needs_capital_after_period():
    assert tokenize("It rose 3 p.c. in May. then fell.").n_sentences == 1


def test_contractions_split():
    assert tokenize("They won't go.").tokens == ("They", "wo", "n't", "go", ".")


def test_spans_point_at_tokens():
    text = "Prices rose, then fell!  Why?"
    tok = tokenize(text)
    assert [text[s:e] for s, e in tok.spans] == list(tok.tokens)


def test_sentence_char_spans_cover_sentences():
    text = "One thing. Another thing."
    tok = tokenize(text)
    assert [text[s:e] for s, e in tok.sentence_char_spans()] == ["One thing.", "Another thing."]


texts = st.text(
    alphabet=st.sampled_from(list("abcdefgXYZ .,!?'\"0123456789$%-")), max_size=80
)


@given(texts)
def test_tokenize_boundaries_invariants(text):
    tok = tokenize(text)
    b = tok.sentence_boundaries
    assert all(x < y for x, y in zip(b, b[1:]))
    if tok.tokens:
        assert b[-1] == len(tok.tokens)
    else:
        assert b == ()
    spans = tok.quote_spans
    assert all(s1[1] <= s2[0] for s1, s2 in zip(spans, spans[1:]))


@given(texts)
def test_tokenize_round_trip(text):
    tok = tokenize(text)
    assert tokenize(" ".join(tok.tokens)).tokens == tok.tokens


@given(texts)
def test_tokenize_deterministic(text):
    assert tokenize(text) == tokenize(text)


# ---------------------------------------------------------------------------
# syllables


@pytest.mark.parametrize(
    "word,n",
    [
        ("go", 1),
        ("missile", 2),
        # maximal vowel groups: "i", "ea" -> 2 under the stated rule
        ("idea", 2),
        ("the", 1),
        ("forecasting", 4),
        ("Seoul", 1),
    ],
)
def test_count_syllables(word, n):
    assert count_syllables(word) == n


def test_count_syllables_rejects_non_letters():
    with pytest.raises(ValueError):
        count_syllables("2019")


@given(st.text(alphabet=st.characters(categories=("Ll", "Lu")), min_size=1, max_size=20))
def test_syllables_positive(word):
    assert count_syllables(word) >= 1


# ---------------------------------------------------------------------------
# quotes


def test_quote_spans_paired_and_unpaired():
    assert find_quote_spans('a "b" c') == [(2, 5)]
    assert find_quote_spans("a “b” c") == [(2, 5)]
    assert find_quote_spans('a "b c') == [(2, 6)]
    assert find_quote_spans("none") == []


# ---------------------------------------------------------------------------
# POS


@pytest.mark.parametrize(
    "token,cat",
    [
        ("my", PosCategory.FIRST_PERSON_PRONOUN),
        ("I", PosCategory.FIRST_PERSON_PRONOUN),
        ("they", PosCategory.PRONOUN),
        ("2019", PosCategory.CARDINAL),
        ("$2.01", PosCategory.CARDINAL),
        ("35%", PosCategory.CARDINAL),
        ("seven", PosCategory.CARDINAL),
        ("partition", PosCategory.NOUN),
        ("before", PosCategory.PREPOSITION),
        (",", PosCategory.OTHER),
    ],
)
def test_pos_categorize(token, cat):
    assert pos_categorize(token) == cat


def test_modal_context_makes_verb():
    assert pos_categorize("visit", prev="will", sentence_initial=False) == PosCategory.VERB


def test_capitalised_mid_sentence_is_not_common_noun():
    assert pos_categorize("Seoul", prev="visit", sentence_initial=False) != PosCategory.NOUN


@given(st.text(min_size=1, max_size=12), st.booleans())
def test_first_person_only_from_closed_list(token, initial):
    if pos_categorize(token, None, initial) == PosCategory.FIRST_PERSON_PRONOUN:
        assert token.lower() in FIRST_PERSON


def test_pos_tags_one_per_token():
    tok = tokenize(QUESTION)
    assert len(pos_tags(tok)) == len(tok.tokens)


# ---------------------------------------------------------------------------
# lexicons


def test_match_lexicon_examples():
    liwc = resources.lexicon("liwc")
    assert match_lexicon(["ago"], liwc)["focuspast"] == 1
    counts = match_lexicon(["will", "soon"], liwc)
    assert counts["focusfuture"] == 2
    assert all(v == 0 for v in match_lexicon([], liwc).values())


def test_literal_beats_prefix_and_longest_prefix_wins():
    lx = lex("expect*\tA", "expected\tB", "ex*\tC")
    assert match_lexicon(["expected"], lx) == {"A": 0, "B": 1, "C": 0}
    assert match_lexicon(["expects"], lx) == {"A": 1, "B": 0, "C": 0}
    assert match_lexicon(["extra"], lx) == {"A": 0, "B": 0, "C": 1}


def test_phrases_match_before_tokens():
    lx = lex("on the other hand\tcomparison", "other\tx")
    assert match_lexicon("On the other hand , other".split(), lx) == {"comparison": 1, "x": 1}


def test_scores_and_multiple_labels():
    lx = lex("good\tpositive\t3", "good\tstrong", "bad\tnegative\t-2")
    assert lexicon_scores(["good", "bad", "good"], lx) == {"positive": 6.0, "strong": 0.0, "negative": -2.0}
    assert count_matching(["good", "bad"], lx, ["positive", "strong"]) == 1


@pytest.mark.parametrize(
    "bad",
    [
        ["justone"],
        ["*\tcat"],
        ["a*b\tcat"],
        ["word\t"],
        ["word\tcat\tnan"],
        ["word\tcat\tx"],
        ["word\tcat", "word\tcat"],
    ],
)
def test_lexicon_format_errors(bad):
    with pytest.raises(LexiconFormatError):
        parse_lexicon(bad)


def test_lexicon_error_has_line_number():
    with pytest.raises(LexiconFormatError, match=":3:"):
        parse_lexicon(["# comment", "ok\tcat", "broken"], source="f.tsv")


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["will", "soon", "ago", "talked", "maybe", "the", "x", "now"]), max_size=30))
def test_counts_bounded_by_tokens(tokens):
    counts = match_lexicon(tokens, resources.lexicon("liwc"))
    assert all(0 <= c <= len(tokens) for c in counts.values())
