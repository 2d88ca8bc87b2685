import io
import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from forecastskill.corpus import (
    CorpusError,
    CorpusFilterConfig,
    Domain,
    ForecastRecord,
    apply_filters,
    corpus_to_string,
    format_timestamp,
    is_english,
    load_corpus,
    parse_timestamp,
    quote_ratio,
    read_corpus,
)

TS = datetime(2019, 3, 1, tzinfo=timezone.utc)
LONG = "No North Korean leader has stepped foot in Seoul since the war ended , and that will not change soon ."


def rec(rid, author="a", text=LONG, est=0.3, outcome=1.0, target="q1"):
    return ForecastRecord(rid, author, target, TS, est, text, outcome)


def line(**over):
    row = {
        "record_id": "r1",
        "author_id": "a1",
        "target_id": "q1",
        "timestamp": "2019-03-01T12:00:00Z",
        "estimate": 0.05,
        "justification": LONG,
        "outcome": 0,
        "domain_tag": "binary",
    }
    row.update(over)
    return json.dumps(row)


# ---------------------------------------------------------------------------
# loading


def test_three_good_lines(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("\n".join(line(record_id=f"r{i}") for i in range(3)) + "\n")
    records, errors = load_corpus(p)
    assert [r.record_id for r in records] == ["r0", "r1", "r2"]
    assert errors == []


def test_out_of_range_estimate_rejected():
    records, errors = read_corpus([line(record_id="ok"), line(record_id="bad", estimate=1.3)])
    assert [r.record_id for r in records] == ["ok"]
    assert len(errors) == 1 and errors[0].line == 2
    assert "outside [0, 1]" in errors[0].message


def test_empty_file(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text("")
    assert load_corpus(p) == ([], [])


def test_unreadable_file(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "missing.jsonl")


@pytest.mark.parametrize(
    "bad,fragment",
    [
        ("{not json", "invalid JSON"),
        ("[1, 2]", "JSON object"),
        (line(outcome=0.5), "not 0 or 1"),
        (line(timestamp="yesterday"), "bad timestamp"),
        (line(domain_tag="stocks"), "unknown domain_tag"),
        (json.dumps({"record_id": "x"}), "missing field"),
        (line(estimate="NaN"), "not finite"),
    ],
)
def test_schema_violations_reported_with_line(bad, fragment):
    records, errors = read_corpus([line(), bad])
    assert len(records) == 1
    assert errors[0].line == 2 and fragment in errors[0].message


def test_duplicate_record_id():
    records, errors = read_corpus([line(), line()])
    assert len(records) == 1
    assert "duplicate" in errors[0].message and errors[0].line == 2


def test_header_rows_are_skipped():
    header = json.dumps({"_type": "header", "command": "synth"})
    records, errors = read_corpus([header, line()])
    assert len(records) == 1 and errors == []


def test_eps_record_allows_any_amount():
    records, errors = read_corpus([line(domain_tag="eps", estimate=1.63, outcome=-0.01)])
    assert errors == [] and records[0].domain_tag is Domain.EPS


def test_csv_round_trip():
    records = [rec("r1"), rec("r2", outcome=None, text='He said "no" , twice')]
    text = corpus_to_string(records, "csv")
    back, errors = read_corpus(io.StringIO(text, newline=""), "csv")
    assert errors == [] and back == records


def test_jsonl_round_trip():
    records = [rec("r1"), rec("r2", outcome=None)]
    back, errors = read_corpus(io.StringIO(corpus_to_string(records)), "jsonl")
    assert errors == [] and back == records


def test_timestamps_are_utc():
    assert parse_timestamp("2019-03-01T12:00:00+02:00") == datetime(2019, 3, 1, 10, tzinfo=timezone.utc)
    assert parse_timestamp("2019-03-01T12:00:00") == datetime(2019, 3, 1, 12, tzinfo=timezone.utc)
    assert format_timestamp(parse_timestamp("2019-03-01T12:00:00Z")) == "2019-03-01T12:00:00Z"


# ---------------------------------------------------------------------------
# filters


def test_nine_tokens_dropped_at_ten():
    nine = "one two three four five six seven eight nine"
    kept, report = apply_filters([rec("r1", text=nine)], CorpusFilterConfig(min_forecasts_per_author=0))
    assert kept == [] and report.dropped_length == 1


def test_fully_quoted_dropped():
    text = '"' + LONG + '"'
    assert quote_ratio(text) == 1.0
    kept, report = apply_filters([rec("r1", text=text)], CorpusFilterConfig(min_forecasts_per_author=0))
    assert kept == [] and report.dropped_quotes == 1


def test_author_filter_after_record_filters():
    records = [rec(f"a{i}", author="a") for i in range(4)]
    records += [rec(f"b{i}", author="b") for i in range(5)]
    records.append(rec("b-short", author="b", text="too short"))
    records.append(rec("a-short", author="a", text="too short"))
    kept, report = apply_filters(records)
    assert {r.author_id for r in kept} == {"b"}
    assert report.dropped_author == 4
    assert report.dropped_length == 2
    assert report.authors_dropped == 1
    assert report.dropped + report.retained == report.n_input


def test_non_english_dropped():
    german = "Der nordkoreanische Führer wird Seoul nicht besuchen , weil die Lage angespannt bleibt ."
    kept, report = apply_filters([rec("r1", text=german)], CorpusFilterConfig(min_forecasts_per_author=0))
    assert kept == [] and report.dropped_language == 1


def test_language_check_is_pluggable():
    cfg = CorpusFilterConfig(min_forecasts_per_author=0)
    kept, _ = apply_filters([rec("r1")], cfg, language_check=lambda text: False)
    assert kept == []
    kept, _ = apply_filters([rec("r1")], CorpusFilterConfig(min_forecasts_per_author=0, require_english=False),
                            language_check=lambda text: False)
    assert len(kept) == 1


@pytest.mark.parametrize(
    "text,expected",
    [
        ("No North Korean leader has stepped foot in Seoul", True),
        ("", False),
        ("12345 !!! 678, 90 ??", False),
    ],
)
def test_is_english(text, expected):
    assert is_english(text) is expected


def test_config_validation():
    with pytest.raises(ValueError):
        CorpusFilterConfig(max_quote_ratio=1.5)
    with pytest.raises(ValueError):
        CorpusFilterConfig(min_tokens_per_justification=-1)


# ---------------------------------------------------------------------------
# properties

WORDS = ["the", "war", "will", "not", "end", "soon", "\"", "Seoul", "is", "far", "da", "ist", "."]


@st.composite
def corpora(draw):
    n = draw(st.integers(0, 25))
    out = []
    for i in range(n):
        words = draw(st.lists(st.sampled_from(WORDS), max_size=18))
        author = draw(st.sampled_from("abc"))
        out.append(rec(f"r{i:02d}", author=author, text=" ".join(words)))
    return out


configs = st.builds(
    CorpusFilterConfig,
    min_tokens_per_justification=st.integers(0, 12),
    max_quote_ratio=st.floats(0, 1),
    min_forecasts_per_author=st.integers(0, 6),
    require_english=st.booleans(),
)


@settings(max_examples=60)
@given(corpora(), configs)
def test_filter_idempotent(records, cfg):
    once, _ = apply_filters(records, cfg)
    twice, _ = apply_filters(once, cfg)
    assert twice == once


@settings(max_examples=60)
@given(corpora(), configs, st.randoms(use_true_random=False))
def test_filter_permutation(records, cfg, rnd):
    shuffled = list(records)
    rnd.shuffle(shuffled)
    kept, _ = apply_filters(records, cfg)
    kept_shuffled, _ = apply_filters(shuffled, cfg)
    assert sorted(kept_shuffled, key=lambda r: r.record_id) == kept
    assert [r for r in shuffled if r in set(kept)] == kept_shuffled


@settings(max_examples=60)
@given(corpora(), configs)
def test_report_accounts_for_everything(records, cfg):
    kept, report = apply_filters(records, cfg)
    assert report.dropped + report.retained == report.n_input == len(records)
    assert report.retained == len(kept)
