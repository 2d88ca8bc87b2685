import pytest
from hypothesis import given, settings, strategies as st

from forecastskill.extract import (
    EpsEstimate,
    PatternSyntaxError,
    earliest_forecast,
    evaluate_extraction,
    extract_eps,
    load_gold,
    load_patterns,
    mask_entities,
    normalize_time_label,
    parse_money,
    parse_pattern,
    parse_patterns,
)

ROW1 = ("We trim our 12-month target price to $20 from $23 , 10X our '16 EPS estimate of $2.01 "
        "-LRB- trimmed today from $2.10 -RRB- .")
ROW2 = "We raise '18 and '19 EPS estimates by $4.61 and $5.72 to $19.85 and $25.95 ."
ROW3 = "We raise our FY 17 EPS estimate to $3.23 from $2.96 and set FY 18 's at $3.43 ."


def pairs(note):
    return [(e.time_label, e.value) for e in extract_eps(note)]


# ---------------------------------------------------------------------------
# worked examples


def test_reference_note_1():
    assert pairs(ROW1) == [("'16", 2.01)]


def test_reference_note_2():
    assert pairs(ROW2) == [("'18", 19.85), ("'19", 25.95)]


def test_reference_note_3():
    assert pairs(ROW3) == [("FY 17", 3.23), ("FY 18", 3.43)]


def test_all_rows_in_one_note():
    assert pairs(" ".join([ROW1, ROW2, ROW3])) == [
        ("'16", 2.01), ("'18", 19.85), ("'19", 25.95), ("FY 17", 3.23), ("FY 18", 3.43)
    ]


def test_target_price_without_eps_anchor_ignored():
    assert pairs("We raise our 12-month target price to $45 .") == []


def test_spans_point_into_note():
    note = "Intro sentence here . " + ROW1
    (est,) = extract_eps(note, record_id="n1")
    assert note[est.time_span[0]:est.time_span[1]] == "'16"
    assert note[est.value_span[0]:est.value_span[1]] == "$2.01"
    assert est.record_id == "n1"


# ---------------------------------------------------------------------------
# masking


def test_mask_row1_fragment():
    assert mask_entities("our '16 EPS estimate of $2.01").masked_text == "our <TIME> EPS estimate of <MONEY>"


def test_no_entities():
    m = mask_entities("Margins look healthy this quarter .")
    assert m.masked_text == m.text and m.spans == ()


def test_two_money_masks_map_back():
    m = mask_entities("$19.85 and $25.95")
    assert m.masked_text == "<MONEY> and <MONEY>"
    assert [s.surface for s in m.spans] == ["$19.85", "$25.95"]
    assert [m.text[s.start:s.end] for s in m.spans] == ["$19.85", "$25.95"]


@pytest.mark.parametrize("surface", ["'16", "FY 17", "FY17", "2016", "full-year 2016", "Q1", "4Q17", "12-month"])
def test_time_forms(surface):
    m = mask_entities(f"see {surface} now")
    assert [(s.kind, s.surface) for s in m.spans] == [("TIME", surface)]


@pytest.mark.parametrize("surface,value", [("$2.01", 2.01), ("$1,234.50", 1234.5), ("($0.45)", -0.45), ("-$1", -1.0)])
def test_money_forms(surface, value):
    m = mask_entities(f"loss of {surface} today")
    assert [(s.kind, s.surface) for s in m.spans] == [("MONEY", surface)]
    assert parse_money(surface) == value


FRAGMENTS = ["We", "raise", "'18", "EPS", "estimate", "to", "$3.23", "from", "($1,200.5)", "FY 17", "Q3",
             "4Q17", "-LRB-", "-RRB-", "2016", "and", "'s", ",", ".", "12-month", "full-year 2015", "$", "x"]


@settings(max_examples=150)
@given(st.lists(st.sampled_from(FRAGMENTS), max_size=25), st.sampled_from([" ", "  ", ""]))
def test_unmask_round_trip(parts, sep):
    text = sep.join(parts)
    m = mask_entities(text)
    assert m.unmask() == text
    # spans are ordered, disjoint and agree with the surface forms
    assert all(a.end <= b.start for a, b in zip(m.spans, m.spans[1:]))
    assert all(text[s.start:s.end] == s.surface for s in m.spans)
    assert m.masked_text.count("<TIME>") + m.masked_text.count("<MONEY>") >= len(m.spans)


@settings(max_examples=100)
@given(st.lists(st.sampled_from(FRAGMENTS + [ROW1, ROW2, ROW3]), max_size=12))
def test_extraction_stays_inside_note(parts):
    note = " ".join(parts)
    out = extract_eps(note)
    assert out == extract_eps(note)
    for e in out:
        assert note[e.time_span[0]:e.time_span[1]] == e.time_label
        assert parse_money(note[e.value_span[0]:e.value_span[1]]) == e.value


# ---------------------------------------------------------------------------
# patterns


def test_bundled_patterns_have_anchor():
    pats = load_patterns()
    assert pats and all(p.n_time >= 1 and p.n_money >= 1 for p in pats)


@pytest.mark.parametrize(
    "line",
    [
        "<TIME> EPS estimate of <MONEY>",  # no emission
        "<TIME> EPS estimate of <MONEY> => (TIME2,MONEY1)",  # slot missing
        "<TIME> estimate of <MONEY> => (TIME1,MONEY1)",  # no EPS anchor
        "<TIME> EPS of <MONEY> => TIME1 MONEY1",  # malformed emission
    ],
)
def test_pattern_syntax_errors(line):
    with pytest.raises(PatternSyntaxError):
        parse_pattern(line)


def test_pattern_error_reports_line():
    with pytest.raises(PatternSyntaxError, match=":2"):
        parse_patterns("# ok\nbroken line\n", source="p.txt")


def test_custom_pattern_file(tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("guide: EPS guidance for <TIME> is <MONEY> => (TIME1,MONEY1)\n")
    pats = load_patterns(p)
    assert [(e.time_label, e.value) for e in extract_eps("EPS guidance for FY19 is $1.10 .", pats)] == [("FY19", 1.1)]


# ---------------------------------------------------------------------------
# selection and evaluation


def est(label, value=1.0, start=0, rid="n"):
    return EpsEstimate(label, value, rid, "p", (start, start + 1), (start, start + 1), (start, start + 1))


def test_earliest_forecast():
    a, b = est("'17", start=5), est("'18", start=0)
    assert earliest_forecast([b, a]) is a
    assert earliest_forecast([a, est("'19")]) is a
    assert earliest_forecast([b]) is b
    assert earliest_forecast([est("'12"), est("2020")]) is None
    assert earliest_forecast([]) is None


def test_earliest_ties_by_position():
    first, second = est("FY 17", 2.0, start=3), est("'17", 3.0, start=9)
    assert earliest_forecast([second, first]) is first


def test_unnormalizable_label_skipped_with_warning():
    with pytest.warns(UserWarning, match="12-month"):
        assert earliest_forecast([est("12-month"), est("'16")]).time_label == "'16"


@pytest.mark.parametrize("label,year", [("'16", 2016), ("FY 17", 2017), ("FY17", 2017), ("4Q17", 2017),
                                        ("Q1 2018", 2018), ("full-year 2016", 2016), ("2015", 2015), ("12-month", None)])
def test_normalize_time_label(label, year):
    assert normalize_time_label(label) == year


def test_evaluate_extraction_examples():
    gold = [(f"r{i}", "'16", 1.0) for i in range(5)]
    assert evaluate_extraction(gold, gold) == (1.0, 1.0)
    gold8 = [(f"r{i}", "'16", 1.0) for i in range(8)]
    predicted = [(f"r{i}", "'16", 1.0) for i in range(4)] + [("r9", "'16", 2.0)]
    assert evaluate_extraction(predicted, gold8) == (0.8, 0.5)
    assert evaluate_extraction([], gold8) == (None, 0.0)
    with pytest.raises(ValueError):
        evaluate_extraction(predicted, [])


def test_label_forms_match_by_year():
    assert evaluate_extraction([("r", "FY 16", 2.0)], [("r", "'16", 2.0)]) == (1.0, 1.0)
    assert evaluate_extraction([("r", "'16", 2.0)], [("r", "'16", 2.01)]) == (0.0, 0.0)


def test_load_gold(tmp_path):
    p = tmp_path / "gold.tsv"
    p.write_text("record_id\ttime_label\tvalue\nn1\t'16\t$2.01\nn2\tFY 17\t-0.5\n")
    assert load_gold(p) == [("n1", "'16", 2.01), ("n2", "FY 17", -0.5)]
    p.write_text("n1\t'16\n")
    with pytest.raises(ValueError, match=":1"):
        load_gold(p)
