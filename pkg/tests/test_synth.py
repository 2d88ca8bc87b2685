import io
from collections import defaultdict

import numpy as np
import pytest

from forecastskill.corpus import corpus_to_string
from forecastskill.extract import evaluate_extraction, extract_eps
from forecastskill.metrics import uncertainty_rate
from forecastskill.scoring import brier, rank_forecasters, score_corpus
from forecastskill.stats import bootstrap_test, spearman_rho
from forecastskill.synth import (
    SynthConfig,
    generate_corpus,
    generate_eps_notes,
    justification,
    read_truth,
    write_truth,
)
from forecastskill.textproc import tokenize

SMALL = SynthConfig(n_authors=12, forecasts_per_author=(3, 6), n_questions=10, seed=5)


def test_same_seed_same_bytes():
    a, ta = generate_corpus(SMALL)
    b, tb = generate_corpus(SMALL)
    assert corpus_to_string(a) == corpus_to_string(b) and ta == tb


def test_different_seed_differs():
    a, _ = generate_corpus(SMALL)
    b, _ = generate_corpus(SynthConfig(n_authors=12, forecasts_per_author=(3, 6), n_questions=10, seed=6))
    assert corpus_to_string(a) != corpus_to_string(b)


def test_shape_and_ids():
    records, truth = generate_corpus(SMALL)
    per_author = defaultdict(list)
    for r in records:
        per_author[r.author_id].append(r)
    assert set(per_author) == set(truth) and len(truth) == 12
    for recs in per_author.values():
        assert 3 <= len(recs) <= 6
        assert len({r.target_id for r in recs}) == len(recs)
        assert [r.timestamp for r in recs] == sorted(r.timestamp for r in recs)
    assert len({r.record_id for r in records}) == len(records)
    assert all(0.0 <= r.estimate <= 1.0 and r.outcome in (0.0, 1.0) for r in records)


def test_skill_one_reports_latent_probability():
    cfg = SynthConfig(n_authors=4, forecasts_per_author=(2000, 2000), n_questions=2000,
                      skill_params=(1.0,), seed=3)
    records, _ = generate_corpus(cfg)
    by_q = defaultdict(set)
    for r in records:
        by_q[r.target_id].add(r.estimate)
    # no noise term: every author states the same latent p for a question
    assert all(len(v) == 1 for v in by_q.values())
    one = [r for r in records if r.author_id == "a0"]
    # expected Brier of an honest forecaster is E[p(1 - p)] = 1/6 for p ~ U(0, 1)
    assert np.mean([brier(r.estimate, r.outcome) for r in one]) == pytest.approx(1 / 6, abs=0.02)


def test_truth_round_trip():
    _, truth = generate_corpus(SMALL)
    buf = io.StringIO()
    write_truth(truth, buf)
    buf.seek(0)
    assert read_truth(buf) == truth


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_authors": 0},
        {"forecasts_per_author": (5, 3)},
        {"forecasts_per_author": (1, 60)},
        {"skill_dist": "gamma"},
        {"skill_dist": "uniform", "skill_params": (0.5, 0.2)},
        {"skill_dist": "beta", "skill_params": (0.0, 1.0)},
        {"hedge_slope": 0.9},
        {"sigma": float("nan")},
        {"length_base": 0.5, "length_slope": 0.0},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_hedge_slope_recovered():
    cfg = SynthConfig()
    skills = np.random.default_rng(0).uniform(0, 1, 10_000)
    rng = np.random.Generator(np.random.PCG64(1))
    rates = [uncertainty_rate(tokenize(justification(rng, s, cfg))) for s in skills]
    slope = np.polyfit(skills, rates, 1)[0]
    assert abs(slope - cfg.hedge_slope) <= 0.1 * cfg.hedge_slope


def test_zero_slopes_give_null_differences():
    rejections = 0
    for seed in range(200):
        cfg = SynthConfig(n_authors=40, forecasts_per_author=(3, 3), n_questions=10, hedge_slope=0.0,
                          length_slope=0.0, sentiment_slope=0.0, skill_dist="uniform", skill_params=(0.0, 1.0),
                          seed=seed)
        records, truth = generate_corpus(cfg)
        rates = defaultdict(list)
        for r in records:
            rates[r.author_id].append(uncertainty_rate(tokenize(r.justification)))
        order = sorted(truth, key=lambda a: (-truth[a], a))
        top = [np.mean(rates[a]) for a in order[:20]]
        bottom = [np.mean(rates[a]) for a in order[20:]]
        rejections += bootstrap_test(top, bottom, n_iter=1000, seed=seed).p_value < 0.05
    assert 0.02 <= rejections / 200 <= 0.09


def test_ranking_recovers_skill():
    records, truth = generate_corpus(SynthConfig(seed=0))
    scored, _ = score_corpus(records)
    profiles = rank_forecasters(records, {s.record_id: s.z for s in scored})
    authors = [p.author_id for p in profiles]
    # lower standardized Brier means more skill, so correlate against -skill
    rho = spearman_rho([p.mean_std_brier for p in profiles], [-truth[a] for a in authors])
    assert rho >= 0.8


def test_eps_notes_extract_to_gold():
    records, gold = generate_eps_notes(n_analysts=4, notes_per_analyst=25, seed=2)
    predicted = [e for r in records for e in extract_eps(r.justification, record_id=r.record_id)]
    assert evaluate_extraction(predicted, gold) == (1.0, 1.0)
    again, gold2 = generate_eps_notes(n_analysts=4, notes_per_analyst=25, seed=2)
    assert again == records and gold2 == gold
