"""Seeded synthetic corpora with planted skill and planted linguistic effects.

Binary questions are shared by all authors. Each question has a latent
probability ``p ~ U(0, 1)`` and outcome ``o ~ Bernoulli(p)``. An author of
skill ``s`` reports ``clip(p + (1 - s) * N(0, sigma))``. Justifications are
assembled from the bundled template bank; three properties vary linearly with
skill:

* the chance that a sentence opens with a hedge cue,
* the expected number of sentences,
* the chance that a sentence uses a sentiment-laden adjective.

By default skills take one of three tiers (0, 0.5, 1) and every author
answers each of 50 shared questions; ``skill_dist`` also accepts
``"uniform"`` and ``"beta"``.

All draws come from PCG64 streams spawned from one ``SeedSequence``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Mapping, TextIO

import numpy as np

from . import resources
from .corpus import Domain, ForecastRecord

EPOCH = datetime(2015, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SynthConfig:
    n_authors: int = 200
    forecasts_per_author: tuple[int, int] = (50, 50)
    n_questions: int = 50
    skill_dist: str = "levels"
    skill_params: tuple[float, ...] = (0.0, 0.5, 1.0)
    sigma: float = 0.2
    hedge_base: float = 0.15
    hedge_slope: float = 0.5
    length_base: float = 3.0
    length_slope: float = 3.0
    length_noise: float = 0.7
    sentiment_base: float = 0.6
    sentiment_slope: float = -0.45
    question_window_days: int = 60
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.forecasts_per_author
        if self.n_authors < 1:
            raise ValueError("n_authors must be positive")
        if not 1 <= lo <= hi:
            raise ValueError("forecasts_per_author must satisfy 1 <= low <= high")
        if hi > self.n_questions:
            raise ValueError("an author cannot forecast more questions than exist")
        kind, params = self.skill_dist, tuple(self.skill_params)
        if kind == "uniform":
            if len(params) != 2 or not 0.0 <= params[0] <= params[1] <= 1.0:
                raise ValueError("uniform skill needs bounds 0 <= low <= high <= 1")
        elif kind == "beta":
            if len(params) != 2 or min(params) <= 0:
                raise ValueError("beta skill needs two positive parameters")
        elif kind == "levels":
            if not params or not all(0.0 <= v <= 1.0 for v in params):
                raise ValueError("skill levels must lie in [0, 1]")
        else:
            raise ValueError(f"unknown skill distribution {kind!r}")
        for name in ("sigma", "hedge_base", "hedge_slope", "length_base", "length_slope", "length_noise",
                     "sentiment_base", "sentiment_slope"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.sigma < 0 or self.length_noise < 0:
            raise ValueError("noise scales must be non-negative")
        for base, slope, label in ((self.hedge_base, self.hedge_slope, "hedge"),
                                   (self.sentiment_base, self.sentiment_slope, "sentiment")):
            if not (0.0 <= base <= 1.0 and 0.0 <= base + slope <= 1.0):
                raise ValueError(f"{label} probability leaves [0, 1] for some skill")
        if self.length_base + min(0.0, self.length_slope) < 1.0:
            raise ValueError("expected sentence count must be at least 1 for every skill")

    def hedge_probability(self, skill: float) -> float:
        return self.hedge_base + self.hedge_slope * skill

    def sentiment_probability(self, skill: float) -> float:
        return self.sentiment_base + self.sentiment_slope * skill

    def expected_sentences(self, skill: float) -> float:
        return self.length_base + self.length_slope * skill


def _rng(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seq))


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _sentence(rng: np.random.Generator, bank: Mapping, hedged: bool, emotive: bool) -> str:
    core = _pick(rng, bank["cores"])
    adj = _pick(rng, bank["sentiment_adjectives"] if emotive else bank["neutral_adjectives"])
    text = core.format(
        subject=_pick(rng, bank["subjects"]),
        verb=_pick(rng, bank["verbs"]),
        adj=adj,
        noun=_pick(rng, bank["nouns"]),
        when=_pick(rng, bank["whens"]),
    )
    opener = _pick(rng, bank["hedge_openers"] if hedged else bank["plain_openers"])
    text = " ".join(f"{opener} {text}".split()) if opener else " ".join(text.split())
    return text[0].upper() + text[1:]


def justification(rng: np.random.Generator, skill: float, config: SynthConfig, bank: Mapping | None = None) -> str:
    bank = bank or resources.synth_templates()
    n = max(1, int(round(config.expected_sentences(skill) + config.length_noise * rng.standard_normal())))
    p_hedge = config.hedge_probability(skill)
    p_emotive = config.sentiment_probability(skill)
    parts = []
    for _ in range(n):
        hedged = rng.random() < p_hedge
        emotive = rng.random() < p_emotive
        parts.append(_sentence(rng, bank, hedged, emotive))
    return " ".join(parts)


def _draw_skills(rng: np.random.Generator, config: SynthConfig) -> np.ndarray:
    kind, params = config.skill_dist, config.skill_params
    if kind == "uniform":
        return rng.uniform(params[0], params[1], size=config.n_authors)
    if kind == "beta":
        return rng.beta(params[0], params[1], size=config.n_authors)
    return np.asarray(params, dtype=float)[rng.integers(len(params), size=config.n_authors)]


def generate_corpus(config: SynthConfig) -> tuple[list[ForecastRecord], dict[str, float]]:
    """Build a corpus and the true skill of each author.

    Records come sorted by author, then timestamp.
    """
    root = np.random.SeedSequence(config.seed)
    world_seq, *author_seqs = root.spawn(config.n_authors + 1)
    world = _rng(world_seq)
    p = world.uniform(0.0, 1.0, size=config.n_questions)
    outcomes = (world.random(config.n_questions) < p).astype(float)
    opens = world.integers(0, 365 * 2, size=config.n_questions)
    skills = _draw_skills(world, config)
    bank = resources.synth_templates()

    width = len(str(config.n_authors))
    qwidth = len(str(config.n_questions))
    records: list[ForecastRecord] = []
    truth: dict[str, float] = {}
    lo, hi = config.forecasts_per_author
    window = config.question_window_days * 86400
    for i, seq in enumerate(author_seqs):
        rng = _rng(seq)
        author = f"a{i:0{width}d}"
        skill = float(skills[i])
        truth[author] = skill
        n = int(rng.integers(lo, hi + 1))
        questions = np.sort(rng.choice(config.n_questions, size=n, replace=False))
        rows = []
        for q in questions:
            noise = (1.0 - skill) * config.sigma * rng.standard_normal()
            est = min(1.0, max(0.0, float(p[q]) + noise))
            ts = EPOCH + timedelta(days=int(opens[q]), seconds=int(rng.integers(window)))
            rows.append((ts, int(q), est, justification(rng, skill, config, bank)))
        rows.sort(key=lambda r: (r[0], r[1]))
        for k, (ts, q, est, text) in enumerate(rows):
            records.append(
                ForecastRecord(
                    record_id=f"{author}-{k:03d}",
                    author_id=author,
                    target_id=f"q{q:0{qwidth}d}",
                    timestamp=ts,
                    estimate=est,
                    justification=text,
                    outcome=float(outcomes[q]),
                    domain_tag=Domain.BINARY,
                )
            )
    return records, truth


def write_truth(truth: Mapping[str, float], fh: TextIO) -> None:
    fh.write("author_id\tskill\n")
    for author in sorted(truth):
        fh.write(f"{author}\t{truth[author]!r}\n")


def read_truth(fh: TextIO) -> dict[str, float]:
    lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if lines and lines[0].startswith("author_id"):
        lines = lines[1:]
    out = {}
    for ln in lines:
        author, skill = ln.split("\t")
        out[author] = float(skill)
    return out


# ---------------------------------------------------------------------------
# Analyst notes for the EPS domain

_EPS_TEMPLATES = (
    ("We raise our {t1} EPS estimate to {m1} from {m0} .", 1),
    ("We lower our {t1} EPS estimate to {m1} .", 1),
    ("Our {t1} EPS estimate of {m1} is unchanged .", 1),
    ("We maintain our {t1} EPS estimate at {m1} .", 1),
    ("We raise {t1} and {t2} EPS estimates by {d1} and {d2} to {m1} and {m2} .", 2),
    ("We cut our {t1} EPS estimate to {m1} and set {t2} at {m2} .", 2),
)
_FILLER = (
    "Management reiterated full-year guidance on the call .",
    "We trim our 12-month target price to {tp} from {tp0} .",
    "Margins improved on lower input costs .",
    "The stock trades at 15X consensus earnings .",
    "Revenue growth was driven by the services segment .",
)


def _year_label(rng: np.random.Generator, year: int) -> str:
    yy = year % 100
    style = int(rng.integers(3))
    return (f"'{yy:02d}", f"FY {yy:02d}", f"FY{year}")[style]


def _money(x: float) -> str:
    return f"(${-x:,.2f})" if x < 0 else f"${x:,.2f}"


def generate_eps_notes(
    n_analysts: int = 20,
    n_companies: int = 30,
    notes_per_analyst: int = 40,
    years: tuple[int, int] = (2014, 2018),
    seed: int = 0,
) -> tuple[list[ForecastRecord], list[tuple[str, str, float]]]:
    """EPS-domain records whose notes state the estimate in template sentences.

    Returns the records and the gold ``(record_id, time_label, value)`` tuples
    for every estimate written into a note. A record's ``estimate`` is the
    earliest-year value stated in its note and its ``outcome`` is the actual
    EPS of that year.
    """
    root = np.random.SeedSequence(seed)
    world_seq, *analyst_seqs = root.spawn(n_analysts + 1)
    world = _rng(world_seq)
    y0, y1 = years
    actual = {
        (c, y): round(float(world.uniform(0.5, 6.0)) * (1 if world.random() > 0.05 else -0.2), 2)
        for c in range(n_companies)
        for y in range(y0, y1 + 2)
    }
    records, gold = [], []
    width = len(str(n_analysts))
    for i, seq in enumerate(analyst_seqs):
        rng = _rng(seq)
        bias = float(rng.uniform(0.0, 0.3))
        author = f"an{i:0{width}d}"
        for k in range(notes_per_analyst):
            c = int(rng.integers(n_companies))
            year = int(rng.integers(y0, y1 + 1))
            ts = datetime(year, 1, 1, tzinfo=timezone.utc) + timedelta(seconds=int(rng.integers(365 * 86400)))
            template, n_pairs = _pick(rng, _EPS_TEMPLATES)
            vals = []
            labels = []
            for j in range(n_pairs):
                a = actual[(c, year + j)]
                v = round(a * (1 + bias * float(rng.standard_normal())), 2)
                if v == 0:
                    v = 0.01
                vals.append(v)
                labels.append(_year_label(rng, year + j))
            fill = {
                "t1": labels[0], "m1": _money(vals[0]), "m0": _money(abs(vals[0]) + 0.1),
                "t2": labels[-1], "m2": _money(vals[-1]),
                "d1": _money(0.05), "d2": _money(0.07),
            }
            note = template.format(**fill)
            filler = _pick(rng, _FILLER).format(tp=_money(float(rng.uniform(10, 90))), tp0=_money(float(rng.uniform(10, 90))))
            note = f"{filler} {note}" if rng.random() < 0.5 else f"{note} {filler}"
            rid = f"{author}-{k:03d}"
            records.append(
                ForecastRecord(
                    record_id=rid,
                    author_id=author,
                    target_id=f"C{c:03d}",
                    timestamp=ts,
                    estimate=vals[0],
                    justification=note,
                    outcome=actual[(c, year)],
                    domain_tag=Domain.EPS,
                )
            )
            gold.extend((rid, lab, v) for lab, v in zip(labels, vals))
    return records, gold
