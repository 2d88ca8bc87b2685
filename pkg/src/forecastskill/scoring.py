"""Ground-truth skill: Brier scores, within-question z-scores, author ranking,
calibration curves, and EPS forecast error with per-analyst standardization.

Both standardizations use the population (divide-by-n) standard deviation.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Domain, ForecastRecord


class DegenerateGroupWarning(UserWarning):
    """A question or analyst had no spread, so its z-scores were set to 0."""


class Group(str, enum.Enum):
    TOP = "top"
    BOTTOM = "bottom"
    MIDDLE = "middle"


def brier(estimate: float, outcome: float) -> float:
    """Squared error of a probability forecast.

    >>> brier(0.5, 1)
    0.25
    """
    if not 0.0 <= estimate <= 1.0:
        raise ValueError(f"estimate {estimate} outside [0, 1]")
    if outcome not in (0, 1):
        raise ValueError(f"outcome {outcome} is not 0 or 1")
    return (estimate - outcome) ** 2


def _standardizer(reference: Sequence[float]):
    """Map v to (v - mean) / std using population moments of ``reference``.

    Values are divided by their largest magnitude first so that tiny spreads
    do not underflow when squared. Returns None when there is no spread.
    """
    scale = max(abs(v) for v in reference)
    if len(reference) < 2 or scale == 0.0 or min(reference) == max(reference):
        return None
    w = [v / scale for v in reference]
    mean = math.fsum(w) / len(w)
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in w) / len(w))
    if std == 0.0:
        return None
    return lambda v: (v / scale - mean) / std


def _zscores(values: Sequence[float]) -> list[float] | None:
    f = _standardizer(values)
    return None if f is None else [f(v) for v in values]


def standardize_within_question(
    scores: Mapping[str, float], question_of: Mapping[str, str]
) -> tuple[dict[str, float], list[str]]:
    """z-score each record against the other forecasts on its question.

    Returns ``(z, degenerate)``: ``z`` maps record id to score and
    ``degenerate`` lists the questions with a single forecast or no spread,
    whose records all get z = 0.
    """
    by_q: dict[str, list[str]] = defaultdict(list)
    for rid in scores:
        by_q[question_of[rid]].append(rid)
    z: dict[str, float] = {}
    degenerate = []
    for q in sorted(by_q):
        rids = sorted(by_q[q])
        vals = _zscores([scores[r] for r in rids])
        if vals is None:
            degenerate.append(q)
            vals = [0.0] * len(rids)
        z.update(zip(rids, vals))
    if degenerate:
        warnings.warn(
            f"{len(degenerate)} question(s) without score spread; z set to 0: {', '.join(degenerate[:5])}"
            + (" ..." if len(degenerate) > 5 else ""),
            DegenerateGroupWarning,
            stacklevel=2,
        )
    return z, degenerate


@dataclass(frozen=True)
class ScoredRecord:
    record_id: str
    author_id: str
    target_id: str
    brier: float
    z: float


def score_corpus(records: Iterable[ForecastRecord]) -> tuple[list[ScoredRecord], list[str]]:
    """Brier and standardized Brier for every resolved binary record.

    Unresolved and EPS records are skipped. Output is sorted by record id.
    """
    usable = [r for r in records if r.domain_tag is Domain.BINARY and r.outcome is not None]
    scores = {r.record_id: brier(r.estimate, r.outcome) for r in usable}
    z, degenerate = standardize_within_question(scores, {r.record_id: r.target_id for r in usable})
    out = [ScoredRecord(r.record_id, r.author_id, r.target_id, scores[r.record_id], z[r.record_id]) for r in usable]
    out.sort(key=lambda s: s.record_id)
    return out, degenerate


# ---------------------------------------------------------------------------
# Ranking


@dataclass(frozen=True)
class ForecasterProfile:
    author_id: str
    n_forecasts: int
    mean_std_brier: float
    rank: int
    group: Group = Group.MIDDLE


def rank_forecasters(records: Iterable, z: Mapping[str, float]) -> list[ForecasterProfile]:
    """Authors ordered by mean z (lower is better), ties by author id.

    ``records`` need ``record_id`` and ``author_id`` attributes; records
    without a z-score are ignored.
    """
    per_author: dict[str, list[float]] = defaultdict(list)
    for r in records:
        if r.record_id in z:
            per_author[r.author_id].append(z[r.record_id])
    rows = sorted(
        ((math.fsum(v) / len(v), a, len(v)) for a, v in per_author.items()),
        key=lambda t: (t[0], t[1]),
    )
    return [ForecasterProfile(a, n, m, i + 1) for i, (m, a, n) in enumerate(rows)]


def assign_groups(profiles: Sequence[ForecasterProfile], k: int) -> list[ForecasterProfile]:
    """Label the best ``k`` profiles top and the worst ``k`` bottom."""
    n = len(profiles)
    if k < 0:
        raise ValueError("K must be non-negative")
    if 2 * k > n:
        raise ValueError(f"K={k} exceeds half of the {n} ranked authors")
    ordered = sorted(profiles, key=lambda p: p.rank)
    out = []
    for i, p in enumerate(ordered):
        g = Group.TOP if i < k else Group.BOTTOM if i >= n - k else Group.MIDDLE
        out.append(replace(p, group=g))
    return out


def select_groups(profiles: Sequence[ForecasterProfile], k: int) -> tuple[list[ForecasterProfile], list[ForecasterProfile]]:
    """(top K, bottom K); the bottom list runs from the worst author upward."""
    labelled = assign_groups(profiles, k)
    top = [p for p in labelled if p.group is Group.TOP]
    bottom = [p for p in reversed(labelled) if p.group is Group.BOTTOM]
    return top, bottom


# ---------------------------------------------------------------------------
# Calibration


@dataclass(frozen=True)
class CalibrationCurve:
    edges: tuple[float, ...]
    mean_estimate: tuple[float | None, ...]
    frequency: tuple[float | None, ...]
    counts: tuple[int, ...]

    @property
    def n_bins(self) -> int:
        return len(self.counts)


def calibration_from_arrays(estimates, outcomes, n_bins: int = 10) -> CalibrationCurve:
    """Equal-width bins over [0, 1]; the last bin is closed on the right."""
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    f = np.asarray(estimates, dtype=float)
    o = np.asarray(outcomes, dtype=float)
    if f.shape != o.shape:
        raise ValueError("estimates and outcomes differ in length")
    if f.size == 0:
        raise ValueError("no resolved forecasts")
    idx = np.minimum((f * n_bins).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sum_f = np.bincount(idx, weights=f, minlength=n_bins)
    sum_o = np.bincount(idx, weights=o, minlength=n_bins)
    means, freqs = [], []
    for c, sf, so in zip(counts, sum_f, sum_o):
        means.append(float(sf / c) if c else None)
        freqs.append(float(so / c) if c else None)
    edges = tuple(i / n_bins for i in range(n_bins + 1))
    return CalibrationCurve(edges, tuple(means), tuple(freqs), tuple(int(c) for c in counts))


def calibration_curve(records: Iterable[ForecastRecord], n_bins: int = 10) -> CalibrationCurve:
    usable = [r for r in records if r.domain_tag is Domain.BINARY and r.outcome is not None]
    return calibration_from_arrays([r.estimate for r in usable], [r.outcome for r in usable], n_bins)


# ---------------------------------------------------------------------------
# EPS forecast error


def eps_error(estimate: float, actual: float) -> float:
    """|e - o| / |o|.

    >>> eps_error(1.63, -0.01)
    164.0
    """
    if actual == 0:
        raise ValueError("actual EPS is zero; relative error undefined")
    return abs(estimate - actual) / abs(actual)


def standardize_analyst_errors(
    errors: Mapping[str, float], trim: float = 0.9, min_n: int = 100
) -> dict[str, float]:
    """Standardize one analyst's errors with moments of the smallest ``trim`` share.

    The trimmed set is the floor(trim * n) smallest errors, ties ordered by
    record id. Every error, trimmed or not, is standardized with those moments.
    """
    n = len(errors)
    if n < min_n:
        raise ValueError(f"analyst has {n} forecasts, fewer than {min_n}")
    if not 0.0 < trim <= 1.0:
        raise ValueError("trim must lie in (0, 1]")
    ordered = sorted(errors.items(), key=lambda kv: (kv[1], kv[0]))
    kept = [v for _, v in ordered[: max(1, math.floor(trim * n))]]
    f = _standardizer(kept)
    if f is None:
        warnings.warn("analyst errors have zero trimmed spread; z set to 0", DegenerateGroupWarning, stacklevel=2)
        return {rid: 0.0 for rid in errors}
    return {rid: f(v) for rid, v in errors.items()}


@dataclass(frozen=True)
class ErrorRecord:
    record_id: str
    analyst_id: str
    raw_error: float
    std_error: float


def analyst_error_table(
    records: Iterable[ForecastRecord], trim: float = 0.9, min_n: int = 100
) -> tuple[list[ErrorRecord], dict[str, int]]:
    """Error records for every qualifying resolved EPS forecast.

    Returns the records (sorted by analyst then record id) and counts of
    exclusions keyed by reason.
    """
    excluded = {"zero_actual": 0, "analyst_below_min": 0}
    by_analyst: dict[str, dict[str, float]] = defaultdict(dict)
    for r in records:
        if r.domain_tag is not Domain.EPS or r.outcome is None:
            continue
        if r.outcome == 0:
            excluded["zero_actual"] += 1
            continue
        by_analyst[r.author_id][r.record_id] = eps_error(r.estimate, r.outcome)
    if excluded["zero_actual"]:
        warnings.warn(f"{excluded['zero_actual']} forecast(s) with actual EPS 0 excluded", UserWarning, stacklevel=2)
    out = []
    for analyst in sorted(by_analyst):
        errs = by_analyst[analyst]
        if len(errs) < min_n:
            excluded["analyst_below_min"] += len(errs)
            continue
        std = standardize_analyst_errors(errs, trim=trim, min_n=min_n)
        out.extend(ErrorRecord(rid, analyst, errs[rid], std[rid]) for rid in sorted(errs))
    return out, excluded
