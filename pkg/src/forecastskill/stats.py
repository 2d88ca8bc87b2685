"""Two-group significance testing and rank correlation.

Bootstrap draws use NumPy's PCG64 generator. The iteration budget is split
into fixed-size chunks, each with its own child stream spawned from the seed,
so the result depends on ``seed`` and ``n_iter`` only and never on how many
threads evaluate the chunks.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

CHUNK_SIZE = 1000


class Direction(str, enum.Enum):
    TOP_HIGHER = "top_higher"
    BOTTOM_HIGHER = "bottom_higher"
    EQUAL = "equal"


@dataclass(frozen=True)
class GroupComparison:
    metric: str
    mean_top: float
    mean_bottom: float
    direction: Direction
    p_value: float
    passes_bonferroni: bool
    n_bootstrap: int
    n_top: int = 0
    n_bottom: int = 0

    @property
    def arrows(self) -> str:
        return p_arrows(self.p_value, self.direction)


def p_arrows(p: float, direction: Direction) -> str:
    """Table-style significance marks: three arrows for p < 0.001, two for
    p < 0.01, one for p < 0.05, none otherwise."""
    n = 3 if p < 0.001 else 2 if p < 0.01 else 1 if p < 0.05 else 0
    if direction is Direction.EQUAL:
        return ""
    return ("↑" if direction is Direction.TOP_HIGHER else "↓") * n


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def _chunk_exceedances(child, top, bottom, size, obs) -> int:
    rng = np.random.Generator(np.random.PCG64(child))
    it = rng.integers(0, top.size, size=(size, top.size))
    ib = rng.integers(0, bottom.size, size=(size, bottom.size))
    diff = top[it].mean(axis=1) - bottom[ib].mean(axis=1)
    return int(np.count_nonzero(np.abs(diff - obs) >= abs(obs)))


def bootstrap_test(
    top_values: Sequence[float],
    bottom_values: Sequence[float],
    n_iter: int = 10000,
    seed=0,
    *,
    metric: str = "",
    alpha: float = 0.05,
    m: int = 1,
    threads: int = 1,
) -> GroupComparison:
    """Two-sample bootstrap test of a difference in means.

    Each group is resampled with replacement at its own size. The p-value is
    the share of resampled differences whose distance from the observed
    difference is at least the observed difference in absolute value.

    Parameters
    ----------
    top_values, bottom_values
        Author-level values for the two groups.
    n_iter
        Number of bootstrap replicates (at least 1000).
    seed
        Integer seed or a ``numpy.random.SeedSequence``.
    alpha, m
        Significance level and number of tests for the Bonferroni flag.
    threads
        Worker threads; has no effect on the result.
    """
    top = np.sort(np.asarray(top_values, dtype=float))
    bottom = np.sort(np.asarray(bottom_values, dtype=float))
    if top.size == 0 or bottom.size == 0:
        raise ValueError("both groups need at least one value")
    if n_iter < 1000:
        raise ValueError("n_iter must be at least 1000")
    if m < 1:
        raise ValueError("m must be at least 1")
    mean_top, mean_bottom = float(top.mean()), float(bottom.mean())
    obs = mean_top - mean_bottom

    n_chunks = math.ceil(n_iter / CHUNK_SIZE)
    children = _as_seed_sequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK_SIZE, n_iter - i * CHUNK_SIZE) for i in range(n_chunks)]
    jobs = list(zip(children, sizes))
    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = list(pool.map(lambda job: _chunk_exceedances(job[0], top, bottom, job[1], obs), jobs))
    else:
        hits = [_chunk_exceedances(c, top, bottom, s, obs) for c, s in jobs]
    p = sum(hits) / n_iter

    if mean_top > mean_bottom:
        direction = Direction.TOP_HIGHER
    elif mean_top < mean_bottom:
        direction = Direction.BOTTOM_HIGHER
    else:
        direction = Direction.EQUAL
    return GroupComparison(
        metric=metric,
        mean_top=mean_top,
        mean_bottom=mean_bottom,
        direction=direction,
        p_value=p,
        passes_bonferroni=p < alpha / m,
        n_bootstrap=n_iter,
        n_top=int(top.size),
        n_bottom=int(bottom.size),
    )


def permutation_test_exact(x: Sequence[float], y: Sequence[float]) -> float:
    """Exact two-sided permutation p-value for a difference in means.

    Enumerates every relabelling, so keep ``len(x) + len(y)`` small (≤ 20).
    """
    pooled = np.asarray(list(x) + list(y), dtype=float)
    n, nx = pooled.size, len(x)
    if nx == 0 or nx == n:
        raise ValueError("both samples must be non-empty")
    total = pooled.sum()
    obs = abs(np.mean(x) - np.mean(y))
    hits = count = 0
    for idx in itertools.combinations(range(n), nx):
        sx = pooled[list(idx)].sum()
        d = abs(sx / nx - (total - sx) / (n - nx))
        hits += d >= obs - 1e-12
        count += 1
    return hits / count


def bonferroni(p_values: Mapping[str, float], alpha: float = 0.05, m: int | None = None) -> dict[str, bool]:
    """Pass iff p < alpha / m; ``m`` defaults to the number of p-values.

    >>> bonferroni({"a": 0.001, "b": 0.002}, m=30)
    {'a': True, 'b': False}
    """
    m = len(p_values) if m is None else m
    if m < 1:
        raise ValueError("m must be at least 1")
    return {k: p < alpha / m for k, p in p_values.items()}


def compare_groups(
    top: Sequence[Mapping[str, float | None]],
    bottom: Sequence[Mapping[str, float | None]],
    metrics: Sequence[str],
    n_iter: int = 10000,
    seed: int = 0,
    alpha: float = 0.05,
    m: int | None = None,
    threads: int = 1,
) -> list[GroupComparison]:
    """Bootstrap every metric and flag Bonferroni survivors.

    ``top`` and ``bottom`` hold one mapping of metric values per author;
    missing values are dropped per metric. Each metric draws from its own
    stream spawned from ``seed`` in the order given by ``metrics``. ``m``
    defaults to the number of metrics actually tested.
    """
    children = np.random.SeedSequence(seed).spawn(len(metrics))
    results = []
    for name, child in zip(metrics, children):
        t = [row[name] for row in top if row.get(name) is not None]
        b = [row[name] for row in bottom if row.get(name) is not None]
        if not t or not b:
            warnings.warn(f"metric {name!r} has no values in one group; skipped", UserWarning, stacklevel=2)
            continue
        results.append(bootstrap_test(t, b, n_iter, child, metric=name, alpha=alpha, threads=threads))
    m = len(results) if m is None else m
    if m < 1 and results:
        raise ValueError("m must be at least 1")
    return [replace(r, passes_bonferroni=r.p_value < alpha / m) for r in results]


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks.

    >>> spearman_rho([1, 2, 3, 4], [2, 1, 4, 3])
    0.6
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape:
        raise ValueError("x and y differ in length")
    if xa.size < 2:
        raise ValueError("need at least two observations")
    rx, ry = _average_ranks(xa), _average_ranks(ya)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        raise ValueError("correlation undefined for a constant input")
    rho = float(rx @ ry) / denom
    return max(-1.0, min(1.0, round(rho, 15)))
