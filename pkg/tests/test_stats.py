import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forecastskill.stats import (
    Direction,
    bonferroni,
    bootstrap_test,
    compare_groups,
    p_arrows,
    permutation_test_exact,
    spearman_rho,
)


# ---------------------------------------------------------------------------
# bootstrap


def test_identical_groups_not_significant():
    vals = [0.1, 0.4, 0.2, 0.9, 0.5, 0.3]
    res = bootstrap_test(vals, vals, n_iter=2000, seed=1)
    assert res.direction is Direction.EQUAL
    assert res.p_value > 0.9
    assert res.arrows == ""


def test_constant_separated_groups():
    res = bootstrap_test([1.0] * 50, [0.0] * 50, n_iter=1000, seed=0)
    assert res.p_value < 0.001
    assert res.direction is Direction.TOP_HIGHER
    assert res.arrows == "↑↑↑"


def test_shift_agrees_with_exact_permutation():
    rng = np.random.default_rng(3)
    x = rng.normal(1.0, 1.0, 5)
    y = rng.normal(0.0, 1.0, 5)
    exact = permutation_test_exact(x, y)
    boot = bootstrap_test(x, y, n_iter=10000, seed=2).p_value
    # both tests answer the same question on a tiny sample; they agree loosely
    assert abs(exact - boot) < 0.1


def test_permutation_exact_oracle():
    # x = [1, 2], y = [3, 4]: only the two extreme splits reach |diff| = 2
    assert permutation_test_exact([1, 2], [3, 4]) == pytest.approx(2 / 6)
    assert permutation_test_exact([1, 1], [1, 1]) == 1.0


def test_bootstrap_input_checks():
    with pytest.raises(ValueError):
        bootstrap_test([], [1.0])
    with pytest.raises(ValueError):
        bootstrap_test([1.0], [1.0], n_iter=999)


def test_thread_count_does_not_change_result():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=40), rng.normal(0.3, 1, size=35)
    one = bootstrap_test(x, y, n_iter=5000, seed=7, threads=1)
    many = bootstrap_test(x, y, n_iter=5000, seed=7, threads=6)
    assert one == many


def test_seed_changes_draws():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=15), rng.normal(0.4, 1, size=15)
    ps = {bootstrap_test(x, y, n_iter=1000, seed=s).p_value for s in range(5)}
    assert len(ps) > 1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=15),
       st.lists(st.floats(-10, 10), min_size=1, max_size=15),
       st.randoms(use_true_random=False))
def test_bootstrap_permutation_invariant(x, y, rnd):
    xs, ys = list(x), list(y)
    rnd.shuffle(xs)
    rnd.shuffle(ys)
    a = bootstrap_test(x, y, n_iter=1000, seed=4)
    b = bootstrap_test(xs, ys, n_iter=1000, seed=4)
    assert a.p_value == b.p_value
    assert 0.0 <= a.p_value <= 1.0


# ---------------------------------------------------------------------------
# Bonferroni and group comparison


def test_bonferroni_examples():
    assert bonferroni({"a": 0.001, "b": 0.002}, m=30) == {"a": True, "b": False}
    assert bonferroni({"a": 0.02, "b": 0.03}) == {"a": True, "b": False}
    with pytest.raises(ValueError):
        bonferroni({"a": 0.01}, m=0)


def test_p_arrows():
    assert p_arrows(0.0005, Direction.BOTTOM_HIGHER) == "↓↓↓"
    assert p_arrows(0.005, Direction.TOP_HIGHER) == "↑↑"
    assert p_arrows(0.04, Direction.TOP_HIGHER) == "↑"
    assert p_arrows(0.2, Direction.TOP_HIGHER) == ""


def test_compare_groups_skips_missing_and_counts_m():
    top = [{"a": 1.0, "b": None}, {"a": 1.2, "b": None}]
    bottom = [{"a": 0.0, "b": 2.0}, {"a": 0.1, "b": 3.0}]
    with pytest.warns(UserWarning, match="'b'"):
        res = compare_groups(top, bottom, ["a", "b"], n_iter=1000, seed=0)
    assert [r.metric for r in res] == ["a"]
    # m defaults to one tested metric
    assert res[0].passes_bonferroni == (res[0].p_value < 0.05)


def test_compare_groups_deterministic_and_thread_free():
    rng = np.random.default_rng(5)
    top = [{"a": float(v), "b": float(w)} for v, w in rng.normal(size=(20, 2))]
    bottom = [{"a": float(v), "b": float(w)} for v, w in rng.normal(0.5, 1, size=(20, 2))]
    r1 = compare_groups(top, bottom, ["a", "b"], n_iter=3000, seed=11)
    r2 = compare_groups(top, bottom, ["a", "b"], n_iter=3000, seed=11, threads=4)
    assert r1 == r2


# ---------------------------------------------------------------------------
# Spearman


def test_spearman_examples():
    assert spearman_rho([1, 2, 3, 4], [2, 1, 4, 3]) == 0.6
    assert spearman_rho([1, 2, 3], [3, 2, 1]) == -1.0
    assert spearman_rho([1, 2, 2, 3], [1, 2, 2, 3]) == 1.0
    with pytest.raises(ValueError):
        spearman_rho([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman_rho([1], [1])


def ranks_oracle(v):
    # average rank by direct counting
    return [sum(w < x for w in v) + (sum(w == x for w in v) + 1) / 2 for x in v]


@settings(max_examples=80)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=3, max_size=25))
def test_spearman_matches_rank_oracle(pairs):
    x, y = map(list, zip(*pairs))
    rx, ry = np.array(ranks_oracle(x)), np.array(ranks_oracle(y))
    if rx.std() == 0 or ry.std() == 0:
        return
    expected = float(np.corrcoef(rx, ry)[0, 1])
    assert spearman_rho(x, y) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=60)
@given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=20, unique=True),
       st.lists(st.integers(-1000, 1000), min_size=3, max_size=20, unique=True))
def test_spearman_properties(x, y):
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]
    rho = spearman_rho(x, y)
    assert -1.0 <= rho <= 1.0
    assert rho == pytest.approx(spearman_rho(y, x), abs=1e-12)
    # strictly monotone transforms leave ranks unchanged
    assert spearman_rho([v ** 3 for v in x], y) == pytest.approx(rho, abs=1e-12)
    assert spearman_rho(x, x) == 1.0
