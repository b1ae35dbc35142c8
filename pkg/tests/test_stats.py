import itertools
import math

import numpy as np
import pytest
from scipy import stats as sps
from hypothesis import given, settings, strategies as st

from fingerlab.errors import InvalidArgument, UndefinedTest
from fingerlab.patient import PatientProfile
from fingerlab.stats.nonparametric import friedman, kruskal_wallis, wilcoxon_rank_sum, wilcoxon_signed_rank
from fingerlab.stats.randomize import (Tallies, assignment_probabilities, covariate_levels, minimization_randomize,
                                       rank_probabilities)
from fingerlab.stats.regression import simple_linreg, timepoint_effect, within_anova


# brute-force references: enumerate every relabelling under the null


def brute_signed_rank(d):
    d = np.asarray(d, dtype=float)
    d = d[d != 0]
    r = sps.rankdata(np.abs(d))
    w = r[d > 0].sum()
    sums = [sum(r[i] for i in range(len(d)) if s[i]) for s in itertools.product((0, 1), repeat=len(d))]
    sums = np.array(sums)
    up, lo = np.mean(sums >= w - 1e-9), np.mean(sums <= w + 1e-9)
    return {"greater": up, "less": lo, "two-sided": min(1.0, 2 * min(up, lo))}


def brute_rank_sum(a, b):
    pooled = np.concatenate([a, b]).astype(float)
    r = sps.rankdata(pooled)
    w = r[:len(a)].sum()
    sums = np.array([r[list(c)].sum() for c in itertools.combinations(range(len(pooled)), len(a))])
    up, lo = np.mean(sums >= w - 1e-9), np.mean(sums <= w + 1e-9)
    return {"greater": up, "less": lo, "two-sided": min(1.0, 2 * min(up, lo))}


def test_signed_rank_three_positive():
    res = wilcoxon_signed_rank([1, 2, 3], "greater")
    assert res.statistic == 6 and res.exact
    assert res.p_value == pytest.approx(0.125, abs=1e-12)


def test_signed_rank_symmetric_is_one():
    assert wilcoxon_signed_rank([1, -1]).p_value == 1.0


def test_signed_rank_all_zero_undefined():
    with pytest.raises(UndefinedTest):
        wilcoxon_signed_rank([0, 0, 0])


@settings(max_examples=60, deadline=None)
@given(d=st.lists(st.integers(-4, 4), min_size=1, max_size=8), alt=st.sampled_from(["greater", "less", "two-sided"]))
def test_signed_rank_matches_enumeration(d, alt):
    if not any(d):
        return
    assert wilcoxon_signed_rank(d, alt).p_value == pytest.approx(brute_signed_rank(d)[alt], abs=1e-12)


def test_rank_sum_small_example():
    res = wilcoxon_rank_sum([1, 2], [3, 4], "less")
    assert res.p_value == pytest.approx(1 / 6, abs=1e-12)
    assert wilcoxon_rank_sum([3, 4], [1, 2], "greater").p_value == pytest.approx(1 / 6, abs=1e-12)


def test_rank_sum_identical_samples():
    assert wilcoxon_rank_sum([1, 2, 3], [1, 2, 3]).p_value == 1.0


@settings(max_examples=60, deadline=None)
@given(a=st.lists(st.integers(0, 5), min_size=1, max_size=5), b=st.lists(st.integers(0, 5), min_size=1, max_size=4),
       alt=st.sampled_from(["greater", "less", "two-sided"]))
def test_rank_sum_matches_enumeration(a, b, alt):
    assert wilcoxon_rank_sum(a, b, alt).p_value == pytest.approx(brute_rank_sum(a, b)[alt], abs=1e-12)


def test_rank_sum_exact_agrees_with_scipy():
    g = np.random.default_rng(0)
    a, b = g.normal(0, 1, 7), g.normal(0.5, 1, 6)
    ref = sps.mannwhitneyu(a, b, alternative="two-sided", method="exact").pvalue
    assert wilcoxon_rank_sum(a, b).p_value == pytest.approx(ref, abs=1e-12)


def test_signed_rank_exact_agrees_with_scipy():
    d = np.random.default_rng(1).normal(0.3, 1, 12)
    ref = sps.wilcoxon(d, alternative="greater", method="exact").pvalue
    assert wilcoxon_signed_rank(d, "greater").p_value == pytest.approx(ref, abs=1e-12)


def test_rank_sum_detects_shift():
    hits = 0
    for s in range(200):
        g = np.random.default_rng(s)
        hits += wilcoxon_rank_sum(g.normal(0, 1, 15), g.normal(2, 1, 15)).p_value < 0.05
    assert hits / 200 >= 0.95


def test_signed_rank_null_type_one_error():
    g = np.random.default_rng(5)
    rej = np.mean([wilcoxon_signed_rank(g.normal(0, 1, 20)).p_value < 0.05 for _ in range(10_000)])
    assert rej == pytest.approx(0.05, abs=0.02)


@pytest.mark.parametrize("n", [25, 26])
def test_signed_rank_exact_and_normal_agree_at_handoff(n):
    g = np.random.default_rng(n)
    for _ in range(30):
        d = g.normal(0.2, 1, n)
        ex = wilcoxon_signed_rank(d, exact=True).p_value
        ap = wilcoxon_signed_rank(d, exact=False).p_value
        assert abs(ex - ap) < 0.01


@pytest.mark.parametrize("n", [12, 13])
def test_rank_sum_exact_and_normal_agree_at_handoff(n):
    g = np.random.default_rng(n)
    for _ in range(30):
        a, b = g.normal(0, 1, n), g.normal(0.5, 1, n)
        assert abs(wilcoxon_rank_sum(a, b, exact=True).p_value - wilcoxon_rank_sum(a, b, exact=False).p_value) < 0.01


def test_kruskal_wallis_hand_value():
    res = kruskal_wallis([[1, 2], [3, 4], [5, 6]])
    assert res.statistic == pytest.approx(32 / 7, abs=1e-12)
    assert res.df == 2
    assert res.p_value == pytest.approx(math.exp(-16 / 7), abs=1e-12)


def test_kruskal_wallis_identical_groups():
    res = kruskal_wallis([[1, 2, 3], [1, 2, 3], [1, 2, 3]])
    assert res.statistic == pytest.approx(0.0, abs=1e-12) and res.p_value == pytest.approx(1.0)
    with pytest.raises(UndefinedTest):
        kruskal_wallis([[2, 2], [2, 2]])
    with pytest.raises(InvalidArgument):
        kruskal_wallis([[1, 2]])


def test_two_group_kruskal_wallis_is_squared_rank_sum_z():
    g = np.random.default_rng(3)
    a, b = np.round(g.normal(0, 2, 20)), np.round(g.normal(1, 2, 23))
    h = kruskal_wallis([a, b]).statistic
    z = wilcoxon_rank_sum(a, b, exact=False, continuity=False).z
    assert h == pytest.approx(z * z, rel=1e-10)
    assert h == pytest.approx(sps.kruskal(a, b).statistic, rel=1e-10)


def test_friedman_perfect_ranking():
    m = np.tile([1.0, 2.0, 3.0], (10, 1))
    res = friedman(m)
    assert res.statistic == pytest.approx(20.0, abs=1e-12)
    assert res.p_value < 0.001


def test_friedman_identical_treatments():
    assert friedman(np.ones((5, 3))).statistic == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), perm=st.permutations([0, 1, 2, 3]))
def test_friedman_label_invariance(seed, perm):
    m = np.round(np.random.default_rng(seed).normal(0, 1, (8, 4)), 1)
    a, b = friedman(m), friedman(m[:, list(perm)])
    assert a.statistic == pytest.approx(b.statistic, rel=1e-12)
    assert a.p_value == pytest.approx(b.p_value, rel=1e-12)


def test_friedman_matches_scipy():
    m = np.round(np.random.default_rng(4).normal(0, 1, (12, 3)), 1)
    assert friedman(m).statistic == pytest.approx(sps.friedmanchisquare(*m.T).statistic, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_rank_tests_invariant_under_monotone_transform(seed):
    g = np.random.default_rng(seed)
    a, b, c = g.normal(0, 1, 6), g.normal(0.5, 1, 7), g.normal(-0.5, 1, 5)
    f = np.exp
    assert wilcoxon_rank_sum(a, b).p_value == wilcoxon_rank_sum(f(a), f(b)).p_value
    assert kruskal_wallis([a, b, c]).statistic == pytest.approx(kruskal_wallis([f(a), f(b), f(c)]).statistic)
    m = g.normal(0, 1, (6, 3))
    assert friedman(m).statistic == pytest.approx(friedman(f(m)).statistic)
    # a signed-rank transform must keep signs, so use an odd monotone map
    d = g.normal(0.2, 1, 9)
    assert wilcoxon_signed_rank(d).p_value == wilcoxon_signed_rank(d ** 3).p_value


def test_linreg_exact_line():
    fit = simple_linreg([0, 1, 2, 3], [1, 3, 5, 7])
    assert fit.slope == pytest.approx(2.0) and fit.intercept == pytest.approx(1.0)
    assert fit.r2 == 1.0 and fit.df == 2
    with pytest.raises(UndefinedTest):
        simple_linreg([1, 1, 1], [1, 2, 3])


def test_linreg_matches_scipy():
    g = np.random.default_rng(8)
    x = g.normal(0, 1, 17)
    y = -0.8 * x + g.normal(0, 1, 17)
    ref = sps.linregress(x, y)
    fit = simple_linreg(x, y)
    assert fit.slope == pytest.approx(ref.slope) and fit.p_value == pytest.approx(ref.pvalue)
    assert fit.r2 == pytest.approx(ref.rvalue ** 2)
    assert fit.slope < 0


def test_linreg_null_mean_r2():
    n = 10
    g = np.random.default_rng(9)
    r2 = [simple_linreg(g.normal(size=n), g.normal(size=n)).r2 for _ in range(4000)]
    # R^2 ~ Beta(1/2, (n-2)/2) under the null; its sd is about 0.1, so the SEM is 0.0016
    assert np.mean(r2) == pytest.approx(1 / (n - 1), abs=0.006)


def test_within_anova_detects_time_effect():
    g = np.random.default_rng(2)
    n = 30
    groups = np.array(["a", "b", "c"] * 10)
    y = g.normal(0, 1, (n, 1)) + np.array([0.0, 1.0, 2.0]) + g.normal(0, 0.5, (n, 3))
    res = within_anova(y, groups)
    assert res.p_time < 1e-6
    assert res.p_interaction > 0.001
    assert (res.df_time, res.df_interaction, res.df_resid) == (2, 4, 54)


def test_timepoint_effect_routes_on_normality():
    g = np.random.default_rng(6)
    groups = np.array(["a", "b"] * 20)
    normal = g.normal(0, 1, (40, 3))
    assert timepoint_effect(normal, groups)[0] == "anova"
    skewed = g.exponential(1, (40, 3)) ** 3
    assert timepoint_effect(skewed, groups)[0] == "friedman"


def test_first_participant_uniform():
    probs = assignment_probabilities(Tallies().imbalance({"bbt": 0, "age": 1}))
    assert np.allclose(probs, 1 / 3)


def test_single_covariate_biased_coin():
    t = Tallies(factors=("bbt",))
    t.counts["bbt"][1] = [5, 5, 4]
    probs = assignment_probabilities(t.imbalance({"bbt": 1}))
    assert probs == pytest.approx([0.1, 0.1, 0.8])


def test_one_third_coin_is_pure_randomization():
    assert np.allclose(rank_probabilities(3, 1 / 3), 1 / 3)
    assert np.allclose(assignment_probabilities([0, 3, 7], 1 / 3), 1 / 3)
    with pytest.raises(InvalidArgument):
        rank_probabilities(3, 1.5)


def test_minimization_records_assignment():
    t = Tallies()
    prof = PatientProfile(age=70, baseline_bbt=5)
    g = minimization_randomize(prof, t, np.random.default_rng(0))
    lev = covariate_levels(prof)
    assert lev == {"bbt": 0, "age": 2}
    j = t.groups.index(g)
    assert t.counts["bbt"][0, j] == 1 and t.counts["age"][2, j] == 1


def _balanced_fraction(p_best, n_seeds=300, n=45):
    from fingerlab.patient import generate_stroke_cohort
    ok = 0
    for s in range(n_seeds):
        t = Tallies()
        g = np.random.default_rng(s)
        for prof in generate_stroke_cohort(n, s):
            minimization_randomize(prof, t, g, p_best)
        ok += all(int(row.max() - row.min()) <= 2 for c in t.counts.values() for row in c)
    return ok / n_seeds


@pytest.mark.xfail(strict=True, reason="a 0.8 biased coin leaves about a third of strata off by 3 or more")
def test_minimization_stratum_balance_at_default_coin():
    assert _balanced_fraction(0.8) >= 0.95


def test_deterministic_minimization_keeps_strata_balanced():
    assert _balanced_fraction(1.0) >= 0.95
