"""Rank tests: Wilcoxon signed-rank and rank-sum, Kruskal-Wallis, Friedman.

Exact null distributions are built by dynamic programming over doubled
midranks, so they stay exact in the presence of ties.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from ..errors import InvalidArgument, UndefinedTest

ALTERNATIVES = ("two-sided", "greater", "less")
SIGNED_RANK_EXACT_MAX = 25
RANK_SUM_EXACT_MAX = 12


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: int
    df: int | None = None
    exact: bool = False
    alternative: str = "two-sided"
    z: float | None = None

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise InvalidArgument(f"p-value {self.p_value} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def midranks(x) -> np.ndarray:
    return sps.rankdata(np.asarray(x, dtype=float), method="average")


def tie_sizes(x) -> np.ndarray:
    _, counts = np.unique(np.asarray(x, dtype=float), return_counts=True)
    return counts


def _check_alternative(alternative: str) -> None:
    if alternative not in ALTERNATIVES:
        raise InvalidArgument(f"alternative must be one of {ALTERNATIVES}")


def _tail_p(dist: dict[int, int], total: int, observed: int, alternative: str) -> float:
    """p-value from an integer-keyed count distribution."""
    upper = sum(c for k, c in dist.items() if k >= observed) / total
    lower = sum(c for k, c in dist.items() if k <= observed) / total
    if alternative == "greater":
        return upper
    if alternative == "less":
        return lower
    return min(1.0, 2.0 * min(upper, lower))


def _normal_p(z: float, alternative: str) -> float:
    if alternative == "greater":
        return float(sps.norm.sf(z))
    if alternative == "less":
        return float(sps.norm.cdf(z))
    return float(min(1.0, 2.0 * sps.norm.sf(abs(z))))


def _doubled(r: np.ndarray) -> np.ndarray:
    return np.rint(2.0 * r).astype(np.int64)


# ---------------------------------------------------------------- signed rank


def signed_rank_distribution(doubled_ranks) -> dict[int, int]:
    """Counts of each doubled positive-rank sum over all 2^n sign patterns."""
    counts = {0: 1}
    for r in doubled_ranks:
        nxt = dict(counts)
        for s, c in counts.items():
            nxt[s + int(r)] = nxt.get(s + int(r), 0) + c
        counts = nxt
    return counts


def wilcoxon_signed_rank(diffs, alternative: str = "two-sided", exact: bool | None = None,
                         continuity: bool = True) -> TestResult:
    """Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped.  The statistic ``W`` is the sum of the
    ranks of positive differences; ``alternative='greater'`` tests for a
    positive location shift.  The exact path enumerates sign patterns and
    is used by default for up to 25 nonzero differences; above that a
    tie-corrected normal approximation with continuity correction applies.
    """
    _check_alternative(alternative)
    d = np.asarray(diffs, dtype=float).ravel()
    if not np.all(np.isfinite(d)):
        raise InvalidArgument("differences must be finite")
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise UndefinedTest("all differences are zero")
    r = midranks(np.abs(d))
    w = float(r[d > 0].sum())
    use_exact = n <= SIGNED_RANK_EXACT_MAX if exact is None else exact
    if use_exact:
        dist = signed_rank_distribution(_doubled(r))
        p = _tail_p(dist, 2 ** n, int(round(2 * w)), alternative)
        return TestResult(w, p, "wilcoxon_signed_rank", n, None, True, alternative)
    mean = n * (n + 1) / 4.0
    t = tie_sizes(np.abs(d))
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t ** 3 - t)) / 48.0
    z = _z(w, mean, var, continuity, alternative)
    return TestResult(w, _normal_p(z, alternative), "wilcoxon_signed_rank", n, None, False, alternative, z)


def _z(stat: float, mean: float, var: float, continuity: bool, alternative: str) -> float:
    if var <= 0:
        raise UndefinedTest("null variance is zero")
    diff = stat - mean
    if continuity:
        if alternative == "greater":
            diff -= 0.5
        elif alternative == "less":
            diff += 0.5
        else:
            diff = math.copysign(max(abs(diff) - 0.5, 0.0), diff)
    return diff / math.sqrt(var)


# ---------------------------------------------------------------- rank sum


def rank_sum_distribution(doubled_ranks, m: int) -> dict[int, int]:
    """Counts of each doubled rank sum over all size-``m`` subsets."""
    layers = [dict() for _ in range(m + 1)]
    layers[0][0] = 1
    for r in doubled_ranks:
        r = int(r)
        for k in range(m, 0, -1):
            src = layers[k - 1]
            if not src:
                continue
            dst = layers[k]
            for s, c in src.items():
                dst[s + r] = dst.get(s + r, 0) + c
    return layers[m]


def wilcoxon_rank_sum(a, b, alternative: str = "two-sided", exact: bool | None = None,
                      continuity: bool = True) -> TestResult:
    """Wilcoxon rank-sum (Mann-Whitney) test.

    The statistic is the rank sum of ``a`` in the pooled sample;
    ``alternative='greater'`` means ``a`` tends to exceed ``b``.  Exact when
    the smaller sample has at most 12 observations, otherwise normal with
    tie and continuity corrections.
    """
    _check_alternative(alternative)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise InvalidArgument("both samples must be nonempty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidArgument("samples must be finite")
    na, nb = a.size, b.size
    big_n = na + nb
    r = midranks(np.concatenate([a, b]))
    w = float(r[:na].sum())
    use_exact = min(na, nb) <= RANK_SUM_EXACT_MAX if exact is None else exact
    if use_exact:
        d2 = _doubled(r)
        total = math.comb(big_n, na)
        if na <= nb:
            dist = rank_sum_distribution(d2, na)
            p = _tail_p(dist, total, int(round(2 * w)), alternative)
        else:
            # count on b: W_a = total_rank - W_b, so tails swap
            dist = rank_sum_distribution(d2, nb)
            flip = {"greater": "less", "less": "greater", "two-sided": "two-sided"}[alternative]
            p = _tail_p(dist, total, int(round(2 * (r.sum() - w))), flip)
        return TestResult(w, p, "wilcoxon_rank_sum", big_n, None, True, alternative)
    mean = na * (big_n + 1) / 2.0
    t = tie_sizes(r)
    var = na * nb / 12.0 * ((big_n + 1) - float(np.sum(t ** 3 - t)) / (big_n * (big_n - 1)))
    z = _z(w, mean, var, continuity, alternative)
    return TestResult(w, _normal_p(z, alternative), "wilcoxon_rank_sum", big_n, None, False, alternative, z)


# ---------------------------------------------------------------- k-sample


def kruskal_wallis(groups) -> TestResult:
    """Kruskal-Wallis H with tie correction and a chi-square reference."""
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise InvalidArgument("need at least two groups")
    if any(g.size == 0 for g in groups):
        raise InvalidArgument("groups must be nonempty")
    x = np.concatenate(groups)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("observations must be finite")
    big_n = x.size
    t = tie_sizes(x)
    correction = 1.0 - float(np.sum(t ** 3 - t)) / (big_n ** 3 - big_n) if big_n > 1 else 0.0
    if correction <= 0:
        raise UndefinedTest("all observations are identical")
    r = midranks(x)
    h = 0.0
    start = 0
    for g in groups:
        rs = r[start:start + g.size].sum()
        h += rs * rs / g.size
        start += g.size
    h = 12.0 / (big_n * (big_n + 1)) * h - 3.0 * (big_n + 1)
    h = max(h / correction, 0.0)
    df = len(groups) - 1
    return TestResult(h, float(sps.chi2.sf(h, df)), "kruskal_wallis", big_n, df, False)


def friedman(matrix) -> TestResult:
    """Friedman test on a blocks x treatments matrix, tie-corrected.

    Rows that are constant carry no ranking information; when every row is
    constant the statistic is 0 with p = 1.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise InvalidArgument("expected a blocks x treatments matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise InvalidArgument("need at least 2 blocks and 2 treatments")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("observations must be finite")
    ranks = np.apply_along_axis(midranks, 1, x)
    rj = ranks.sum(axis=0)
    ties = sum(float(np.sum(t ** 3 - t)) for t in (tie_sizes(row) for row in x))
    denom = 1.0 - ties / (n * (k ** 3 - k))
    num = 12.0 / (n * k * (k + 1)) * float(np.sum(rj ** 2)) - 3.0 * n * (k + 1)
    if denom <= 0:
        return TestResult(0.0, 1.0, "friedman", n, k - 1, False)
    chi = max(num / denom, 0.0)
    return TestResult(chi, float(sps.chi2.sf(chi, k - 1)), "friedman", n, k - 1, False)
