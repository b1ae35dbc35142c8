"""Simple linear regression and the normal-data repeated-measures path."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from ..errors import InvalidArgument, UndefinedTest
from .nonparametric import TestResult, friedman


@dataclass(frozen=True)
class LinregResult:
    slope: float
    intercept: float
    r2: float
    p_value: float
    n: int

    @property
    def df(self) -> int:
        return self.n - 2


def simple_linreg(x, y) -> LinregResult:
    """Ordinary least squares ``y = slope*x + intercept`` with a t-test on the slope."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise InvalidArgument("x and y differ in length")
    n = x.size
    if n < 3:
        raise InvalidArgument("need at least 3 points")
    xc, yc = x - x.mean(), y - y.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise UndefinedTest("x has zero variance")
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    syy = float(yc @ yc)
    resid = y - (slope * x + intercept)
    sse = float(resid @ resid)
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    if sse <= 1e-24 * max(syy, 1.0):
        p = 0.0 if syy > 0 else 1.0
    else:
        se = math.sqrt(sse / (n - 2) / sxx)
        p = float(2 * sps.t.sf(abs(slope / se), n - 2))
    return LinregResult(slope, intercept, r2, p, n)


def is_normal(x, level: float = 5.0) -> bool:
    """Anderson-Darling normality gate at ``level`` percent significance."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 8 or np.ptp(x) == 0:
        return False
    res = sps.anderson(x, "norm")
    crit = dict(zip(res.significance_level, res.critical_values))[level]
    return bool(res.statistic < crit)


@dataclass(frozen=True)
class AnovaResult:
    f_time: float
    p_time: float
    f_interaction: float
    p_interaction: float
    df_time: int
    df_interaction: int
    df_resid: int


def within_anova(scores, groups) -> AnovaResult:
    """Two-way (timepoint x group) model with a per-participant intercept.

    ``scores`` is participants x timepoints.  Subtracting each participant's
    mean absorbs the intercepts (and the between-group main effect), leaving
    F tests for the timepoint effect and the group-by-timepoint interaction.
    """
    y = np.asarray(scores, dtype=float)
    g = np.asarray(groups)
    if y.ndim != 2 or y.shape[0] != g.size:
        raise InvalidArgument("scores must be participants x timepoints with one group per row")
    n, t = y.shape
    labels = sorted(set(g.tolist()))
    k = len(labels)
    if t < 2 or n - k < 1:
        raise InvalidArgument("too few participants or timepoints")
    yc = y - y.mean(axis=1, keepdims=True)
    time_mean = yc.mean(axis=0)
    ss_time = n * float(time_mean @ time_mean)
    cells = np.vstack([yc[g == lab].mean(axis=0) for lab in labels])
    sizes = np.array([(g == lab).sum() for lab in labels])
    ss_int = float(np.sum(sizes[:, None] * (cells - time_mean) ** 2))
    fitted = cells[[labels.index(v) for v in g.tolist()]]
    ss_res = float(np.sum((yc - fitted) ** 2))
    df_t, df_i, df_r = t - 1, (k - 1) * (t - 1), (n - k) * (t - 1)
    if ss_res <= 0:
        raise UndefinedTest("no residual variance")
    ms_res = ss_res / df_r
    f_t = ss_time / df_t / ms_res
    f_i = ss_int / df_i / ms_res if df_i else float("nan")
    p_i = float(sps.f.sf(f_i, df_i, df_r)) if df_i else float("nan")
    return AnovaResult(f_t, float(sps.f.sf(f_t, df_t, df_r)), f_i, p_i, df_t, df_i, df_r)


def timepoint_effect(scores, groups) -> tuple[str, object]:
    """Main effect of timepoint: ANOVA if every timepoint passes the normality gate, else Friedman."""
    y = np.asarray(scores, dtype=float)
    if all(is_normal(y[:, j]) for j in range(y.shape[1])):
        return "anova", within_anova(y, groups)
    return "friedman", friedman(y)


__all__ = ["LinregResult", "simple_linreg", "is_normal", "AnovaResult", "within_anova", "timepoint_effect",
           "TestResult"]
