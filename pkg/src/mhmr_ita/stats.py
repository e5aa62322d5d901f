"""Welch's t-test and the significance-star convention used in reports.

The two-sided p-value integrates the t density numerically (absolute
tolerance well below 1e-10) instead of relying on a closed-form CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import StatisticsError

# significance thresholds, strongest last
_STARS = ((0.1, "*"), (0.05, "**"), (0.01, "***"), (0.001, "****"))


def significance_stars(p: float) -> str:
    """Stars for a p-value: * <0.1, ** <0.05, *** <0.01, **** <0.001."""
    stars = ""
    for threshold, mark in _STARS:
        if p < threshold:
            stars = mark
    return stars


def _t_pdf(x: float, df: float) -> float:
    log_norm = math.lgamma((df + 1.0) / 2.0) - math.lgamma(df / 2.0) - 0.5 * math.log(df * math.pi)
    return math.exp(log_norm - ((df + 1.0) / 2.0) * math.log1p(x * x / df))


def student_t_sf(x: float, df: float) -> float:
    """P(T > x) for a t-distributed T, by numerical quadrature."""
    if df <= 0:
        raise StatisticsError(f"degrees of freedom must be positive, got {df}")
    if x < 0:
        return 1.0 - student_t_sf(-x, df)
    tail, _ = quad(_t_pdf, x, math.inf, args=(df,), epsabs=1e-13, limit=300)
    return min(max(tail, 0.0), 1.0)


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float

    @property
    def stars(self) -> str:
        return significance_stars(self.p)


def welch_t_test(a, b) -> WelchResult:
    """Welch's unequal-variance t statistic, Welch-Satterthwaite df, 2-sided p."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise StatisticsError("each sample needs at least 2 observations")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise StatisticsError("both samples are degenerate (zero variance)")
    sa = va / a.size
    sb = vb / b.size
    t = (a.mean() - b.mean()) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1))
    p = 2.0 * student_t_sf(abs(t), df)
    return WelchResult(t=float(t), df=float(df), p=min(p, 1.0))
