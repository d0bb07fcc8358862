"""Statistical tests for the benchmark harness.

Welch's t-test with Satterthwaite degrees of freedom, Holm-Bonferroni
step-down, TOST equivalence testing, and Cohen's d. The Student-t CDF is
computed from a continued-fraction regularized incomplete beta so the
package needs no statistics dependency; tests compare it against a
reference implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CF_EPS = 1e-16
_CF_MAX_ITER = 500
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Lentz continued fraction for the regularized incomplete beta."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= _CF_EPS:
            return h
    raise RuntimeError("incomplete beta continued fraction failed to converge")


def _incbeta(a: float, b: float, x: float, xc: float) -> float:
    """I_x(a, b) given both x and its exact complement xc = 1 - x."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if xc <= 0.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(xc)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, xc) / b


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) to near machine precision."""
    return _incbeta(a, b, x, 1.0 - x)


def student_t_cdf(t: float, df: float) -> float:
    """P(T <= t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    # Both arguments computed directly so neither loses precision to
    # cancellation for tiny or huge t.
    x = df / (df + t * t)
    xc = t * t / (df + t * t)
    tail = 0.5 * _incbeta(df / 2.0, 0.5, x, xc)
    return tail if t < 0 else 1.0 - tail


def student_t_sf(t: float, df: float) -> float:
    return 1.0 - student_t_cdf(t, df)


def two_sided_p(t: float, df: float) -> float:
    x = df / (df + t * t)
    xc = t * t / (df + t * t)
    return _incbeta(df / 2.0, 0.5, x, xc)


def student_t_quantile(q: float, df: float) -> float:
    """Inverse CDF by bisection (plenty for test statistics)."""
    if not (0.0 < q < 1.0):
        raise ValueError("quantile level must lie in (0, 1)")
    lo, hi = -1e6, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _moments(sample) -> tuple[float, float, int]:
    arr = np.asarray(sample, dtype=float)
    if arr.ndim != 1 or len(arr) < 2:
        raise ValueError("samples need at least two observations")
    return float(arr.mean()), float(arr.var(ddof=1)), len(arr)


@dataclass
class WelchResult:
    t: float
    df: float
    p: float
    degenerate: bool = False


def _welch_parts(a, b) -> tuple[float, float, float, bool]:
    ma, va, na = _moments(a)
    mb, vb, nb = _moments(b)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        return ma - mb, 0.0, float(na + nb - 2), True
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return ma - mb, math.sqrt(se2), df, False


def welch_t(a, b) -> WelchResult:
    """Two-sided Welch's t-test (unequal variances assumed).

    Zero-variance pairs are flagged and resolved by convention: p = 1 when
    the means agree, p = 0 otherwise.
    """
    diff, se, df, degenerate = _welch_parts(a, b)
    if degenerate:
        if diff == 0.0:
            return WelchResult(t=0.0, df=df, p=1.0, degenerate=True)
        return WelchResult(t=math.copysign(math.inf, diff), df=df, p=0.0, degenerate=True)
    t = diff / se
    return WelchResult(t=t, df=df, p=two_sided_p(t, df))


def holm_bonferroni(p_values, alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Step-down Holm procedure.

    Returns (reject flags, adjusted p-values) in the input order. Adjusted
    p-values are the running maximum of p_(i) * (m - i + 1) along the
    sorted order, so rejections always form a prefix of that order.
    """
    p = np.asarray(p_values, dtype=float)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted_sorted = np.minimum.accumulate(np.ones(m))  # placeholder
    scaled = p[order] * (m - np.arange(m))
    adjusted_sorted = np.minimum(np.maximum.accumulate(scaled), 1.0)
    reject_sorted = np.zeros(m, dtype=bool)
    for i in range(m):
        if p[order[i]] <= alpha / (m - i):
            reject_sorted[i] = True
        else:
            break
    reject = np.zeros(m, dtype=bool)
    adjusted = np.zeros(m)
    reject[order] = reject_sorted
    adjusted[order] = adjusted_sorted
    return reject, adjusted


@dataclass
class TostResult:
    p: float
    equivalent: bool
    ci_low: float
    ci_high: float
    mean_diff: float
    df: float
    degenerate: bool = False


def _tost_from_parts(diff, se, df, margin, alpha, degenerate=False) -> TostResult:
    if margin <= 0:
        raise ValueError("equivalence margin must be positive")
    if degenerate or se == 0.0:
        inside = abs(diff) < margin
        return TostResult(
            p=0.0 if inside else 1.0,
            equivalent=inside,
            ci_low=diff,
            ci_high=diff,
            mean_diff=diff,
            df=df,
            degenerate=True,
        )
    t_upper = (diff - margin) / se
    t_lower = (diff + margin) / se
    p_upper = student_t_cdf(t_upper, df)  # H0: diff >= +margin
    p_lower = student_t_sf(t_lower, df)  # H0: diff <= -margin
    p = max(p_upper, p_lower)
    crit = student_t_quantile(1.0 - alpha, df)
    ci_low, ci_high = diff - crit * se, diff + crit * se
    return TostResult(
        p=p,
        equivalent=bool(p <= alpha),
        ci_low=ci_low,
        ci_high=ci_high,
        mean_diff=diff,
        df=df,
    )


def tost(a, b, margin: float, alpha: float = 0.05) -> TostResult:
    """Two one-sided Welch tests for equivalence within +/- margin.

    Equivalence holds iff both one-sided tests reject, which coincides
    with the (1 - 2 alpha) confidence interval lying inside the margin.
    """
    diff, se, df, degenerate = _welch_parts(a, b)
    return _tost_from_parts(diff, se, df, margin, alpha, degenerate)


def tost_from_summary(mean_diff: float, se: float, df: float, margin: float, alpha: float = 0.05) -> TostResult:
    """TOST from summary statistics (mean difference, standard error, df)."""
    if se < 0 or df <= 0:
        raise ValueError("se must be nonnegative and df positive")
    return _tost_from_parts(mean_diff, se, df, margin, alpha, degenerate=se == 0.0)


def cohens_d(a, b) -> float:
    """Mean difference over the pooled standard deviation."""
    ma, va, na = _moments(a)
    mb, vb, nb = _moments(b)
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    if pooled == 0.0:
        raise ValueError("zero pooled standard deviation")
    return (ma - mb) / pooled
