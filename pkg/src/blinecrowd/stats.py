"""Scalar statistics used by the evaluation: mean/SEM, paired t-test,
Mann-Whitney U, Pearson correlation.

Distribution tails are computed in-repo so the core carries no
statistics dependency:

* normal tail via ``math.erfc``;
* Student-t tail via the regularized incomplete beta function,
  evaluated with the standard continued fraction (modified Lentz);
* chi-square tail via the regularized incomplete gamma function
  (power series for x < a+1, continued fraction otherwise).

All two-sided p-values are exact tail doublings of these functions.
"""

from __future__ import annotations

import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

from .errors import Empty, TooFew, ZeroVariance

_FPMIN = 1e-300
_EPS = 3e-14
_MAX_ITER = 300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified
    Lentz iteration)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
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
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _gamma_p_series(a: float, x: float) -> float:
    ap = a
    total = 1.0 / a
    term = total
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError("incomplete gamma series did not converge")


def _gamma_q_cf(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if x < 0.0 or a <= 0.0:
        raise ValueError("gamma_q requires x >= 0 and a > 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_cf(a, x)


def normal_sf(z: float) -> float:
    """Standard normal upper tail, exact via erfc."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def student_t_two_sided(t: float, df: int) -> float:
    """Two-sided Student-t p-value: I_{df/(df+t^2)}(df/2, 1/2)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    return betainc_reg(df / 2.0, 0.5, x)


def chi_square_sf(x: float, df: int) -> float:
    """Chi-square upper tail Q(df/2, x/2)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    return gamma_q(df / 2.0, x / 2.0)


def mean_sem(values: Sequence[float]) -> Tuple[float, Optional[float]]:
    """Sample mean and standard error of the mean (n-1 denominator in
    the standard deviation). SEM is None for a single value."""
    n = len(values)
    if n == 0:
        raise Empty("mean of an empty list")
    mean = sum(values) / n
    if n == 1:
        return (mean, None)
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return (mean, math.sqrt(var) / math.sqrt(n))


class TTestResult(NamedTuple):
    t: float
    p_value: float
    df: int


def paired_t_test(differences: Sequence[float]) -> TTestResult:
    """One-sample t-test on paired differences.

    t = mean(d) / (sd(d)/sqrt(n)), df = n-1, two-sided p from the
    Student-t tail above.
    """
    n = len(differences)
    if n < 2:
        raise TooFew("paired t-test needs at least 2 differences")
    mean, sem = mean_sem(differences)
    if sem == 0.0:
        raise ZeroVariance("all differences identical; t undefined")
    t = mean / sem
    return TTestResult(t=t, p_value=student_t_two_sided(t, n - 1), df=n - 1)


class PearsonResult(NamedTuple):
    r: float
    p_value: float


def pearson_r(x: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Sample Pearson correlation; p via the t-transform with n-2 df.
    |r| = 1 yields p = 0 (the t statistic diverges)."""
    n = len(x)
    if n != len(y):
        raise ValueError("samples must have equal length")
    if n < 3:
        raise TooFew("pearson r needs at least 3 pairs")
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((v - mx) ** 2 for v in x)
    syy = sum((v - my) ** 2 for v in y)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("constant sample; correlation undefined")
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) >= 1.0:
        return PearsonResult(r=r, p_value=0.0)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return PearsonResult(r=r, p_value=student_t_two_sided(t, n - 2))


class MannWhitneyResult(NamedTuple):
    u: float
    p_value: float
    method: str


#: At or below this product of sample sizes the exact permutation
#: distribution is computed; above it, the normal approximation.
EXACT_MWU_LIMIT = 400


def _midranks(pooled: Sequence[float]) -> List[float]:
    order = sorted(range(len(pooled)), key=pooled.__getitem__)
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def _exact_mwu_p(doubled_ranks: List[int], n1: int, u1: float) -> float:
    """Exact two-sided p by the full permutation distribution of U.

    Counts, for every way of assigning ``n1`` of the pooled (doubled,
    hence integer) midranks to the first sample, how often U deviates
    from its mean n1*n2/2 by at least the observed deviation. The count
    runs over subset rank-sums via dynamic programming, which enumerates
    the same distribution as brute force without materializing it.
    """
    n = len(doubled_ranks)
    n2 = n - n1
    # ways[k] maps doubled rank-sum -> number of k-subsets achieving it
    ways: List[dict] = [{} for _ in range(n1 + 1)]
    ways[0][0] = 1
    for r in doubled_ranks:
        for k in range(min(n1, n) - 1, -1, -1):
            bucket = ways[k]
            if not bucket:
                continue
            target = ways[k + 1]
            for s, count in bucket.items():
                target[s + r] = target.get(s + r, 0) + count
    # doubled U for rank-sum s: 2*U1 = s - n1*(n1+1); doubled mean: n1*n2
    dev_obs = abs(2.0 * u1 - n1 * n2)
    extreme = 0
    total = 0
    for s, count in ways[n1].items():
        total += count
        if abs(s - n1 * (n1 + 1) - n1 * n2) >= dev_obs - 1e-9:
            extreme += count
    return extreme / total


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float]) -> MannWhitneyResult:
    """Mann-Whitney U test with midrank tie handling.

    U is reported for the first sample: the number of (a, b) pairs with
    a > b, counting ties as one half. Exact two-sided p by permutation
    enumeration when len(a)*len(b) <= 400, else the normal approximation
    with tie correction and 0.5 continuity correction (applied to the
    larger of the two U statistics).
    """
    n1 = len(sample_a)
    n2 = len(sample_b)
    if n1 == 0 or n2 == 0:
        raise Empty("both samples must be non-empty")
    pooled = list(sample_a) + list(sample_b)
    ranks = _midranks(pooled)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0

    if n1 * n2 <= EXACT_MWU_LIMIT:
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_mwu_p(doubled, n1, u1)
        return MannWhitneyResult(u=u1, p_value=p, method="exact")

    # Tie correction: sigma^2 = n1*n2/12 * ((n+1) - sum(t^3-t)/(n*(n-1)))
    n = n1 + n2
    tie_sum = 0
    i = 0
    sorted_ranks = sorted(ranks)
    while i < n:
        j = i
        while j + 1 < n and sorted_ranks[j + 1] == sorted_ranks[i]:
            j += 1
        t = j - i + 1
        tie_sum += t ** 3 - t
        i = j + 1
    sigma2 = n1 * n2 / 12.0 * ((n + 1) - tie_sum / (n * (n - 1)))
    if sigma2 <= 0.0:
        return MannWhitneyResult(u=u1, p_value=1.0, method="asymptotic")
    mu = n1 * n2 / 2.0
    u_big = max(u1, n1 * n2 - u1)
    z = (u_big - mu - 0.5) / math.sqrt(sigma2)
    p = min(1.0, 2.0 * normal_sf(z))
    return MannWhitneyResult(u=u1, p_value=p, method="asymptotic")
