"""Nonparametric tests, effect sizes, quartile analysis, and the full
useful-versus-non-useful comparative study.

Rank tests use midranks for ties. Small samples get exact permutation
p-values (every assignment of the pooled values enumerated); larger samples
fall back to the usual approximations (normal with tie and continuity
correction for the U test, chi-square for Kruskal-Wallis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import norm as _norm
from scipy.stats import t as _student_t

from .errors import ContractError, DegenerateDataError

# Exact enumeration bounds: the U test is exact up to this pooled size, the
# Kruskal-Wallis test whenever the multinomial arrangement count stays small.
U_EXACT_MAX_N = 20
KW_EXACT_MAX_ARRANGEMENTS = 200_000

SIGNIFICANCE_LEVEL = 0.05

#: Conventional |d| bands for annotating effect sizes.
EFFECT_BANDS = ((0.8, "large"), (0.5, "medium"), (0.2, "small"), (0.0, "negligible"))


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    effect_size: Optional[float]
    method: str
    n1: int
    n2: int

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE_LEVEL


def effect_band(d: Optional[float]) -> str:
    if d is None:
        return "n/a"
    magnitude = abs(d)
    for threshold, name in EFFECT_BANDS:
        if magnitude >= threshold:
            return name
    return "negligible"


def midranks(values) -> list:
    """1-based ranks with ties sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def _tie_counts(values) -> list:
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return [c for c in counts.values() if c > 1]


def mann_whitney_u(a, b) -> TestResult:
    """Two-sided Mann-Whitney-Wilcoxon test.

    The statistic is U for the first sample. Exact permutation p when the
    pooled size is at most 20, otherwise a normal approximation with tie
    and continuity corrections. Cohen's d rides along as the effect size
    whenever it is computable.
    """
    a, b = list(a), list(b)
    n1, n2 = len(a), len(b)
    if n1 < 1 or n2 < 1:
        raise ContractError("mann_whitney_u needs at least one value per sample")
    pooled = a + b
    ranks = midranks(pooled)
    r1 = sum(ranks[:n1])
    u = r1 - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0

    n = n1 + n2
    if n <= U_EXACT_MAX_N:
        observed_dev = abs(u - mu)
        hits = 0
        total = 0
        base = n1 * (n1 + 1) / 2.0
        for combo in combinations(range(n), n1):
            u_perm = sum(ranks[i] for i in combo) - base
            total += 1
            if abs(u_perm - mu) >= observed_dev - 1e-12:
                hits += 1
        p = hits / total
        method = "mann-whitney-u-exact"
    else:
        tie_term = sum(t**3 - t for t in _tie_counts(pooled))
        sigma_sq = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
        if sigma_sq <= 0:
            p = 1.0
        else:
            dev = abs(u - mu)
            z = max(0.0, dev - 0.5) / math.sqrt(sigma_sq)
            p = min(1.0, 2.0 * float(_norm.sf(z)))
        method = "mann-whitney-u-normal"

    effect = None
    if n1 >= 2 and n2 >= 2:
        try:
            effect = cohens_d(a, b)
        except (ContractError, DegenerateDataError):
            effect = None
    return TestResult(
        statistic=u, p_value=p, effect_size=effect, method=method, n1=n1, n2=n2
    )


def _kw_h(rank_sums, sizes, n, correction) -> float:
    h = 12.0 / (n * (n + 1)) * sum(r * r / s for r, s in zip(rank_sums, sizes)) - 3 * (
        n + 1
    )
    return h / correction


def kruskal_wallis(groups) -> TestResult:
    """Kruskal-Wallis H across two or more groups (tie corrected).

    With few enough distinct arrangements the p-value is the exact
    permutation tail P(H >= observed); otherwise the chi-square
    approximation with k-1 degrees of freedom is used.
    """
    groups = [list(g) for g in groups]
    if len(groups) < 2:
        raise ContractError("kruskal_wallis needs at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ContractError("kruskal_wallis groups must be non-empty")
    sizes = [len(g) for g in groups]
    n = sum(sizes)
    pooled = [v for g in groups for v in g]
    ranks = midranks(pooled)

    tie_term = sum(t**3 - t for t in _tie_counts(pooled))
    correction = 1.0 - tie_term / (n**3 - n) if n > 1 else 1.0
    if correction <= 0:
        # every pooled value identical
        return TestResult(
            statistic=0.0,
            p_value=1.0,
            effect_size=None,
            method="kruskal-wallis-degenerate",
            n1=n,
            n2=len(groups),
        )

    bounds = []
    start = 0
    for s in sizes:
        bounds.append((start, start + s))
        start += s
    rank_sums = [sum(ranks[lo:hi]) for lo, hi in bounds]
    h_obs = _kw_h(rank_sums, sizes, n, correction)

    arrangements = _multinomial(n, sizes)
    if arrangements <= KW_EXACT_MAX_ARRANGEMENTS:
        hits = 0
        total = 0
        for sums in _enumerate_rank_sums(ranks, sizes):
            total += 1
            if _kw_h(sums, sizes, n, correction) >= h_obs - 1e-12:
                hits += 1
        p = hits / total
        method = "kruskal-wallis-exact"
    else:
        p = float(_chi2.sf(h_obs, len(groups) - 1))
        method = "kruskal-wallis-chi2"
    return TestResult(
        statistic=h_obs, p_value=p, effect_size=None, method=method, n1=n, n2=len(groups)
    )


def _multinomial(n, sizes) -> int:
    total = 1
    remaining = n
    for s in sizes[:-1]:
        total *= math.comb(remaining, s)
        remaining -= s
    return total


def _enumerate_rank_sums(ranks, sizes):
    """Yield rank-sum tuples for every assignment of the pooled ranks to
    groups of the given sizes."""

    def rec(available, remaining_sizes, acc):
        if len(remaining_sizes) == 1:
            yield acc + [sum(ranks[i] for i in available)]
            return
        size = remaining_sizes[0]
        for combo in combinations(available, size):
            chosen = set(combo)
            rest = [i for i in available if i not in chosen]
            yield from rec(rest, remaining_sizes[1:], acc + [sum(ranks[i] for i in combo)])

    yield from rec(list(range(len(ranks))), sizes, [])


def cohens_d(a, b) -> float:
    """Classic Cohen's d with (n1-1, n2-1) pooled-variance weighting; signed."""
    a, b = list(a), list(b)
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise ContractError("cohens_d needs at least two values per sample")
    mean1 = sum(a) / n1
    mean2 = sum(b) / n2
    var1 = sum((x - mean1) ** 2 for x in a) / (n1 - 1)
    var2 = sum((x - mean2) ** 2 for x in b) / (n2 - 1)
    pooled = math.sqrt(((n1 - 1) * var1 + (n2 - 1) * var2) / (n1 + n2 - 2))
    if pooled == 0:
        raise DegenerateDataError("pooled standard deviation is zero")
    return (mean1 - mean2) / pooled


def paired_t_test(a, b) -> TestResult:
    """Two-sided paired t-test on per-pair differences."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise ContractError("paired_t_test needs samples of equal length")
    n = len(a)
    if n < 2:
        raise ContractError("paired_t_test needs at least two pairs")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0:
        raise ContractError("paired differences have zero variance")
    t_stat = mean / math.sqrt(var / n)
    p = min(1.0, 2.0 * float(_student_t.sf(abs(t_stat), n - 1)))
    return TestResult(
        statistic=t_stat, p_value=p, effect_size=None, method="paired-t", n1=n, n2=n
    )


def _quantile_type7(sorted_values, q) -> float:
    n = len(sorted_values)
    h = (n - 1) * q
    lo = math.floor(h)
    frac = h - lo
    if lo + 1 < n:
        return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo])
    return float(sorted_values[lo])


def quartile_partition(values):
    """Split values into Q1..Q4 at the type-7 0.25/0.50/0.75 quantiles.

    Assignment is by <= threshold, so ties go to the lower quartile; the
    four parts are disjoint and cover every input value.
    """
    values = sorted(values)
    if len(values) < 4:
        raise ContractError("quartile_partition needs at least four values")
    q25 = _quantile_type7(values, 0.25)
    q50 = _quantile_type7(values, 0.50)
    q75 = _quantile_type7(values, 0.75)
    parts = ([], [], [], [])
    for v in values:
        if v <= q25:
            parts[0].append(v)
        elif v <= q50:
            parts[1].append(v)
        elif v <= q75:
            parts[2].append(v)
        else:
            parts[3].append(v)
    return parts


def median(values) -> float:
    values = sorted(values)
    n = len(values)
    if n == 0:
        raise ContractError("median of empty sample")
    mid = n // 2
    if n % 2:
        return float(values[mid])
    return (values[mid - 1] + values[mid]) / 2.0
