"""Paired-outcome statistical battery.

Implements exactly the tests the analysis pipeline reports: Shapiro-Wilk
normality (Royston's AS R94 formulation), the paired t-test, the Wilcoxon
signed-rank test (exact tail enumeration up to 20 nonzero differences,
normal approximation with continuity correction above), the chi-square test
of independence, paired Cohen's d, and a selector that picks paired-t or
Wilcoxon based on the normality of the differences.  Two-tailed p-values
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

from .specfun import chi_square_upper_tail, student_t_two_tailed

_NORMAL = NormalDist()

WILCOXON_EXACT_MAX_N = 20


@dataclass(frozen=True, slots=True)
class PairedSample:
    """Two equal-length outcome vectors, one entry per participant."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("paired vectors must have equal length")
        if len(self.x) < 2:
            raise ValueError("paired sample needs at least 2 pairs")
        if not all(math.isfinite(v) for v in self.x + self.y):
            raise ValueError("paired sample values must be finite")

    def differences(self) -> tuple[float, ...]:
        return tuple(a - b for a, b in zip(self.x, self.y))


@dataclass(frozen=True, slots=True)
class ContingencyTable:
    """r x c table of non-negative integer counts."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(int(v) for v in row) for row in self.counts)
        object.__setattr__(self, "counts", rows)
        if len(rows) < 2 or any(len(r) < 2 for r in rows):
            raise ValueError("table must be at least 2x2")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("table rows must have equal length")
        if any(v < 0 for row in rows for v in row):
            raise ValueError("counts must be non-negative")
        if sum(v for row in rows for v in row) <= 0:
            raise ValueError("table must contain at least one count")


@dataclass(frozen=True, slots=True)
class StatsResult:
    test_name: str
    statistic: float
    p_two_tailed: float
    df: float | None = None
    effect_size: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_two_tailed <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")


def _shapiro_weights(n: int, m: list[float]) -> list[float]:
    ssq = sum(v * v for v in m)
    if n == 3:
        r = math.sqrt(0.5)
        return [-r, 0.0, r]
    u = 1.0 / math.sqrt(n)
    norm = math.sqrt(ssq)
    a_n = (m[-1] / norm - 2.706056 * u ** 5 + 4.434685 * u ** 4
           - 2.071190 * u ** 3 - 0.147981 * u ** 2 + 0.221157 * u)
    a = [0.0] * n
    if n > 5:
        a_n1 = (m[-2] / norm - 3.582633 * u ** 5 + 5.682633 * u ** 4
                - 1.752461 * u ** 3 - 0.293762 * u ** 2 + 0.042981 * u)
        phi = (ssq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) \
            / (1.0 - 2.0 * a_n ** 2 - 2.0 * a_n1 ** 2)
        root = math.sqrt(phi)
        a[-1], a[-2] = a_n, a_n1
        a[0], a[1] = -a_n, -a_n1
        for i in range(2, n - 2):
            a[i] = m[i] / root
    else:
        phi = (ssq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n ** 2)
        root = math.sqrt(phi)
        a[-1] = a_n
        a[0] = -a_n
        for i in range(1, n - 1):
            a[i] = m[i] / root
    return a


def shapiro_wilk(x) -> StatsResult:
    """W statistic and upper-tail p per Royston's AS R94 approximation."""
    xs = sorted(float(v) for v in x)
    n = len(xs)
    if n < 3:
        raise ValueError("Shapiro-Wilk needs at least 3 observations")
    if n > 5000:
        raise ValueError("Shapiro-Wilk approximation valid up to n = 5000")
    if xs[0] == xs[-1]:
        raise ValueError("all observations are identical")

    m = [_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)]
    a = _shapiro_weights(n, m)
    mean = math.fsum(xs) / n
    ssq_x = math.fsum((v - mean) ** 2 for v in xs)
    w_num = math.fsum(ai * v for ai, v in zip(a, xs))
    w = min(1.0, w_num * w_num / ssq_x)

    if n == 3:
        p = 1.909859 * (math.asin(math.sqrt(w)) - 1.047198)
        p = min(1.0, max(0.0, p))
        return StatsResult("shapiro_wilk", w, p)

    if 1.0 - w < 1e-15:
        return StatsResult("shapiro_wilk", w, 1.0)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        stat = -math.log(gamma - math.log1p(-w))
        mu = 0.5440 - 0.39978 * n + 0.025054 * n * n - 0.0006714 * n ** 3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n * n
                         - 0.0020322 * n ** 3)
    else:
        ln_n = math.log(n)
        stat = math.log1p(-w)
        mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n ** 2 \
            + 0.0038915 * ln_n ** 3
        sigma = math.exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n ** 2)
    z = (stat - mu) / sigma
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return StatsResult("shapiro_wilk", w, min(1.0, max(0.0, p)))


def _diff_stats(s: PairedSample) -> tuple[tuple[float, ...], float, float]:
    d = s.differences()
    n = len(d)
    mean = math.fsum(d) / n
    var = math.fsum((v - mean) ** 2 for v in d) / (n - 1)
    sd = math.sqrt(var)
    if sd == 0.0:
        raise ValueError("differences have zero variance")
    return d, mean, sd


def paired_t(s: PairedSample) -> StatsResult:
    """Two-tailed paired t-test on x - y; effect size is paired Cohen's d."""
    d, mean, sd = _diff_stats(s)
    n = len(d)
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = student_t_two_tailed(t, float(df))
    return StatsResult("paired_t", t, p, float(df), mean / sd)


def cohens_d_paired(s: PairedSample) -> float:
    """Mean of the paired differences over their sample standard deviation."""
    _, mean, sd = _diff_stats(s)
    return mean / sd


def _midranks(values: list[float]) -> list[float]:
    """Ranks of the given magnitudes, ties sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = 0.5 * (i + j) + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def _wilcoxon_exact_p(doubled_ranks: list[int], w_min_doubled: int) -> float:
    """Two-tailed tail mass of W+ over all 2^m sign assignments.

    Dynamic programming over the doubled (integer) rank sums counts sign
    patterns exactly, so the result equals brute-force enumeration.
    """
    total = sum(doubled_ranks)
    if w_min_doubled >= total - w_min_doubled:
        return 1.0
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s2 in range(total - r, -1, -1):
            if counts[s2]:
                counts[s2 + r] += counts[s2]
    lo = sum(counts[: w_min_doubled + 1])
    hi = sum(counts[total - w_min_doubled:])
    return (lo + hi) / (1 << len(doubled_ranks))


def wilcoxon_signed_rank(s: PairedSample) -> StatsResult:
    """Signed-rank test on x - y; zero differences dropped, ties mid-ranked.

    The statistic is the smaller of the positive and negative rank sums.
    """
    d = [v for v in s.differences() if v != 0.0]
    m = len(d)
    if m == 0:
        raise ValueError("all paired differences are zero")
    ranks = _midranks([abs(v) for v in d])
    w_plus = math.fsum(r for r, v in zip(ranks, d) if v > 0.0)
    total = 0.5 * m * (m + 1)
    w = min(w_plus, total - w_plus)

    if m <= WILCOXON_EXACT_MAX_N:
        doubled = [round(2.0 * r) for r in ranks]
        p = _wilcoxon_exact_p(doubled, round(2.0 * w))
    else:
        tie_term = 0.0
        seen: dict[float, int] = {}
        for v in d:
            seen[abs(v)] = seen.get(abs(v), 0) + 1
        for t in seen.values():
            tie_term += t ** 3 - t
        var = m * (m + 1) * (2 * m + 1) / 24.0 - tie_term / 48.0
        dev = w_plus - 0.25 * m * (m + 1)
        if dev > 0.0:
            dev -= 0.5
        elif dev < 0.0:
            dev += 0.5
        z = dev / math.sqrt(var)
        p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return StatsResult("wilcoxon", w, p)


def chi_square_independence(t: ContingencyTable,
                            yates: bool = False) -> StatsResult:
    """Chi-square test of independence on an r x c count table."""
    rows = t.counts
    row_sums = [sum(r) for r in rows]
    col_sums = [sum(r[j] for r in rows) for j in range(len(rows[0]))]
    if min(row_sums) == 0 or min(col_sums) == 0:
        raise ValueError("table has an empty row or column margin")
    n = sum(row_sums)
    chi2 = 0.0
    for i, row in enumerate(rows):
        for j, obs in enumerate(row):
            expected = row_sums[i] * col_sums[j] / n
            delta = abs(obs - expected)
            if yates:
                delta = max(0.0, delta - 0.5)
            chi2 += delta * delta / expected
    df = (len(rows) - 1) * (len(rows[0]) - 1)
    p = chi_square_upper_tail(chi2, float(df))
    return StatsResult("chi_square", chi2, p, float(df))


def select_and_run(s: PairedSample, alpha: float = 0.05) -> StatsResult:
    """Paired t-test when the differences look normal, Wilcoxon otherwise."""
    normality = shapiro_wilk(s.differences())
    if normality.p_two_tailed >= alpha:
        return paired_t(s)
    return wilcoxon_signed_rank(s)
