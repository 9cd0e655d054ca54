"""Paired non-parametric model comparison.

Wilcoxon signed-rank with zero differences discarded: the exact two-sided
p-value comes from the full sign-assignment distribution (computed by
convolution over scaled midranks) up to n = 25, and a tie-corrected normal
approximation with continuity correction beyond. Effect sizes are paired
rank-biserial correlations; multiple comparisons are Bonferroni-adjusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from fingertrain.errors import DataError
from fingertrain.metrics import MetricVector

EXACT_LIMIT = 25


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    statistic: float  # W+ over the non-zero differences
    n_effective: int
    all_zero: bool
    method: str  # "exact", "normal", or "degenerate"


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Two-sided paired test; zero differences are discarded.

    All-zero difference vectors return p = 1 flagged as degenerate. Fewer
    than five non-zero differences (but more than none) violate the
    precondition and raise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("paired vectors must have identical 1-D shapes")
    diff = a - b
    diff = diff[diff != 0.0]
    n = diff.size
    if n == 0:
        return WilcoxonResult(p_value=1.0, statistic=0.0, n_effective=0, all_zero=True, method="degenerate")
    if n < 5:
        raise DataError(f"only {n} non-zero differences; need at least 5")

    ranks = _midranks_abs(diff)
    w_plus = float(ranks[diff > 0].sum())
    if n <= EXACT_LIMIT:
        p = _exact_two_sided(ranks, w_plus)
        return WilcoxonResult(p, w_plus, n, False, "exact")
    p = _normal_two_sided(ranks, w_plus, n)
    return WilcoxonResult(p, w_plus, n, False, "normal")


def _midranks_abs(diff: np.ndarray) -> np.ndarray:
    mags = np.abs(diff)
    order = np.argsort(mags, kind="stable")
    ranks = np.empty(len(mags), dtype=np.float64)
    sorted_vals = mags[order]
    i = 0
    while i < len(mags):
        j = i
        while j + 1 < len(mags) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    """Exact distribution of W+ by convolution over sign assignments.

    Midranks are half-integers, so everything is scaled by two to stay on an
    integer lattice; the resulting array counts, for every achievable scaled
    sum, the number of the 2^n sign assignments reaching it.
    """
    scaled = np.rint(ranks * 2).astype(np.int64)
    total = int(scaled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in scaled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    w2 = int(np.rint(w_plus * 2))
    w_min = min(w2, total - w2)
    lower = counts[: w_min + 1].sum()
    upper = counts[total - w_min :].sum()
    return float(min(1.0, (lower + upper) / counts.sum()))


def _normal_two_sided(ranks: np.ndarray, w_plus: float, n: int) -> float:
    """Tie-corrected normal approximation with continuity correction.

    An Edgeworth kurtosis term sharpens the mid-range where the plain
    normal is weakest; W+ is symmetric under the null, so the skewness
    term vanishes and the kurtosis of sum(r_i * Bernoulli(1/2)) is exact.
    """
    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance -= float(((tie_counts**3 - tie_counts) / 48.0).sum())
    if variance <= 0:
        return 1.0
    sigma = math.sqrt(variance)
    excess_kurtosis = -(1.0 / 8.0) * float((ranks**4).sum()) / variance**2
    w_low = mean - abs(w_plus - mean)
    z = (w_low + 0.5 - mean) / sigma
    density = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    lower_cdf = 0.5 * math.erfc(-z / math.sqrt(2.0))
    lower_cdf -= (excess_kurtosis / 24.0) * (z**3 - 3.0 * z) * density
    return float(min(1.0, max(0.0, 2.0 * lower_cdf)))


def rank_biserial(a, b, higher_is_better: bool = True) -> float:
    """(wins - losses) / n with ties counting toward neither side."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise DataError("paired vectors must be equal-length and non-empty")
    if higher_is_better:
        wins = int((a > b).sum())
        losses = int((a < b).sum())
    else:
        wins = int((a < b).sum())
        losses = int((a > b).sum())
    return (wins - losses) / a.size


def significance_stars(p: float) -> str:
    if not np.isfinite(p):
        return "na"
    if p >= 0.05:
        return "ns"
    if p >= 0.01:
        return "*"
    if p >= 0.001:
        return "**"
    if p >= 0.0001:
        return "***"
    return "****"


@dataclass
class ComparisonResult:
    method_a: str
    method_b: str
    dataset: str
    metric_label: str
    p_raw: float
    p_adjusted: float
    r_rb: float
    n: int
    alpha: float
    stars: str  # binned on the adjusted p-value
    note: str = ""


def multiple_comparison(vectors: list[MetricVector], alpha: float = 0.05) -> list[ComparisonResult]:
    """All unordered method pairs, Bonferroni-adjusted over the pair count.

    Pairs with too few usable differences are reported with NaN p-values and
    a note instead of failing the whole table.
    """
    if len(vectors) < 2:
        raise DataError("need at least two methods to compare")
    length = vectors[0].per_repeat.shape[0]
    for v in vectors:
        if v.per_repeat.shape[0] != length:
            raise DataError("metric vectors are not aligned across repeats")
    pairs = list(combinations(range(len(vectors)), 2))
    m = len(pairs)
    out = []
    for i, j in pairs:
        va, vb = vectors[i], vectors[j]
        higher = va.metric.higher_is_better
        rrb = rank_biserial(va.per_repeat, vb.per_repeat, higher_is_better=higher)
        note = ""
        try:
            res = wilcoxon_signed_rank(va.per_repeat, vb.per_repeat)
            p_raw = res.p_value
            if res.all_zero:
                note = "all differences zero"
        except DataError as exc:
            p_raw = float("nan")
            note = str(exc)
        p_adj = min(1.0, p_raw * m) if np.isfinite(p_raw) else float("nan")
        out.append(
            ComparisonResult(
                method_a=va.method,
                method_b=vb.method,
                dataset=va.dataset,
                metric_label=va.metric.label(),
                p_raw=p_raw,
                p_adjusted=p_adj,
                r_rb=rrb,
                n=length,
                alpha=alpha,
                stars=significance_stars(p_adj),
                note=note,
            )
        )
    return out
