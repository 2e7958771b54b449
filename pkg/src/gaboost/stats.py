"""Nonparametric tests for comparing runs: Wilcoxon signed-rank and Kruskal-Wallis."""

from __future__ import annotations

import math
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special

EXACT_MAX_PAIRS = 25


class StatsError(ValueError):
    pass


class TestResult(NamedTuple):
    statistic: float
    p_value: float
    exact: bool = False


def rank_with_ties(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    sv = v[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_sizes(values) -> np.ndarray:
    _, counts = np.unique(np.asarray(values), return_counts=True)
    return counts[counts > 1].astype(np.float64)


def chi2_sf(x: float, df: int) -> float:
    """Upper tail probability of the chi-square distribution."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def _exact_signed_rank_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    # counts[s] = number of sign patterns whose positive doubled-rank sum is s
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks.astype(np.int64):
        r = int(r)
        counts[r:reach + r + 1] = counts[r:reach + r + 1] + counts[0:reach + 1]
        reach += r
    return counts


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float] | None = None,
                         exact_max: int = EXACT_MAX_PAIRS) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped. With at most ``exact_max`` nonzero differences
    the p-value comes from the exact null distribution of the signed-rank sum
    (all 2^m sign assignments, counted by dynamic programming); otherwise from
    the normal approximation with tie and continuity corrections.

    Returns W = min(W+, W-).
    """
    x = np.asarray(x, dtype=np.float64)
    d = x if y is None else x - np.asarray(y, dtype=np.float64)
    if y is not None and len(x) != len(y):
        raise StatsError(f"paired samples differ in length: {len(x)} vs {len(y)}")
    d = d[d != 0]
    m = len(d)
    if m == 0:
        raise StatsError("no information: all paired differences are zero")
    ranks = rank_with_ties(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if m <= exact_max:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _exact_signed_rank_counts(doubled)
        le = int(counts[: int(round(2 * w)) + 1].sum())
        p = min(1.0, 2 * le / 2 ** m)
        return TestResult(w, float(p), True)

    mean = m * (m + 1) / 4.0
    var = m * (m + 1) * (2 * m + 1) / 24.0
    t = _tie_sizes(np.abs(d))
    var -= float(np.sum(t ** 3 - t)) / 48.0
    if var <= 0:
        return TestResult(w, 1.0, False)
    z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return TestResult(w, min(1.0, p), False)


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestResult:
    """Kruskal-Wallis H test across three or more groups, tie corrected."""
    if len(groups) < 3:
        raise StatsError(f"need at least 3 groups, got {len(groups)}")
    arrs = [np.asarray(g, dtype=np.float64) for g in groups]
    if any(len(a) == 0 for a in arrs):
        raise StatsError("every group must be non-empty")
    pooled = np.concatenate(arrs)
    n = len(pooled)
    if n < 3:
        raise StatsError("need at least 3 observations")
    t = _tie_sizes(pooled)
    correction = 1.0 - float(np.sum(t ** 3 - t)) / (n ** 3 - n)
    if correction <= 0:
        # every value identical
        return TestResult(0.0, 1.0)
    ranks = rank_with_ties(pooled)
    h = 0.0
    start = 0
    for a in arrs:
        r = ranks[start:start + len(a)]
        h += len(a) * r.mean() ** 2
        start += len(a)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    h = max(h / correction, 0.0)
    return TestResult(h, chi2_sf(h, len(arrs) - 1))


def format_p(p: float | None) -> str:
    """Five-decimal p-value; values that would print as zero become ``<1e-05``."""
    if p is None or (isinstance(p, float) and math.isnan(p)):
        return "NA"
    if p < 1e-5:
        return "<1e-05"
    return f"{p:.5f}"


def pairwise_wilcoxon(samples: dict[str, Sequence[float]]) -> dict[tuple[str, str], float | None]:
    """p-value for every (later, earlier) pair of named runs; None when undefined."""
    names = list(samples)
    out = {}
    for i, a in enumerate(names):
        for b in names[:i]:
            try:
                out[(a, b)] = wilcoxon_signed_rank(samples[a], samples[b]).p_value
            except StatsError:
                out[(a, b)] = None
    return out


def kruskal_combinations(samples: dict[str, Sequence[float]], min_size: int = 3):
    """Kruskal-Wallis p for every combination of at least ``min_size`` runs,
    sorted by p descending then by the combination's names."""
    names = list(samples)
    rows = []
    for size in range(min_size, len(names) + 1):
        for combo in combinations(names, size):
            res = kruskal_wallis([samples[c] for c in combo])
            rows.append((combo, res.statistic, res.p_value))
    rows.sort(key=lambda r: (-r[2], r[0]))
    return rows


def write_wilcoxon_matrix(samples: dict[str, Sequence[float]], path) -> None:
    """Lower-triangle p matrix: one row per run from the second onward,
    last row is the column header."""
    names = list(samples)
    pv = pairwise_wilcoxon(samples)
    lines = []
    for i, a in enumerate(names[1:], start=1):
        cells = [format_p(pv[(a, b)]) for b in names[:i]]
        cells += [""] * (len(names) - 1 - len(cells))
        lines.append(",".join([a] + cells))
    lines.append(",".join([""] + names[:-1]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_wilcoxon_matrix(path) -> dict[tuple[str, str], str]:
    with open(path, encoding="utf-8") as fh:
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    header = rows[-1][1:]
    out = {}
    for row in rows[:-1]:
        for b, cell in zip(header, row[1:]):
            if cell:
                out[(row[0], b)] = cell
    return out


def write_kruskal_table(rows, path, top: int | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("group_list,p_value\n")
        for combo, _, p in rows[:top] if top else rows:
            fh.write(f"\"{', '.join(combo)}\",{format_p(p)}\n")
