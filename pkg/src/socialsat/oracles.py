"""Slow, obviously-correct reference implementations used by the test suite.

Nothing here imports the package's numerical code: every routine is written
from its definition with plain loops (O(N^2) is fine) so that agreement with
the fast paths is evidence rather than tautology.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from types import SimpleNamespace
from typing import Callable, Sequence

import numpy as np


def naive_dft(x) -> np.ndarray:
    """X[k] = sum_j x[j] exp(-2 pi i j k / N), term by term."""
    x = [complex(v) for v in np.asarray(x).ravel()]
    n = len(x)
    out = np.empty(n, dtype=complex)
    for k in range(n):
        acc = 0j
        for j, v in enumerate(x):
            acc += v * cmath.exp(-2j * math.pi * ((j * k) % n) / n)
        out[k] = acc
    return out


def matrix_dft(x) -> np.ndarray:
    """Same transform as :func:`naive_dft` through an explicit N x N matrix (faster, still O(N^2))."""
    x = np.asarray(x, dtype=complex)
    n = len(x)
    jk = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * jk / n) @ x


def direct_anova(column: Sequence[float], labels: Sequence[int]) -> float:
    """F statistic from explicit sums of squares over two groups."""
    groups: dict[int, list[float]] = {}
    for v, c in zip(column, labels):
        groups.setdefault(int(c), []).append(float(v))
    n = sum(len(g) for g in groups.values())
    k = len(groups)
    grand = math.fsum(float(v) for v in column) / n
    ss_between = 0.0
    ss_within = 0.0
    for g in groups.values():
        m = math.fsum(g) / len(g)
        ss_between += len(g) * (m - grand) ** 2
        ss_within += math.fsum((v - m) ** 2 for v in g)
    if ss_within == 0.0:
        return math.inf if ss_between > 0 else 0.0
    return (ss_between / (k - 1)) / (ss_within / (n - k))


def zone_sequence(values: Sequence[float], boundaries: Sequence[float], window: int, min_tail: int) -> list[int]:
    """Window means walked frame by frame, then zones by scanning the boundaries."""
    n = len(values)
    starts = []
    s = 0
    while s < n:
        starts.append(s)
        s += window
    if len(starts) > 1 and n - starts[-1] < min(window, min_tail):
        starts.pop()
    ends = starts[1:] + [n]
    zones = []
    for a, b in zip(starts, ends):
        total = 0.0
        for i in range(a, b):
            total += values[i]
        mean = total / (b - a)
        z = 1
        for edge in boundaries:
            if mean >= edge:
                z += 1
        zones.append(z)
    return zones


def count_runs(zones: Sequence[int]) -> tuple[int, int, int]:
    """(transitions, longest run, shortest run) by walking the sequence once."""
    transitions = 0
    runs = []
    current = 1
    for prev, nxt in zip(zones, zones[1:]):
        if nxt == prev:
            current += 1
        else:
            transitions += 1
            runs.append(current)
            current = 1
    runs.append(current)
    return transitions, max(runs), min(runs)


def pairwise_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties counting one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return math.nan
    wins = Fraction(0)
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                wins += Fraction(1, 2)
    return float(wins / (len(pos) * len(neg)))


def gap_interpolation(values: Sequence[float], missing: Sequence[bool]) -> list[float]:
    """Fill each run of missing samples with the line through its two neighbours.

    Leading and trailing runs copy the nearest valid sample.
    """
    out = [float(v) for v in values]
    n = len(out)
    i = 0
    while i < n:
        if not missing[i]:
            i += 1
            continue
        j = i
        while j < n and missing[j]:
            j += 1
        left, right = i - 1, j  # anchors, possibly outside the series
        for t in range(i, j):
            if left < 0 and right >= n:
                out[t] = math.nan
            elif left < 0:
                out[t] = out[right]
            elif right >= n:
                out[t] = out[left]
            else:
                w = (t - left) / (right - left)
                out[t] = out[left] + w * (out[right] - out[left])
        i = j
    return out


def central_difference_gradient(f: Callable[[np.ndarray], float], theta, h: float = 1e-6) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (f(up) - f(dn)) / (2 * h)
    return grad


def least_squares_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Ordinary least-squares slope from the textbook closed form."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    return sxy / sxx


def loglog_slope(scales: Sequence[float], amplitudes: Sequence[float]) -> float:
    return least_squares_slope([math.log(s) for s in scales], [math.log(a) for a in amplitudes])


def detrended_fluctuation(series: Sequence[float], scale: int) -> float:
    """RMS residual of per-window straight-line fits to the integrated series."""
    profile = []
    acc = 0.0
    for v in series:
        acc += v
        profile.append(acc)
    n_win = len(profile) // scale
    total = 0.0
    for w in range(n_win):
        seg = profile[w * scale : (w + 1) * scale]
        xs = list(range(1, scale + 1))
        slope = least_squares_slope(xs, seg)
        icpt = math.fsum(seg) / scale - slope * (scale + 1) / 2
        total += math.fsum((s - (slope * x + icpt)) ** 2 for x, s in zip(xs, seg))
    return math.sqrt(total / (n_win * scale))


def percentile_linear(values: Sequence[float], q: float) -> float:
    """Percentile with linear interpolation between order statistics at rank q/100*(n-1)."""
    s = sorted(values)
    pos = q / 100 * (len(s) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


def best_gini_split(x: Sequence[float], y: Sequence[int]) -> float:
    """Midpoint threshold of the split with the lowest weighted Gini impurity (first wins)."""

    def gini(labels):
        if not labels:
            return 0.0
        p = sum(labels) / len(labels)
        return 1 - p * p - (1 - p) * (1 - p)

    values = sorted(set(x))
    best, best_t = math.inf, math.nan
    for a, b in zip(values, values[1:]):
        t = (a + b) / 2
        left = [c for v, c in zip(x, y) if v <= t]
        right = [c for v, c in zip(x, y) if v > t]
        imp = (len(left) * gini(left) + len(right) * gini(right)) / len(y)
        if imp < best:
            best, best_t = imp, t
    return best_t


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Largest gap between the two empirical distribution functions."""
    points = sorted(set(a) | set(b))
    na, nb = len(a), len(b)
    return max(abs(sum(v <= p for v in a) / na - sum(v <= p for v in b) / nb) for p in points)


def cronbach_by_hand(rows: Sequence[Sequence[float]]) -> float:
    """Alpha from item and total sample variances, spreadsheet style."""

    def var(col):
        m = math.fsum(col) / len(col)
        return math.fsum((v - m) ** 2 for v in col) / (len(col) - 1)

    k = len(rows[0])
    items = [[r[j] for r in rows] for j in range(k)]
    totals = [math.fsum(r) for r in rows]
    return k / (k - 1) * (1 - math.fsum(var(c) for c in items) / var(totals))


def oracle_suite() -> SimpleNamespace:
    """All reference routines, by name."""
    return SimpleNamespace(
        naive_dft=naive_dft,
        matrix_dft=matrix_dft,
        direct_anova=direct_anova,
        zone_sequence=zone_sequence,
        count_runs=count_runs,
        pairwise_auc=pairwise_auc,
        gap_interpolation=gap_interpolation,
        central_difference_gradient=central_difference_gradient,
        least_squares_slope=least_squares_slope,
        loglog_slope=loglog_slope,
        detrended_fluctuation=detrended_fluctuation,
        percentile_linear=percentile_linear,
        best_gini_split=best_gini_split,
        ks_statistic=ks_statistic,
        cronbach_by_hand=cronbach_by_hand,
    )
