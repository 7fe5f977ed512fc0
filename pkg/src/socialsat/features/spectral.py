"""Spectral-statistical feature engine: 78 features per channel.

FFT coefficients 0..10 of the series padded with its mean to the next power
of two (real, imaginary, absolute value and angle in radians) plus moments,
order statistics, energy/change statistics, autocorrelations, c3
nonlinearity, complexity, mean crossings, linear trend and length.
"""

from __future__ import annotations

import numpy as np

from ..ingest import FPS
from .fourier import fft

N_COEFFICIENTS = 11
AUTOCORR_LAGS = (1, 2, 3, 4, 5)
C3_LAGS = (1, 2, 3)
MIN_LENGTH = 3


def _names() -> tuple[str, ...]:
    names = []
    for k in range(N_COEFFICIENTS):
        for part in ("real", "imag", "abs", "angle"):
            names.append(f"fft_coefficient_k{k}_{part}")
    names += ["mean", "variance", "skewness", "kurtosis"]
    names += ["minimum", "maximum", "median", "quantile_q10", "quantile_q25", "quantile_q75", "quantile_q90"]
    names += [
        "abs_energy",
        "root_mean_square",
        "mean_abs_change",
        "mean_change",
        "count_above_mean",
        "count_below_mean",
        "longest_strike_above_mean",
        "longest_strike_below_mean",
    ]
    names += [f"autocorrelation_lag{lag}" for lag in AUTOCORR_LAGS]
    names += [f"c3_lag{lag}" for lag in C3_LAGS]
    names += ["cid_ce", "number_mean_crossings"]
    names += ["linear_trend_slope", "linear_trend_intercept", "linear_trend_rvalue"]
    names += ["sample_count", "duration_s"]
    return tuple(names)


FEATURE_NAMES = _names()


def longest_run(mask: np.ndarray) -> int:
    """Length of the longest run of True values."""
    if not mask.any():
        return 0
    padded = np.concatenate([[0], mask.astype(np.int8), [0]])
    edges = np.flatnonzero(np.diff(padded))
    return int(np.max(edges[1::2] - edges[::2]))


def autocorrelation_lag(x: np.ndarray, lag: int) -> float:
    """Covariance at ``lag`` over the series variance, both around the global mean."""
    n = len(x)
    if lag >= n:
        return np.nan
    if x.min() == x.max():
        return np.nan
    mu = x.mean()
    var = x.var()
    if var == 0:
        return np.nan
    return float(np.sum((x[: n - lag] - mu) * (x[lag:] - mu)) / ((n - lag) * var))


def extract_spectral_stat(x, fps: float = FPS) -> tuple[np.ndarray, np.ndarray]:
    """Return (values, flags) aligned with :data:`FEATURE_NAMES`.

    Flagged entries could not be computed (series too short, constant input
    for scale-free statistics, missing samples) and hold 0.
    """
    x = np.asarray(x, dtype=float)
    n_feat = len(FEATURE_NAMES)
    if len(x) < MIN_LENGTH or not np.all(np.isfinite(x)):
        return np.zeros(n_feat), np.ones(n_feat, bool)

    n = len(x)
    out = []
    # exact mean for constant input, so every centred quantity is exactly zero
    mu = x[0] if x.min() == x.max() else x.mean()
    # pad with the mean rather than zeros so a constant series stays DC-only
    spec = fft(x - mu)
    spec[0] += mu * len(spec)
    for k in range(N_COEFFICIENTS):
        c = spec[k] if k < len(spec) else np.nan + 0j
        out += [c.real, c.imag, abs(c), np.arctan2(c.imag, c.real)]

    d = x - mu
    m2 = np.mean(d**2)
    if m2 > 0:
        skew = np.mean(d**3) / m2**1.5
        kurt = np.mean(d**4) / m2**2 - 3.0
    else:
        skew = kurt = np.nan
    out += [mu, m2, skew, kurt]

    q = np.quantile(x, [0.5, 0.1, 0.25, 0.75, 0.9])
    out += [x.min(), x.max(), q[0], q[1], q[2], q[3], q[4]]

    diff = np.diff(x)
    above = x > mu
    below = x < mu
    out += [
        np.sum(x**2),
        np.sqrt(np.mean(x**2)),
        np.mean(np.abs(diff)),
        (x[-1] - x[0]) / (n - 1),
        float(above.sum()),
        float(below.sum()),
        float(longest_run(above)),
        float(longest_run(below)),
    ]

    out += [autocorrelation_lag(x, lag) for lag in AUTOCORR_LAGS]
    for lag in C3_LAGS:
        if 2 * lag < n:
            out.append(np.mean(x[2 * lag :] * x[lag : n - lag] * x[: n - 2 * lag]))
        else:
            out.append(np.nan)
    out.append(np.sqrt(np.sum(diff**2)))
    sign = np.sign(d)
    sign = sign[sign != 0]
    out.append(float(np.count_nonzero(np.diff(sign))))

    t = np.arange(n, dtype=float)
    tc = t - t.mean()
    slope = np.sum(tc * d) / np.sum(tc**2)
    intercept = mu - slope * t.mean()
    if m2 > 0:
        r = np.sum(tc * d) / np.sqrt(np.sum(tc**2) * np.sum(d**2))
    else:
        r = np.nan
    out += [slope, intercept, r]
    out += [float(n), n / fps]

    values = np.asarray(out, dtype=float)
    flags = ~np.isfinite(values)
    values[flags] = 0.0
    return values, flags
