"""The canonical 22-feature time-series catalogue (catch22), reimplemented.

Every feature is computed on the z-scored series (sample standard deviation).
A constant or non-finite input flags all 22 features with value 0; any single
feature that evaluates to a non-finite number is flagged the same way.

References
----------
Lubba, C. H., Sethi, S. S., Knaute, P., Schultz, S. R., Fulcher, B. D., &
Jones, N. S. (2019). catch22: Canonical time-series characteristics. Data
Mining and Knowledge Discovery, 33(6), 1821-1852.
"""

from __future__ import annotations

import math

import numpy as np

from .fourier import autocorrelation, fft, ifft, next_pow2

FEATURE_NAMES = (
    "DN_HistogramMode_5",
    "DN_HistogramMode_10",
    "CO_f1ecac",
    "CO_FirstMin_ac",
    "CO_HistogramAMI_even_2_5",
    "CO_trev_1_num",
    "MD_hrv_classic_pnn40",
    "SB_BinaryStats_mean_longstretch1",
    "SB_TransitionMatrix_3ac_sumdiagcov",
    "PD_PeriodicityWang_th0_01",
    "CO_Embed2_Dist_tau_d_expfit_meandiff",
    "IN_AutoMutualInfoStats_40_gaussian_fmmi",
    "FC_LocalSimple_mean1_tauresrat",
    "DN_OutlierInclude_p_001_mdrmd",
    "DN_OutlierInclude_n_001_mdrmd",
    "SP_Summaries_welch_rect_area_5_1",
    "SB_BinaryStats_diff_longstretch0",
    "SB_MotifThree_quantile_hh",
    "SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1",
    "SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1",
    "SP_Summaries_welch_rect_centroid",
    "FC_LocalSimple_mean3_stderr",
)

MIN_LENGTH = 3


# -- shared helpers ----------------------------------------------------------


def zscore(y: np.ndarray) -> np.ndarray:
    return (y - y.mean()) / y.std(ddof=1)


def first_zero_crossing(y: np.ndarray, max_tau: int | None = None) -> int:
    """First lag at which the autocorrelation is no longer positive."""
    ac = autocorrelation(y)
    max_tau = len(y) if max_tau is None else max_tau
    tau = 0
    while tau < max_tau and tau < len(ac) and ac[tau] > 0:
        tau += 1
    return tau


def _histcounts(y: np.ndarray, n_bins: int):
    lo, hi = y.min(), y.max()
    step = (hi - lo) / n_bins
    idx = np.floor((y - lo) / step).astype(int) if step > 0 else np.zeros(len(y), int)
    idx = np.clip(idx, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    edges = lo + step * np.arange(n_bins + 1)
    return counts, edges


def _quantile(y: np.ndarray, q: float) -> float:
    s = np.sort(y)
    n = len(s)
    lim = 0.5 / n
    if q < lim:
        return float(s[0])
    if q > 1 - lim:
        return float(s[-1])
    pos = n * q - 0.5
    left = int(math.floor(pos))
    right = int(math.ceil(pos))
    if left == right:
        return float(s[left])
    return float(s[left] + (pos - left) * (s[right] - s[left]))


def coarse_grain_quantile(y: np.ndarray, n_groups: int) -> np.ndarray:
    """Symbols 1..n_groups by equiprobable quantile bins."""
    th = np.array([_quantile(y, q) for q in np.linspace(0, 1, n_groups + 1)])
    th[0] -= 1
    labels = np.zeros(len(y), dtype=int)
    for i in range(n_groups):
        labels[(y > th[i]) & (y <= th[i + 1])] = i + 1
    return labels


def _linreg(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    m = np.sum((x - xm) * (y - ym)) / sxx
    return m, ym - m * xm


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


# -- distribution ------------------------------------------------------------


def histogram_mode(y: np.ndarray, n_bins: int) -> float:
    """Centre of the most populated equal-width bin (ties averaged)."""
    counts, edges = _histcounts(y, n_bins)
    centres = 0.5 * (edges[:-1] + edges[1:])
    top = counts == counts.max()
    return float(np.mean(centres[top]))


def outlier_timing(y: np.ndarray, sign: int) -> float:
    """Median timing of increasingly extreme events, normalised to [-1, 1]."""
    inc = 0.01
    n = len(y)
    if np.all(y == y[0]):
        return 0.0
    w = sign * y
    tot = int(np.sum(w >= 0))
    max_val = w.max()
    if max_val < inc:
        return 0.0
    n_thresh = int(max_val / inc + 1)
    gaps = np.full(n_thresh, np.nan)
    frac = np.zeros(n_thresh)
    med = np.zeros(n_thresh)
    for i in range(n_thresh):
        r = np.flatnonzero(w >= i * inc) + 1.0
        k = len(r)
        if k > 1:
            # r is sorted, so its mean gap and median need no extra pass
            gaps[i] = (r[-1] - r[0]) / (k - 1)
        frac[i] = (k - 1) * 100.0 / tot
        med[i] = 0.5 * (r[(k - 1) // 2] + r[k // 2]) / (n // 2) - 1 if k else np.nan
    trim = 2.0
    mj = 0
    fbi = n_thresh - 1
    for i in range(n_thresh):
        if frac[i] > trim:
            mj = i
        if np.isnan(gaps[n_thresh - 1 - i]):
            fbi = n_thresh - 1 - i
    limit = min(mj, fbi)
    return float(np.median(med[: limit + 1]))


# -- linear autocorrelation ----------------------------------------------------


def first_1e_crossing(ac: np.ndarray) -> float:
    """Interpolated lag at which the autocorrelation first drops below 1/e."""
    thresh = 1.0 / math.e
    n = len(ac)
    for i in range(n - 2):
        if ac[i + 1] < thresh:
            slope = ac[i + 1] - ac[i]
            return float(i + (thresh - ac[i]) / slope)
    return float(n)


def first_min_ac(ac: np.ndarray) -> float:
    for i in range(1, len(ac) - 1):
        if ac[i] < ac[i - 1] and ac[i] < ac[i + 1]:
            return float(i)
    return float(len(ac))


def _welch_rect(y: np.ndarray):
    """One-segment rectangular-window periodogram on angular frequency."""
    n = len(y)
    nfft = next_pow2(n)
    spec = fft(y - y.mean(), nfft)
    power = np.abs(spec) ** 2 / n
    n_out = nfft // 2 + 1
    pxx = power[:n_out].copy()
    pxx[1 : n_out - 1] *= 2
    f = np.arange(n_out) / nfft
    w = 2 * math.pi * f
    sw = pxx / (2 * math.pi)
    return w, sw


def spectral_area_first_fifth(y: np.ndarray) -> float:
    w, sw = _welch_rect(y)
    dw = w[1] - w[0]
    return float(np.sum(sw[: len(sw) // 5]) * dw)


def spectral_centroid(y: np.ndarray) -> float:
    w, sw = _welch_rect(y)
    cs = np.cumsum(sw)
    above = np.flatnonzero(cs > 0.5 * cs[-1])
    return float(w[above[0]]) if len(above) else 0.0


def local_mean_stderr(y: np.ndarray, train: int = 3) -> float:
    windows = np.lib.stride_tricks.sliding_window_view(y[:-1], train)
    res = y[train:] - windows.mean(axis=1)
    if res.size < 2:
        return float("nan")
    return float(np.std(res, ddof=1))


def periodicity_wang(y: np.ndarray, th: float = 0.01) -> float:
    """First autocovariance peak of the spline-detrended series that clears ``th``."""
    n = len(y)
    detrended = y - _spline_fit(y)
    acmax = int(math.ceil(n / 3))
    acf = _lagged_cov(detrended, acmax)
    troughs, peaks = [], []
    for i in range(1, acmax - 1):
        slope_in = acf[i] - acf[i - 1]
        slope_out = acf[i + 1] - acf[i]
        if slope_in < 0 and slope_out > 0:
            troughs.append(i)
        elif slope_in > 0 and slope_out < 0:
            peaks.append(i)
    for ip in peaks:
        before = [t for t in troughs if t < ip]
        if not before:
            continue
        trough = acf[before[-1]]
        if acf[ip] - trough < th or acf[ip] < 0:
            continue
        return float(ip)
    return 0.0


def _lagged_cov(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample covariance of x[:n-tau] with x[tau:] for tau = 1..max_lag, each with its own means."""
    n = len(x)
    spec = fft(x, 2 * next_pow2(n))
    prod = ifft(spec * np.conj(spec)).real
    cs = np.concatenate([[0.0], np.cumsum(x)])
    tau = np.arange(1, max_lag + 1)
    m = n - tau
    sa = cs[m]
    sb = cs[n] - cs[tau]
    with np.errstate(invalid="ignore", divide="ignore"):
        return (prod[tau] - sa * sb / m) / (m - 1)


def _spline_fit(y: np.ndarray) -> np.ndarray:
    """Least-squares C2 cubic spline with breaks at 0, floor(n/2)-1 and n-1."""
    n = len(y)
    t = np.arange(n, dtype=float) / (n - 1)
    b = (math.floor(n / 2) - 1) / (n - 1)
    basis = np.column_stack([np.ones(n), t, t**2, t**3, np.clip(t - b, 0, None) ** 3])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return basis @ coef


# -- nonlinear autocorrelation -------------------------------------------------


def time_reversibility(y: np.ndarray) -> float:
    return float(np.mean(np.diff(y) ** 3))


def histogram_ami(y: np.ndarray, tau: int = 2, n_bins: int = 5) -> float:
    """Automutual information at ``tau`` from an equal-width 5x5 joint histogram."""
    lo, hi = y.min(), y.max()
    step = (hi - lo + 0.2) / n_bins
    idx = np.clip(np.floor((y - (lo - 0.1)) / step).astype(int), 0, n_bins - 1)
    a, b = idx[:-tau], idx[tau:]
    joint = np.zeros((n_bins, n_bins))
    np.add.at(joint, (a, b), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])))


def gaussian_ami_first_min(y: np.ndarray, max_tau: int = 40) -> float:
    n = len(y)
    tau = min(max_tau, int(math.ceil(n / 2)))
    ami = np.empty(tau)
    for i in range(tau):
        lag = i + 1
        a, b = y[: n - lag], y[lag:]
        a = a - a.mean()
        b = b - b.mean()
        with np.errstate(invalid="ignore", divide="ignore"):
            ac = np.sum(a * b) / math.sqrt(np.sum(a * a) * np.sum(b * b))
            ami[i] = -0.5 * np.log(1 - ac * ac)
    for i in range(1, tau - 1):
        if ami[i] < ami[i - 1] and ami[i] < ami[i + 1]:
            return float(i)
    return float(tau)


def embed2_expfit_meandiff(y: np.ndarray) -> float:
    """Mismatch between 2-d embedding step lengths and an exponential fit."""
    n = len(y)
    tau = first_zero_crossing(y, n)
    if tau > n / 10:
        tau = int(math.floor(n / 10))
    m = n - tau - 1
    if m < 2:
        return np.nan
    d = np.sqrt(np.diff(y)[:m] ** 2 + (y[tau : tau + m] - y[tau + 1 : tau + 1 + m]) ** 2)
    mean_d = d.mean()
    sd = d.std(ddof=1)
    if sd < 0.001:
        return 0.0
    n_bins = int(math.ceil((d.max() - d.min()) / (3.5 * sd / m ** (1 / 3))))
    if n_bins == 0:
        return 0.0
    counts, edges = _histcounts(d, n_bins)
    prob = counts / m
    centres = 0.5 * (edges[:-1] + edges[1:])
    expf = np.maximum(np.exp(-centres / mean_d) / mean_d, 0.0)
    return float(np.mean(np.abs(prob - expf)))


# -- successive differences / symbolic -----------------------------------------


def pnn40(y: np.ndarray) -> float:
    return float(np.mean(np.abs(np.diff(y)) * 1000 > 40))


def longstretch_above_mean(y: np.ndarray) -> float:
    n = len(y)
    binary = (y[: n - 1] - y.mean()) > 0
    best, last = 0, 0
    for i in range(n - 1):
        if not binary[i] or i == n - 2:
            best = max(best, i - last)
            last = i
    return float(best)


def longstretch_decreasing(y: np.ndarray) -> float:
    n = len(y)
    increasing = np.diff(y) >= 0
    best, last = 0, 0
    for i in range(n - 1):
        if increasing[i] or i == n - 2:
            best = max(best, i - last)
            last = i
    return float(best)


def motif_entropy(y: np.ndarray) -> float:
    """Entropy of consecutive symbol pairs on a 3-letter quantile alphabet."""
    n = len(y)
    sym = coarse_grain_quantile(y, 3)
    first, second = sym[:-1], sym[1:]
    counts = np.zeros((3, 3))
    np.add.at(counts, (first - 1, second - 1), 1.0)
    return _entropy(counts.ravel() / (n - 1))


def transition_matrix_diag_cov(y: np.ndarray) -> float:
    n = len(y)
    tau = first_zero_crossing(y, n)
    down = y[::tau]
    sym = coarse_grain_quantile(down, 3)
    t = np.zeros((3, 3))
    np.add.at(t, (sym[:-1] - 1, sym[1:] - 1), 1.0)
    t /= len(down) - 1
    return float(np.sum(np.var(t, axis=0, ddof=1)))


def local_mean_tauresrat(y: np.ndarray, train: int = 1) -> float:
    n = len(y)
    windows = np.lib.stride_tricks.sliding_window_view(y[:-1], train)
    res = y[train:] - windows.mean(axis=1)
    return first_zero_crossing(res, n - train) / first_zero_crossing(y, n)


# -- scaling -----------------------------------------------------------------


def fluctuation_function(y: np.ndarray, how: str = "dfa", lag: int = 1):
    """Scales and fluctuation amplitudes used by the scaling features.

    The series is integrated (cumulative sum of every ``lag``-th sample), cut
    into non-overlapping windows at ~50 log-spaced scales between 5 and n/2,
    linearly detrended per window, and summarised by RMS (``dfa``) or by the
    RMS of the window range (``rsrangefit``).
    """
    n = len(y)
    lo, hi = math.log(5), math.log(n // 2) if n >= 4 else 0.0
    steps = 50
    raw = [math.floor(math.exp(lo + i * (hi - lo) / (steps - 1)) + 0.5) for i in range(steps)]
    taus = np.array(sorted(set(raw)), dtype=int)
    ycs = np.cumsum(y[::lag][: n // lag])
    size = len(ycs)
    fluct = np.empty(len(taus))
    for i, tau in enumerate(taus):
        n_buf = size // tau
        if n_buf == 0:
            fluct[i] = np.nan
            continue
        segs = ycs[: n_buf * tau].reshape(n_buf, tau)
        x = np.arange(1, tau + 1, dtype=float)
        xc = x - x.mean()
        slope = (segs - segs.mean(axis=1, keepdims=True)) @ xc / np.sum(xc**2)
        intercept = segs.mean(axis=1) - slope * x.mean()
        resid = segs - (slope[:, None] * x + intercept[:, None])
        if how == "dfa":
            fluct[i] = math.sqrt(np.sum(resid**2) / (n_buf * tau))
        elif how == "rsrangefit":
            rng = resid.max(axis=1) - resid.min(axis=1)
            fluct[i] = math.sqrt(np.sum(rng**2) / n_buf)
        else:
            raise ValueError(f"unknown fluctuation method {how!r}")
    return taus, fluct


def scaling_exponent(y: np.ndarray, how: str = "dfa", lag: int = 1) -> float:
    """Slope of log F against log scale over all scales."""
    taus, fluct = fluctuation_function(y, how, lag)
    slope, _ = _linreg(np.log(taus), np.log(fluct))
    return float(slope)


def fluctuation_breakpoint(y: np.ndarray, how: str, lag: int = 1) -> float:
    """Relative position of the best two-segment break in the log-log fluctuation plot."""
    taus, fluct = fluctuation_function(y, how, lag)
    nt = len(taus)
    if nt < 12:
        return 0.0
    logt, logf = np.log(taus), np.log(fluct)
    min_points = 6
    errs = []
    for i in range(min_points, nt - min_points + 1):
        m1, b1 = _linreg(logt[:i], logf[:i])
        m2, b2 = _linreg(logt[i - 1 :], logf[i - 1 :])
        e1 = np.linalg.norm(logt[:i] * m1 + b1 - logf[:i])
        e2 = np.linalg.norm(logt[i - 1 :] * m2 + b2 - logf[i - 1 :])
        errs.append(e1 + e2)
    errs = np.asarray(errs)
    first = int(np.flatnonzero(errs == errs.min())[0]) + min_points - 1
    return (first + 1) / nt


# -- engine ------------------------------------------------------------------


def extract_canonical22(x) -> tuple[np.ndarray, np.ndarray]:
    """Return (values, flags) aligned with :data:`FEATURE_NAMES`."""
    x = np.asarray(x, dtype=float)
    n_feat = len(FEATURE_NAMES)
    if len(x) < MIN_LENGTH or not np.all(np.isfinite(x)) or x.min() == x.max():
        return np.zeros(n_feat), np.ones(n_feat, bool)
    y = zscore(x)
    ac = autocorrelation(y)
    funcs = {
        "DN_HistogramMode_5": lambda: histogram_mode(y, 5),
        "DN_HistogramMode_10": lambda: histogram_mode(y, 10),
        "CO_f1ecac": lambda: first_1e_crossing(ac),
        "CO_FirstMin_ac": lambda: first_min_ac(ac),
        "CO_HistogramAMI_even_2_5": lambda: histogram_ami(y),
        "CO_trev_1_num": lambda: time_reversibility(y),
        "MD_hrv_classic_pnn40": lambda: pnn40(y),
        "SB_BinaryStats_mean_longstretch1": lambda: longstretch_above_mean(y),
        "SB_TransitionMatrix_3ac_sumdiagcov": lambda: transition_matrix_diag_cov(y),
        "PD_PeriodicityWang_th0_01": lambda: periodicity_wang(y),
        "CO_Embed2_Dist_tau_d_expfit_meandiff": lambda: embed2_expfit_meandiff(y),
        "IN_AutoMutualInfoStats_40_gaussian_fmmi": lambda: gaussian_ami_first_min(y),
        "FC_LocalSimple_mean1_tauresrat": lambda: local_mean_tauresrat(y),
        "DN_OutlierInclude_p_001_mdrmd": lambda: outlier_timing(y, 1),
        "DN_OutlierInclude_n_001_mdrmd": lambda: outlier_timing(y, -1),
        "SP_Summaries_welch_rect_area_5_1": lambda: spectral_area_first_fifth(y),
        "SB_BinaryStats_diff_longstretch0": lambda: longstretch_decreasing(y),
        "SB_MotifThree_quantile_hh": lambda: motif_entropy(y),
        "SC_FluctAnal_2_rsrangefit_50_1_logi_prop_r1": lambda: fluctuation_breakpoint(y, "rsrangefit"),
        "SC_FluctAnal_2_dfa_50_1_2_logi_prop_r1": lambda: fluctuation_breakpoint(y, "dfa", lag=2),
        "SP_Summaries_welch_rect_centroid": lambda: spectral_centroid(y),
        "FC_LocalSimple_mean3_stderr": lambda: local_mean_stderr(y),
    }
    values = np.zeros(n_feat)
    flags = np.zeros(n_feat, bool)
    with np.errstate(all="ignore"):
        for i, name in enumerate(FEATURE_NAMES):
            try:
                v = float(funcs[name]())
            except (ValueError, ZeroDivisionError, IndexError, FloatingPointError, np.linalg.LinAlgError):
                v = np.nan
            if math.isfinite(v):
                values[i] = v
            else:
                flags[i] = True
    return values, flags
