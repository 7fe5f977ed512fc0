"""ANOVA-F ranking, k-best selection and standardisation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc

DEFAULT_K = 10


def anova_f(column, labels) -> tuple[float, float]:
    """One-way ANOVA F statistic and p-value for a 0/1 grouping.

    Zero within-group variance gives F = +inf and p = 0 when the group means
    differ, F = 0 and p = 1 when they do not.
    """
    F, p = anova_f_columns(np.asarray(column, dtype=float)[:, None], labels)
    return float(F[0]), float(p[0])


def anova_f_columns(X, labels) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels)
    groups = [X[y == c] for c in (0, 1)]
    if any(len(g) == 0 for g in groups):
        raise ValueError("ANOVA needs both classes present")
    if len(y) != len(X) or len(groups[0]) + len(groups[1]) != len(y):
        raise ValueError("labels must be 0/1 and match the rows")
    n, g = len(X), 2
    grand = X.mean(axis=0)
    ssb = sum(len(grp) * (grp.mean(axis=0) - grand) ** 2 for grp in groups)
    ssw = sum(np.sum((grp - grp.mean(axis=0)) ** 2, axis=0) for grp in groups)
    df_b, df_w = g - 1, n - g
    F = np.empty(X.shape[1])
    p = np.empty(X.shape[1])
    zero_w = ssw == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        F[~zero_w] = (ssb[~zero_w] / df_b) / (ssw[~zero_w] / df_w)
    F[zero_w] = np.where(ssb[zero_w] > 0, np.inf, 0.0)
    if df_w > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            p = betainc(df_w / 2, df_b / 2, df_w / (df_w + df_b * F))
    else:
        p[:] = np.nan
    p[np.isinf(F)] = 0.0
    p[F == 0] = 1.0
    return F, p


@dataclass
class SelectionResult:
    names: tuple[str, ...]          # selected, best first
    indices: np.ndarray              # their column positions in the input
    f_values: np.ndarray             # per candidate column, NaN if unselectable
    p_values: np.ndarray
    mean: np.ndarray                 # standardisation statistics of the selected columns
    std: np.ndarray

    def transform(self, X) -> np.ndarray:
        """Pick the selected columns of a full-width matrix and standardise them."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return standardize(X[:, self.indices], self.mean, self.std)


def selectable(X) -> np.ndarray:
    """Columns that are finite everywhere and not constant."""
    X = np.asarray(X, dtype=float)
    finite = np.all(np.isfinite(X), axis=0)
    with np.errstate(invalid="ignore"):
        varying = np.nanmax(X, axis=0) > np.nanmin(X, axis=0) if len(X) else np.zeros(X.shape[1], bool)
    return finite & varying


def select_k_best(X, labels, names: Sequence[str] | None = None, k: int = DEFAULT_K) -> SelectionResult:
    """Keep the k columns with the largest F; ties keep catalog order.

    Non-finite and constant columns are never selected.  Standardisation
    statistics (mean and population std) come from the rows given here.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-d")
    names = tuple(names) if names is not None else tuple(f"f{i}" for i in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise ValueError("names do not match the number of columns")
    if k < 1:
        raise ValueError("k must be positive")
    ok = selectable(X)
    if ok.sum() < k:
        raise ValueError(f"only {int(ok.sum())} usable columns, need {k}")
    F = np.full(X.shape[1], np.nan)
    p = np.full(X.shape[1], np.nan)
    F[ok], p[ok] = anova_f_columns(X[:, ok], labels)
    cand = np.flatnonzero(ok)
    # stable sort on -F keeps catalog order among equal F values
    ranked = cand[np.argsort(-F[cand], kind="stable")][:k]
    mean, std = fit_standardizer(X[:, ranked])
    return SelectionResult(tuple(names[i] for i in ranked), ranked, F, p, mean, std)


def fit_standardizer(X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    if np.any(std == 0):
        raise ValueError("cannot standardise a constant column")
    return mean, std


def standardize(X, mean, std) -> np.ndarray:
    return (np.asarray(X, dtype=float) - mean) / std
