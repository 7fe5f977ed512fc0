"""Satisfaction labels, leave-one-out evaluation, metrics and the report.

Questionnaire file: one ``session_id,i1,i2,i3,i4,i5`` line per session with
integer Likert items in 1..5.
"""

from __future__ import annotations

import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import models, selection
from .features.matrix import FeatureMatrix
from .ingest import StreamFormatError, _read_text

logger = logging.getLogger(__name__)

N_ITEMS = 5
LOW_PERCENTILE = 33.0
MODEL_LABELS = {
    "random_forest": "Random Forest",
    "linear_svm": "Support Vector Machine",
    "logistic_regression": "Logistic Regression",
    "gaussian_nb": "Naive Bayes",
}
ENGINE_LABELS = {"spectral_stat": "spectral_stat", "canonical22": "canonical22", "zones": "zones"}
REPORT_COLUMNS = ("Precision", "Recall", "F1-Score", "Accuracy", "ROC-AUC")


class LeakageWarning(UserWarning):
    """Feature selection was fitted on rows that include the held-out one."""


# -- questionnaire -------------------------------------------------------------


@dataclass(frozen=True)
class QuestionnaireResponse:
    session_id: str
    items: tuple[int, ...]

    def __post_init__(self):
        items = tuple(self.items)
        if len(items) != N_ITEMS:
            raise ValueError(f"{self.session_id}: expected {N_ITEMS} items, got {len(items)}")
        for v in items:
            if isinstance(v, bool) or int(v) != v or not 1 <= v <= 5:
                raise ValueError(f"{self.session_id}: item {v!r} is not an integer in 1..5")
        object.__setattr__(self, "items", tuple(int(v) for v in items))


def parse_questionnaire(source) -> dict[str, QuestionnaireResponse]:
    out = {}
    for lineno, raw in enumerate(_read_text(source).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != N_ITEMS + 1:
            raise StreamFormatError(f"expected session_id and {N_ITEMS} items", lineno)
        try:
            items = tuple(int(p) for p in parts[1:])
            out[parts[0]] = QuestionnaireResponse(parts[0], items)
        except ValueError as exc:
            raise StreamFormatError(str(exc), lineno) from None
    return out


def format_questionnaire(responses: Sequence[QuestionnaireResponse]) -> str:
    return "".join(f"{r.session_id},{','.join(map(str, r.items))}\n" for r in responses)


def average_items(response) -> float:
    items = response.items if isinstance(response, QuestionnaireResponse) else tuple(response)
    if len(items) != N_ITEMS:
        raise ValueError(f"expected {N_ITEMS} items")
    return sum(items) / N_ITEMS


def _sample_var(values: list[Fraction]) -> Fraction:
    m = sum(values) / len(values)
    return sum((v - m) ** 2 for v in values) / (len(values) - 1)


def cronbach_alpha(items) -> float:
    """Internal consistency of an (N respondents, k items) matrix, N-1 variances.

    Worked in exact rational arithmetic, so identical items give exactly 1.0
    and other results are correctly rounded.
    """
    X = np.asarray(items, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError("need at least 2 respondents and 2 items")
    if not np.all(np.isfinite(X)):
        raise ValueError("item scores must be finite")
    rows = [[Fraction(v) for v in r] for r in X.tolist()]
    k = len(rows[0])
    total_var = _sample_var([sum(r) for r in rows])
    if total_var == 0:
        raise ValueError("total score has zero variance")
    item_var = sum(_sample_var([r[j] for r in rows]) for j in range(k))
    return float(Fraction(k, k - 1) * (1 - item_var / total_var))


def low_threshold(scores) -> float:
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("no scores to binarize")
    return float(np.percentile(scores, LOW_PERCENTILE, method="linear"))


def binarize_labels(scores) -> np.ndarray:
    """Class 0 (low satisfaction) iff the score is at or below the 33rd percentile."""
    scores = np.asarray(scores, dtype=float)
    return (scores > low_threshold(scores)).astype(int)


@dataclass
class LabeledDataset:
    matrix: FeatureMatrix
    scores: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.classes = np.asarray(self.classes, dtype=int)
        if not (len(self.scores) == len(self.classes) == self.matrix.shape[0]):
            raise ValueError("scores, classes and matrix rows differ in number")


def label_dataset(matrix: FeatureMatrix, responses: Mapping[str, QuestionnaireResponse]) -> LabeledDataset:
    """Attach scores and classes; rows are reordered by session id."""
    missing = [s for s in matrix.session_ids if s not in responses]
    if missing:
        raise ValueError(f"no questionnaire for sessions {missing}")
    ids = sorted(matrix.session_ids)
    m = matrix.rows(ids)
    scores = np.array([average_items(responses[s]) for s in ids])
    return LabeledDataset(m, scores, binarize_labels(scores))


# -- metrics -----------------------------------------------------------------


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative, ties 0.5."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        return float("nan")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1
        i = j + 1
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float  # percent
    roc_auc: float
    confusion: list  # [[tn, fp], [fn, tp]], rows = true class
    flags: list = field(default_factory=list)

    def as_row(self) -> tuple[float, ...]:
        return (self.precision, self.recall, self.f1, self.accuracy, self.roc_auc)


def confusion_matrix(predictions, labels) -> np.ndarray:
    p = np.asarray(predictions).astype(int)
    y = np.asarray(labels).astype(int)
    cm = np.zeros((2, 2), dtype=int)
    np.add.at(cm, (y, p), 1)
    return cm


def compute_metrics(predictions, scores, labels) -> Metrics:
    """Pooled metrics; per-class precision/recall/F1 are macro-averaged."""
    y = np.asarray(labels).astype(int)
    if len(y) == 0:
        raise ValueError("no predictions to score")
    cm = confusion_matrix(predictions, y)
    flags = []
    prec, rec, f1 = [], [], []
    for c in (0, 1):
        tp = cm[c, c]
        pred_c = cm[:, c].sum()
        true_c = cm[c, :].sum()
        if pred_c == 0:
            flags.append(f"precision_class{c}_undefined")
        if true_c == 0:
            flags.append(f"recall_class{c}_undefined")
        p = tp / pred_c if pred_c else 0.0
        r = tp / true_c if true_c else 0.0
        if p + r == 0:
            flags.append(f"f1_class{c}_undefined")
        prec.append(p)
        rec.append(r)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
    auc = roc_auc(scores, y)
    if not np.isfinite(auc):
        flags.append("roc_auc_undefined")
    return Metrics(
        float(np.mean(prec)),
        float(np.mean(rec)),
        float(np.mean(f1)),
        float(100.0 * np.trace(cm) / cm.sum()),
        auc,
        cm.tolist(),
        flags,
    )


# -- leave-one-out -------------------------------------------------------------


@dataclass
class FoldRecord:
    held_out: str
    selected: tuple[str, ...]
    f_values: list
    mean: np.ndarray
    std: np.ndarray
    hyperparameters: dict | None
    degenerate: bool = False


@dataclass
class LoocvResult:
    engine: str
    model: str
    session_ids: list[str]
    labels: np.ndarray
    predictions: np.ndarray
    scores: np.ndarray
    folds: list[FoldRecord]
    selection_outside: bool = False


def _prepare_folds(X, y, names, k, selection_outside):
    n = len(X)
    if selection_outside:
        warnings.warn(
            "feature selection fitted on all rows, held-out rows included; estimates are optimistic",
            LeakageWarning,
            stacklevel=3,
        )
        shared = selection.select_k_best(X, y, names, k)
    out = []
    for i in range(n):
        train = np.arange(n) != i
        if np.unique(y[train]).size < 2:
            out.append(None)
            continue
        sel = shared if selection_outside else selection.select_k_best(X[train], y[train], names, k)
        out.append(sel)
    return out


def loocv(
    dataset: LabeledDataset,
    model: str | Sequence[models.ModelSpec],
    k: int = selection.DEFAULT_K,
    seed: int = 0,
    selection_outside: bool = False,
) -> LoocvResult:
    """Leave-one-out predictions with selection, scaling and grid search inside each fold.

    ``model`` is a model kind (default grid) or an explicit grid.  A fold whose
    training rows hold one class predicts that class and is flagged.
    """
    grid = models.default_grid(model, seed) if isinstance(model, str) else list(model)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    kind = grid[0].kind
    X = dataset.matrix.values
    y = dataset.classes
    names = dataset.matrix.names
    ids = dataset.matrix.session_ids
    n = len(y)
    if n < 2:
        raise ValueError("leave-one-out needs at least two rows")
    sels = _prepare_folds(X, y, names, k, selection_outside)

    live = [i for i in range(n) if sels[i] is not None]
    train_X = {i: sels[i].transform(X[np.arange(n) != i]) for i in live}
    train_y = {i: y[np.arange(n) != i] for i in live}
    best = models.grid_search_many([grid] * len(live), [train_X[i] for i in live], [train_y[i] for i in live])
    fitted = models.train_many(best, [train_X[i] for i in live], [train_y[i] for i in live])

    preds = np.zeros(n, dtype=int)
    scores = np.zeros(n)
    folds = []
    by_fold = dict(zip(live, zip(best, fitted)))
    for i in range(n):
        sel = sels[i]
        if sel is None:
            only = int(y[np.arange(n) != i][0])
            preds[i] = only
            scores[i] = (2 * only - 1) if kind == "linear_svm" else float(only)
            folds.append(FoldRecord(ids[i], (), [], np.zeros(0), np.zeros(0), None, True))
            logger.warning("fold %s: training rows hold a single class, predicting it", ids[i])
            continue
        spec, mdl = by_fold[i]
        x = sel.transform(X[i : i + 1])
        scores[i] = models.decision_scores(mdl, x)[0]
        preds[i] = int(scores[i] > models.decision_threshold(kind))
        folds.append(
            FoldRecord(ids[i], sel.names, sel.f_values[sel.indices].tolist(), sel.mean, sel.std, dict(spec.hyperparameters))
        )
    return LoocvResult(dataset.matrix.engine, kind, list(ids), y.copy(), preds, scores, folds, selection_outside)


# -- report ------------------------------------------------------------------


@dataclass
class ReportEntry:
    engine: str
    model: str
    metrics: Metrics
    n: int
    degenerate_folds: list = field(default_factory=list)
    selected_features: list = field(default_factory=list)  # [name, F, p] on all rows, reporting only
    selection_frequency: dict = field(default_factory=dict)
    chosen_hyperparameters: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    entries: list[ReportEntry] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = []
        for e in self.entries:
            m = e.metrics
            out.append(
                {
                    "engine": e.engine,
                    "model": e.model,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "accuracy": m.accuracy,
                    "roc_auc": None if not np.isfinite(m.roc_auc) else m.roc_auc,
                    "confusion": m.confusion,
                    "flags": list(m.flags),
                    "n": e.n,
                    "degenerate_folds": list(e.degenerate_folds),
                    "selected_features": [list(r) for r in e.selected_features],
                    "selection_frequency": dict(e.selection_frequency),
                    "chosen_hyperparameters": dict(e.chosen_hyperparameters),
                }
            )
        return {"meta": dict(self.meta), "entries": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvalReport":
        entries = []
        for d in data.get("entries", []):
            auc = d["roc_auc"]
            m = Metrics(d["precision"], d["recall"], d["f1"], d["accuracy"],
                        float("nan") if auc is None else auc, d["confusion"], list(d["flags"]))
            entries.append(
                ReportEntry(d["engine"], d["model"], m, d["n"], list(d["degenerate_folds"]),
                            [list(r) for r in d["selected_features"]], dict(d["selection_frequency"]),
                            dict(d["chosen_hyperparameters"]))
            )
        return cls(entries, dict(data.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def save(self, directory: str | os.PathLike, stem: str = "report") -> tuple[str, str]:
        txt = os.path.join(directory, f"{stem}.txt")
        js = os.path.join(directory, f"{stem}.json")
        with open(txt, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_report(self))
        with open(js, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())
        return txt, js


def report_entry(result: LoocvResult, dataset: LabeledDataset, k: int = selection.DEFAULT_K) -> ReportEntry:
    metrics = compute_metrics(result.predictions, result.scores, result.labels)
    freq: dict[str, int] = {}
    hp_counts: dict[str, int] = {}
    for f in result.folds:
        for name in f.selected:
            freq[name] = freq.get(name, 0) + 1
        if f.hyperparameters is not None:
            key = json.dumps(f.hyperparameters, sort_keys=True)
            hp_counts[key] = hp_counts.get(key, 0) + 1
    top = []
    try:
        sel = selection.select_k_best(dataset.matrix.values, dataset.classes, dataset.matrix.names, k)
        top = [[n, float(sel.f_values[i]), float(sel.p_values[i])] for n, i in zip(sel.names, sel.indices)]
    except ValueError as exc:
        logger.warning("no all-rows feature ranking: %s", exc)
    return ReportEntry(
        result.engine,
        result.model,
        metrics,
        len(result.labels),
        [f.held_out for f in result.folds if f.degenerate],
        top,
        dict(sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))),
        dict(sorted(hp_counts.items())),
    )


def evaluate_all(
    datasets: Mapping[str, LabeledDataset],
    kinds: Sequence[str] = models.KINDS,
    k: int = selection.DEFAULT_K,
    seed: int = 0,
    selection_outside: bool = False,
) -> tuple[EvalReport, dict[tuple[str, str], LoocvResult]]:
    """LOOCV of every model kind on every engine's dataset, rows in (engine, model) order."""
    entries, results = [], {}
    for engine, ds in datasets.items():
        for kind in kinds:
            res = loocv(ds, kind, k, seed, selection_outside)
            results[(engine, kind)] = res
            entries.append(report_entry(res, ds, k))
    meta = {"k": k, "seed": seed, "selection_outside": selection_outside,
            "n": {e: int(ds.matrix.shape[0]) for e, ds in datasets.items()}}
    return EvalReport(entries, meta), results


def _fmt(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.2f}"


def render_report(report: EvalReport) -> str:
    """Plain-text table, one row per (engine, model), metrics to two decimals."""
    header = ("Engine", "Model") + REPORT_COLUMNS
    rows = [
        (ENGINE_LABELS.get(e.engine, e.engine), MODEL_LABELS.get(e.model, e.model)) + tuple(_fmt(v) for v in e.metrics.as_row())
        for e in report.entries
    ]
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    return "\n".join(lines) + "\n"


def parse_report_table(text: str) -> list[tuple[str, str, tuple[float, ...]]]:
    """Inverse of :func:`render_report` for the numeric columns."""
    model_by_label = {v: k for k, v in MODEL_LABELS.items()}
    rows = []
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        parts = line.split("  ")
        cells = [p.strip() for p in parts if p.strip()]
        rows.append((cells[0], model_by_label.get(cells[1], cells[1]), tuple(float(c) for c in cells[2:])))
    return rows
