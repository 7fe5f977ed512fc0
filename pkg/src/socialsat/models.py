"""Four binary classifiers written from scratch plus grid search.

* logistic regression: L2-penalised negative log-likelihood
  ``sum_i logloss_i + strength/2 * |w|^2`` (intercept not penalised),
  minimised by accelerated gradient descent with adaptive restart until the
  gradient norm drops below 1e-6 or 10,000 iterations pass;
* linear SVM: ``sum_i hinge_i + strength/2 * |w|^2`` by full-batch
  subgradient descent with step ``eta0 / sqrt(t)`` for a fixed number of
  iterations, keeping the iterate with the lowest objective;
* Gaussian naive Bayes: per-class means and variances, variances smoothed by
  ``epsilon * max feature variance``;
* random forest: bootstrap trees grown on Gini impurity with sqrt(d)
  candidate features per split and midpoint thresholds, seeded.

Labels are 0/1.  Linear solvers run on a batch of independent problems at
once; a single fit is a batch of one.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

KINDS = ("logistic_regression", "linear_svm", "gaussian_nb", "random_forest")

LOGISTIC_TOL = 1e-6
LOGISTIC_MAX_ITER = 10_000
SVM_ITERATIONS = 2_000
DEFAULT_STRENGTHS = (0.01, 0.1, 1.0, 10.0)
DEFAULT_DEPTHS = (2, 4, None)
DEFAULT_TREES = 100
DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True)
class ModelSpec:
    """One point of a model family's hyperparameter space."""

    kind: str
    hyperparameters: Mapping = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose from {KINDS}")
        hp = dict(self.hyperparameters)
        if self.kind in ("logistic_regression", "linear_svm"):
            hp.setdefault("strength", 1.0)
        elif self.kind == "gaussian_nb":
            hp.setdefault("epsilon", DEFAULT_EPSILON)
        else:
            hp.setdefault("n_trees", DEFAULT_TREES)
            hp.setdefault("max_depth", None)
            hp.setdefault("bootstrap", True)
            if self.seed is None:
                raise ValueError("a random forest needs a seed")
        for key, val in hp.items():
            if isinstance(val, bool) or val is None:
                continue
            if not val > 0:
                raise ValueError(f"{self.kind}: {key} must be positive, got {val}")
        object.__setattr__(self, "hyperparameters", hp)

    def with_params(self, **params) -> "ModelSpec":
        return ModelSpec(self.kind, {**self.hyperparameters, **params}, self.seed)

    def complexity(self) -> tuple:
        """Sort key: smaller is simpler (stronger regularisation, fewer or shallower trees)."""
        hp = self.hyperparameters
        if self.kind in ("logistic_regression", "linear_svm"):
            return (-hp["strength"],)
        if self.kind == "gaussian_nb":
            return (-hp["epsilon"],)
        depth = hp["max_depth"]
        return (hp["n_trees"], math.inf if depth is None else depth)


def default_grid(kind: str, seed: int | None = None) -> list[ModelSpec]:
    """Candidate specs of a model family, simplest first."""
    if kind in ("logistic_regression", "linear_svm"):
        grid = [ModelSpec(kind, {"strength": s}) for s in DEFAULT_STRENGTHS]
    elif kind == "gaussian_nb":
        grid = [ModelSpec(kind, {"epsilon": DEFAULT_EPSILON})]
    elif kind == "random_forest":
        grid = [ModelSpec(kind, {"n_trees": DEFAULT_TREES, "max_depth": d}, seed) for d in DEFAULT_DEPTHS]
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return sorted(grid, key=ModelSpec.complexity)


@dataclass
class TrainedModel:
    spec: ModelSpec
    params: dict

    @property
    def kind(self) -> str:
        return self.spec.kind

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hyperparameters": dict(self.spec.hyperparameters),
            "seed": self.spec.seed,
            "params": {k: np.asarray(v).tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainedModel":
        spec = ModelSpec(data["kind"], data["hyperparameters"], data.get("seed"))
        params = {}
        for k, v in data["params"].items():
            arr = np.asarray(v)
            params[k] = arr.astype(int) if k in _INT_PARAMS else arr.astype(float)
        return cls(spec, params)


_INT_PARAMS = ("feature", "left", "right", "roots")


def _check_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValueError("training labels contain a single class")
    return y.astype(float)


# -- logistic regression -----------------------------------------------------


def logistic_objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray, strength: float) -> float:
    """Penalised negative log-likelihood; ``theta = [w..., b]``."""
    z = X @ theta[:-1] + theta[-1]
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * strength * theta[:-1] @ theta[:-1])


def logistic_gradient(theta: np.ndarray, X: np.ndarray, y: np.ndarray, strength: float) -> np.ndarray:
    z = X @ theta[:-1] + theta[-1]
    r = sigmoid(z) - y
    return np.concatenate([X.T @ r + strength * theta[:-1], [r.sum()]])


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _augment(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    ones = np.ones(X.shape[:-1] + (1,))
    return np.concatenate([X, ones], axis=-1) * w[..., None]


def _fit_logistic_batch(X, y, w, strength, tol=LOGISTIC_TOL, max_iter=LOGISTIC_MAX_ITER):
    """X (B,n,d), y (B,n), row inclusion weights w (B,n) in {0,1}, strength (B,)."""
    B, n, d = X.shape
    Xa = _augment(X, w)
    reg = np.zeros((B, d + 1))
    reg[:, :d] = strength[:, None]
    lip = np.linalg.norm(Xa, ord=2, axis=(1, 2)) ** 2 / 4.0 + strength
    step = (1.0 / lip)[:, None]

    def grad(th):
        z = np.matmul(Xa, th[:, :, None])[:, :, 0]
        r = (sigmoid(z) - y) * w
        return np.matmul(r[:, None, :], Xa)[:, 0, :] + reg * th

    theta = np.zeros((B, d + 1))
    v = theta.copy()
    t = np.ones(B)
    done = np.zeros(B, bool)
    result = np.zeros((B, d + 1))
    iters = np.full(B, max_iter)
    for it in range(max_iter):
        g = grad(v)
        gnorm = np.linalg.norm(g, axis=1)
        newly = (gnorm < tol) & ~done
        result[newly] = v[newly]
        iters[newly] = it
        done |= newly
        if done.all():
            break
        nxt = v - step * g
        # restart momentum when it points uphill
        restart = np.einsum("bi,bi->b", g, nxt - theta) > 0
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        mom = np.where(restart, 0.0, (t - 1) / t_next)
        t = np.where(restart, 1.0, t_next)
        v = nxt + mom[:, None] * (nxt - theta)
        theta = nxt
    result[~done] = v[~done]
    return result, iters


# -- linear SVM --------------------------------------------------------------


def svm_objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray, strength: float) -> float:
    s = 2 * np.asarray(y, dtype=float) - 1
    m = X @ theta[:-1] + theta[-1]
    return float(np.sum(np.maximum(0.0, 1 - s * m)) + 0.5 * strength * theta[:-1] @ theta[:-1])


def _fit_svm_batch(X, y, w, strength, iterations=SVM_ITERATIONS):
    B, n, d = X.shape
    Xa = _augment(X, w)
    s = 2 * y - 1
    n_rows = w.sum(axis=1)
    radius = np.sqrt(np.max(np.sum(Xa**2, axis=2), axis=1))
    # |w*|^2 <= 2 n / strength bounds the distance to travel; eta0 = distance / gradient scale
    dist = np.sqrt(2 * n_rows / strength)
    eta0 = dist / (n_rows * radius + strength * dist)
    theta = np.zeros((B, d + 1))
    best = theta.copy()
    best_obj = np.full(B, np.inf)
    for t in range(1, iterations + 1):
        m = np.matmul(Xa, theta[:, :, None])[:, :, 0]
        slack = (1 - s * m) * w
        obj = np.sum(np.maximum(slack, 0), axis=1) + 0.5 * strength * np.sum(theta[:, :d] ** 2, axis=1)
        better = obj < best_obj
        best[better] = theta[better]
        best_obj[better] = obj[better]
        active = (slack > 0) * s * w
        g = -np.matmul(active[:, None, :], Xa)[:, 0, :]
        g[:, :d] += strength[:, None] * theta[:, :d]
        theta = theta - (eta0 / math.sqrt(t))[:, None] * g
    m = np.matmul(Xa, theta[:, :, None])[:, :, 0]
    obj = np.sum(np.maximum((1 - s * m) * w, 0), axis=1) + 0.5 * strength * np.sum(theta[:, :d] ** 2, axis=1)
    better = obj < best_obj
    best[better] = theta[better]
    return best


# -- Gaussian naive Bayes ------------------------------------------------------


def _fit_nb(X, y, epsilon):
    smooth = epsilon * np.max(np.var(X, axis=0))
    if smooth == 0:
        smooth = epsilon
    means, variances, priors = [], [], []
    for c in (0, 1):
        Xc = X[y == c]
        means.append(Xc.mean(axis=0))
        variances.append(Xc.var(axis=0) + smooth)
        priors.append(len(Xc) / len(X))
    return {"means": np.array(means), "variances": np.array(variances), "priors": np.array(priors)}


def _nb_scores(params, X):
    ll = []
    for c in (0, 1):
        mu, var = params["means"][c], params["variances"][c]
        ll.append(np.log(params["priors"][c]) - 0.5 * np.sum(np.log(2 * np.pi * var) + (X - mu) ** 2 / var, axis=1))
    # P(class 1) = 1 / (1 + exp(ll0 - ll1))
    return sigmoid(ll[1] - ll[0])


# -- random forest -------------------------------------------------------------


def _grow_forest(X, y, counts, max_depth, n_candidates, rng):
    """Grow all trees of a forest level by level.

    ``counts`` (T, n) holds bootstrap multiplicities.  A node becomes a leaf
    when it is pure, holds fewer than two samples, sits at ``max_depth`` or
    none of its candidate features separates its samples.  Among candidate
    splits the lowest weighted Gini impurity wins; ties go to the earlier
    drawn feature, then the lower threshold.
    """
    T, n = counts.shape
    d = X.shape[1]
    order = np.argsort(X, axis=0, kind="stable").T  # (d, n)
    xs = np.take_along_axis(X.T, order, axis=1)
    yk = y.astype(np.int64)
    cap = T * (2 * n + 1)
    feature = np.full(cap, -1)
    threshold = np.zeros(cap)
    left = np.full(cap, -1)
    right = np.full(cap, -1)
    value = np.zeros(cap)
    tree_of = np.zeros(cap, dtype=int)
    tree_of[:T] = np.arange(T)
    n_nodes = T
    node_of = np.where(counts > 0, np.arange(T)[:, None], -1)
    active = np.arange(T)
    depth = 0
    while active.size:
        trees = tree_of[active]
        wts = np.where(node_of[trees] == active[:, None], counts[trees], 0)
        c1 = wts @ yk
        tot = wts.sum(axis=1)
        c0 = tot - c1
        value[active] = c1 > c0
        if max_depth is not None and depth >= max_depth:
            break
        cand = np.flatnonzero((c0 > 0) & (c1 > 0) & (tot >= 2))
        if not cand.size:
            break
        M = len(cand)
        feats = np.argsort(rng.random((M, d)), axis=1)[:, :n_candidates]  # (M, m)
        idx = order[feats]  # (M, m, n)
        w_s = np.take_along_axis(wts[cand][:, None, :], idx, axis=2)
        y_s = yk[idx]
        x_s = xs[feats]
        lt = np.cumsum(w_s, axis=2)
        l1 = np.cumsum(w_s * y_s, axis=2)
        l0 = lt - l1
        rt = lt[..., -1:] - lt
        r1 = l1[..., -1:] - l1
        r0 = rt - r1
        # position of the next in-node sample after each position
        pos = np.where(w_s > 0, np.arange(n), n)
        nxt = np.minimum.accumulate(pos[..., ::-1], axis=2)[..., ::-1]
        nxt = np.concatenate([nxt[..., 1:], np.full(nxt.shape[:-1] + (1,), n)], axis=2)
        x_next = np.take_along_axis(x_s, np.minimum(nxt, n - 1), axis=2)
        valid = (w_s > 0) & (nxt < n) & (x_next > x_s)
        with np.errstate(invalid="ignore", divide="ignore"):
            imp = lt - (l0**2 + l1**2) / lt + rt - (r0**2 + r1**2) / rt
        imp = np.where(valid, imp, np.inf).reshape(M, -1)
        best = np.argmin(imp, axis=1)
        ok = np.isfinite(imp[np.arange(M), best])
        if not ok.any():
            break
        bf, bp = np.divmod(best[ok], n)
        rows = np.flatnonzero(ok)
        nodes = active[cand[rows]]
        S = len(nodes)
        li = n_nodes + 2 * np.arange(S)
        ri = li + 1
        n_nodes += 2 * S
        feature[nodes] = feats[rows, bf]
        threshold[nodes] = 0.5 * (x_s[rows, bf, bp] + x_next[rows, bf, bp])
        left[nodes] = li
        right[nodes] = ri
        tree_of[li] = tree_of[nodes]
        tree_of[ri] = tree_of[nodes]
        is_split = np.zeros(cap, bool)
        is_split[nodes] = True
        moving = (node_of >= 0) & is_split[np.maximum(node_of, 0)]
        cur = node_of[moving]
        cols = np.nonzero(moving)[1]
        go_left = X[cols, feature[cur]] <= threshold[cur]
        node_of[moving] = np.where(go_left, left[cur], right[cur])
        active = np.stack([li, ri], axis=1).ravel()
        depth += 1
    return {
        "feature": feature[:n_nodes].copy(),
        "threshold": threshold[:n_nodes].copy(),
        "left": left[:n_nodes].copy(),
        "right": right[:n_nodes].copy(),
        "value": value[:n_nodes].copy(),
        "roots": np.arange(T),
    }


def _forest_scores(params, X):
    feature, threshold = params["feature"], params["threshold"]
    left, right, value = params["left"], params["right"], params["value"]
    m = len(X)
    node = np.repeat(params["roots"][:, None], m, axis=1)
    cols = np.broadcast_to(np.arange(m), node.shape)
    while True:
        f = feature[node]
        internal = f >= 0
        if not internal.any():
            break
        xv = X[cols, np.maximum(f, 0)]
        step = np.where(xv <= threshold[node], left[node], right[node])
        node = np.where(internal, step, node)
    return value[node].mean(axis=0)


def n_split_candidates(d: int) -> int:
    return max(1, int(math.sqrt(d)))


def _fit_forest(spec: ModelSpec, X, y):
    hp = spec.hyperparameters
    rng = np.random.default_rng(spec.seed)
    T, n = int(hp["n_trees"]), len(X)
    if hp["bootstrap"]:
        draws = rng.integers(0, n, size=(T, n))
        counts = np.zeros((T, n), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(T), n), draws.ravel()), 1)
    else:
        counts = np.ones((T, n), dtype=np.int64)
    depth = hp["max_depth"]
    return _grow_forest(X, y, counts, None if depth is None else int(depth), n_split_candidates(X.shape[1]), rng)


# -- public API ----------------------------------------------------------------


def train(spec: ModelSpec, X, y) -> TrainedModel:
    return train_many([spec], [X], [y])[0]


def train_many(specs: Sequence[ModelSpec], Xs: Sequence, ys: Sequence) -> list[TrainedModel]:
    """Train independent problems; linear models sharing a width are solved as one batch."""
    if not (len(specs) == len(Xs) == len(ys)):
        raise ValueError("specs, feature matrices and labels differ in number")
    Xs = [np.asarray(X, dtype=float) for X in Xs]
    ys = [_check_labels(y) for y in ys]
    for X, y in zip(Xs, ys):
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("feature matrix and labels disagree in shape")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature matrix contains non-finite values")
    out: list[TrainedModel | None] = [None] * len(specs)
    groups: dict[tuple, list[int]] = {}
    for i, spec in enumerate(specs):
        if spec.kind in ("logistic_regression", "linear_svm"):
            groups.setdefault((spec.kind, Xs[i].shape[1]), []).append(i)
        elif spec.kind == "gaussian_nb":
            out[i] = TrainedModel(spec, _fit_nb(Xs[i], ys[i], spec.hyperparameters["epsilon"]))
        else:
            out[i] = TrainedModel(spec, _fit_forest(spec, Xs[i], ys[i]))
    for (kind, d), members in groups.items():
        n = max(len(Xs[i]) for i in members)
        B = len(members)
        X = np.zeros((B, n, d))
        y = np.zeros((B, n))
        w = np.zeros((B, n))
        for b, i in enumerate(members):
            m = len(Xs[i])
            X[b, :m], y[b, :m], w[b, :m] = Xs[i], ys[i], 1.0
        strength = np.array([specs[i].hyperparameters["strength"] for i in members], dtype=float)
        if kind == "logistic_regression":
            theta, iters = _fit_logistic_batch(X, y, w, strength)
        else:
            theta = _fit_svm_batch(X, y, w, strength)
            iters = np.full(B, SVM_ITERATIONS)
        for b, i in enumerate(members):
            out[i] = TrainedModel(
                specs[i], {"weights": theta[b, :d].copy(), "intercept": np.array(theta[b, d]), "iterations": np.array(float(iters[b]))}
            )
    return out


def decision_scores(model: TrainedModel, X) -> np.ndarray:
    """Class-1 probability (logistic, NB), signed margin (SVM) or vote fraction (forest)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = model.params
    if model.kind == "logistic_regression":
        return sigmoid(X @ p["weights"] + p["intercept"])
    if model.kind == "linear_svm":
        return X @ p["weights"] + p["intercept"]
    if model.kind == "gaussian_nb":
        return _nb_scores(p, X)
    return _forest_scores(p, X)


def decision_threshold(kind: str) -> float:
    return 0.0 if kind == "linear_svm" else 0.5


def predict(model: TrainedModel, X) -> np.ndarray:
    return (decision_scores(model, X) > decision_threshold(model.kind)).astype(int)


def stratified_folds(y, n_folds: int = 3) -> np.ndarray:
    """Fold of each row: its position within its class, modulo ``n_folds``."""
    y = np.asarray(y)
    folds = np.zeros(len(y), dtype=int)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        folds[idx] = np.arange(len(idx)) % n_folds
    return folds


def grid_search(grid: Sequence[ModelSpec], X, y, n_folds: int = 3) -> ModelSpec:
    """Best spec by inner stratified ``n_folds``-fold accuracy; ties go to the simplest."""
    return grid_search_many([grid], [X], [y], n_folds)[0]


def grid_search_many(grids, Xs, ys, n_folds: int = 3) -> list[ModelSpec]:
    specs, tr_X, tr_y, tests = [], [], [], []
    correct = []
    for p, (grid, X, y) in enumerate(zip(grids, Xs, ys)):
        if not grid:
            raise ValueError("empty hyperparameter grid")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).astype(int)
        ordered = sorted(grid, key=ModelSpec.complexity)
        correct.append(np.zeros(len(ordered)))
        folds = stratified_folds(y, n_folds)
        for g, spec in enumerate(ordered):
            for f in range(n_folds):
                tr, te = folds != f, folds == f
                if not te.any():
                    continue
                if np.unique(y[tr]).size < 2:
                    # nothing to learn: predict the only class seen
                    correct[p][g] += np.sum(y[te] == y[tr][0]) if tr.any() else 0
                    continue
                specs.append(spec)
                tr_X.append(X[tr])
                tr_y.append(y[tr])
                tests.append((p, g, X[te], y[te]))
    models = train_many(specs, tr_X, tr_y)
    for model, (p, g, Xt, yt) in zip(models, tests):
        correct[p][g] += np.sum(predict(model, Xt) == yt)
    out = []
    for grid, c in zip(grids, correct):
        ordered = sorted(grid, key=ModelSpec.complexity)
        out.append(ordered[int(np.argmax(c))])
    return out


def save_model(model: TrainedModel, path: str | os.PathLike, extra: Mapping | None = None) -> None:
    """Write the model and optional extras (selected features, standardisation) as JSON."""
    data = model.to_dict()
    if extra:
        data["extra"] = _jsonable(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> tuple[TrainedModel, dict]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return TrainedModel.from_dict(data), data.get("extra", {})


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
