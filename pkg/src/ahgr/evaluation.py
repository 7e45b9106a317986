"""Downstream evaluation of node embeddings.

Clustering: k-means (k-means++ seeding, Lloyd iterations) scored with NMI and
best-match accuracy.  Classification: one-vs-rest linear classifiers with
squared hinge loss and an L2 penalty, scored with accuracy and macro F1.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParameterError


@dataclass(frozen=True)
class ClusteringReport:
    nmi_mean: float
    nmi_std: float
    ac_mean: float
    ac_std: float
    runs: int


@dataclass(frozen=True)
class ClassificationReport:
    ac_mean: float
    ac_std: float
    f1_mean: float
    f1_std: float
    runs: int
    train_fraction: float = 0.1


def _pair(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ParameterError(f"labelings differ in length: {a.size} vs {b.size}")
    return a, b


def contingency(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    T = np.zeros((ai.max(initial=-1) + 1, bi.max(initial=-1) + 1))
    np.add.at(T, (ai, bi), 1)
    return T


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(a, b) -> float:
    """Normalised mutual information, ``2 I(a;b) / (H(a) + H(b))``."""
    T = contingency(a, b)
    if T.size == 0:
        return 1.0
    ha, hb = _entropy(T.sum(axis=1)), _entropy(T.sum(axis=0))
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    P = T / T.sum()
    outer = np.outer(P.sum(axis=1), P.sum(axis=0))
    nz = P > 0
    mi = float((P[nz] * np.log(P[nz] / outer[nz])).sum())
    return float(min(max(2.0 * mi / (ha + hb), 0.0), 1.0))


def best_assignment(cost) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-cost one-to-one assignment of rows to columns."""
    return linear_sum_assignment(np.asarray(cost, dtype=float))


def clustering_accuracy(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    if pred.size == 0:
        return 1.0
    T = contingency(pred, truth)
    size = max(T.shape)
    padded = np.zeros((size, size))
    padded[: T.shape[0], : T.shape[1]] = T
    rows, cols = best_assignment(-padded)
    return float(padded[rows, cols].sum() / pred.size)


def macro_f1(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    scores = []
    for c in np.unique(truth):
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = np.sum((pred != c) & (truth == c))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores)) if scores else 0.0


def _kmeans_pp(X, k, rng) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def _sq_dists(X, centers) -> np.ndarray:
    d = (X * X).sum(axis=1)[:, None] - 2.0 * X @ centers.T + (centers * centers).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans(X, k: int, seed=None, max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm from a k-means++ start.

    Ties go to the lowest centroid index.  An emptied cluster is reseeded with
    the point lying farthest from its current centroid.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    if not np.isfinite(X).all():
        raise ParameterError("k-means input contains non-finite values")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    centers = _kmeans_pp(X, k, rng)
    labels = None
    for _ in range(max_iter):
        D = _sq_dists(X, centers)
        new = D.argmin(axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            own = D[np.arange(n), new]
            far = int(own.argmax())
            new[far] = c
            D[far] = 0.0  # never pick the same point twice
            counts = np.bincount(new, minlength=k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
    return labels


def sse(X, labels) -> float:
    X = np.asarray(X, dtype=float)
    total = 0.0
    for c in np.unique(labels):
        P = X[labels == c]
        total += float(((P - P.mean(axis=0)) ** 2).sum())
    return total


class LinearClassifier:
    """One-vs-rest linear model minimising, per class,

    ``reg_strength / 2 * ||w||^2 + sum_i max(0, 1 - y_i (w . x_i + b))^2``

    by full-batch gradient descent with Armijo backtracking.  The bias is an
    appended constant feature and is penalised like the weights, as LibLinear
    does.  Classes absent from the training data are never predicted.
    """

    def __init__(self, reg_strength: float = 1.0, max_iter: int = 1000, tol: float = 1e-6):
        if not reg_strength > 0:
            raise ParameterError("reg_strength must be > 0")
        self.reg_strength = reg_strength
        self.max_iter = max_iter
        self.tol = tol
        self.classes_: Optional[np.ndarray] = None
        self.W_: Optional[np.ndarray] = None

    @staticmethod
    def _augment(X):
        X = np.asarray(X, dtype=float)
        return np.hstack([X, np.ones((X.shape[0], 1))])

    def _loss_grad(self, w, Xa, s):
        margin = 1.0 - s * (Xa @ w)
        act = np.maximum(margin, 0.0)
        f = 0.5 * self.reg_strength * (w @ w) + (act * act).sum()
        g = self.reg_strength * w - 2.0 * Xa.T @ (act * s)
        return f, g

    def _fit_binary(self, Xa, s):
        w = np.zeros(Xa.shape[1])
        f, g = self._loss_grad(w, Xa, s)
        g0 = np.linalg.norm(g)
        step = 1.0
        for _ in range(self.max_iter):
            gg = g @ g
            if np.sqrt(gg) <= self.tol * max(g0, 1.0):
                break
            while True:
                w_new = w - step * g
                f_new, g_new = self._loss_grad(w_new, Xa, s)
                if f_new <= f - 0.5 * step * gg or step < 1e-12:
                    break
                step *= 0.5
            if abs(f - f_new) <= 1e-12 * max(abs(f), 1.0):
                w, f, g = w_new, f_new, g_new
                break
            w, f, g = w_new, f_new, g_new
            step *= 2.0
        return w

    def fit(self, X, y):
        y = np.asarray(y)
        Xa = self._augment(X)
        self.classes_ = np.unique(y)
        if self.classes_.size == 1:
            self.W_ = np.zeros((Xa.shape[1], 1))
            return self
        self.W_ = np.column_stack(
            [self._fit_binary(Xa, np.where(y == c, 1.0, -1.0)) for c in self.classes_]
        )
        return self

    def decision_function(self, X):
        return self._augment(X) @ self.W_

    def predict(self, X):
        if self.classes_ is None:
            raise ParameterError("classifier is not fitted")
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]


def train_linear_classifier(X_train, y_train, reg_strength: float = 1.0) -> LinearClassifier:
    return LinearClassifier(reg_strength).fit(X_train, y_train)


def predict(model: LinearClassifier, X) -> np.ndarray:
    return model.predict(X)


def evaluate_clustering(Y, truth, k: Optional[int] = None, runs: int = 100, seed: int = 0) -> ClusteringReport:
    truth = np.asarray(truth)
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != truth.size:
        raise ParameterError(f"embedding has {Y.shape[0]} rows, labels {truth.size}")
    if k is None:
        k = len(np.unique(truth))
    nmis, acs = [], []
    for r in range(runs):
        pred = kmeans(Y, k, np.random.default_rng([seed, r]))
        nmis.append(nmi(pred, truth))
        acs.append(clustering_accuracy(pred, truth))
    return ClusteringReport(float(np.mean(nmis)), float(np.std(nmis)),
                            float(np.mean(acs)), float(np.std(acs)), runs)


def evaluate_classification(Y, truth, train_fraction: float = 0.1, runs: int = 100,
                            seed: int = 0, reg_strength: float = 1.0) -> ClassificationReport:
    truth = np.asarray(truth)
    Y = np.asarray(Y, dtype=float)
    n = truth.size
    if Y.shape[0] != n:
        raise ParameterError(f"embedding has {Y.shape[0]} rows, labels {n}")
    if not 0 < train_fraction < 1:
        raise ParameterError("train_fraction must lie in (0, 1)")
    n_train = min(max(1, int(round(train_fraction * n))), n - 1)
    acs, f1s = [], []
    for r in range(runs):
        perm = np.random.default_rng([seed, r]).permutation(n)
        tr, te = perm[:n_train], perm[n_train:]
        model = train_linear_classifier(Y[tr], truth[tr], reg_strength)
        pred = model.predict(Y[te])
        acs.append(float(np.mean(pred == truth[te])))
        f1s.append(macro_f1(pred, truth[te]))
    return ClassificationReport(float(np.mean(acs)), float(np.std(acs)),
                                float(np.mean(f1s)), float(np.std(f1s)), runs, train_fraction)


def write_report(path, report) -> None:
    """CSV with header ``metric,mean,std,runs``."""
    d = asdict(report)
    names = [k[: -len("_mean")] for k in d if k.endswith("_mean")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "mean", "std", "runs"])
        for m in names:
            w.writerow([m, "%.6g" % d[m + "_mean"], "%.6g" % d[m + "_std"], d["runs"]])
