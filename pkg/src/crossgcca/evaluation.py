"""Downstream metrics for learned embeddings.

K-means with Hungarian-matched accuracy, NMI and ARI for the unsupervised
test; a one-vs-rest linear SVM and kNN for the supervised test.
"""

from dataclasses import asdict, dataclass
import warnings

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError, MetricDegeneracyWarning
from .linear_cca import total_corr_coef


@dataclass
class MetricsRecord:
    method: str
    lam: float | None
    seed: int
    acc: float
    nmi: float
    ari: float
    cla_acc: float
    corr_coef: float

    def as_dict(self):
        return asdict(self)


def embed(encodings, view=None):
    """Average the per-view encodings, or pick a single view's encoding."""
    if view is not None:
        return np.asarray(encodings[view])
    return np.mean(np.stack([np.asarray(z) for z in encodings]), axis=0)


def _kmeans_pp(x, k, rng):
    m = x.shape[0]
    centers = [x[rng.integers(m)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(m) if total <= 0 else rng.choice(m, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _sq_dists(x, centers):
    return np.sum(x * x, axis=1)[:, None] - 2.0 * x @ centers.T + np.sum(centers * centers, axis=1)[None, :]


def _lloyd(x, centers, max_iter):
    prev_obj = np.inf
    labels = None
    for _ in range(max_iter):
        d = np.maximum(_sq_dists(x, centers), 0.0)
        new_labels = np.argmin(d, axis=1)
        obj = float(d[np.arange(x.shape[0]), new_labels].sum())
        # the assignment step never increases the objective
        assert obj <= prev_obj * (1 + 1e-12) + 1e-12, "k-means objective increased"
        prev_obj = obj
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(centers.shape[0]):
            members = labels == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                far = int(np.argmax(d[np.arange(x.shape[0]), labels]))
                centers[c] = x[far]
                labels = labels.copy()
                labels[far] = c
    d = np.maximum(_sq_dists(x, centers), 0.0)
    labels = np.argmin(d, axis=1)
    return labels, float(np.sum((x - centers[labels]) ** 2))


def kmeans(x, k, restarts=10, rng=None, max_iter=300):
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding.

    Returns ``(labels, objective)`` with objective the within-cluster sum of squares.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(rng)
    if k < 1 or k > np.unique(x, axis=0).shape[0]:
        raise InvalidInputError("k must not exceed the number of distinct rows")
    best = None
    for _ in range(restarts):
        labels, obj = _lloyd(x, _kmeans_pp(x, k, rng), max_iter)
        if best is None or obj < best[1]:
            best = (labels, obj)
    return best


def _check_labels(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidInputError("prediction and truth lengths differ")
    return pred, truth


def contingency(pred, truth):
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def clustering_accuracy(pred, truth, k):
    """Fraction correct under the best one-to-one matching of cluster ids to labels."""
    pred, truth = _check_labels(pred, truth)
    if pred.size and (pred.min() < 0 or truth.min() < 0 or pred.max() >= k or truth.max() >= k):
        raise InvalidInputError(f"labels must lie in [0, {k})")
    w = np.zeros((k, k), dtype=np.int64)
    np.add.at(w, (pred, truth), 1)
    rows, cols = linear_sum_assignment(-w)
    return float(w[rows, cols].sum() / max(pred.size, 1))


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth):
    """Mutual information normalized by the arithmetic mean of the two entropies."""
    pred, truth = _check_labels(pred, truth)
    table = contingency(pred, truth).astype(float)
    h_pred, h_true = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if h_true == 0.0 or h_pred == 0.0:
        if h_true == 0.0 and h_pred == 0.0:
            return 1.0
        if h_true == 0.0:
            warnings.warn("ground truth has a single class; NMI set to 0", MetricDegeneracyWarning, stacklevel=2)
        return 0.0
    n = table.sum()
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / n ** 2
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    return float(np.clip(mi / (0.5 * (h_pred + h_true)), 0.0, 1.0))


def _comb2(x):
    return x * (x - 1) / 2.0


def ari(pred, truth, clamp=True):
    """Adjusted Rand index; negative values are floored at 0 when ``clamp``."""
    pred, truth = _check_labels(pred, truth)
    table = contingency(pred, truth).astype(float)
    n = table.sum()
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n) if n > 1 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    value = (sum_ij - expected) / (max_index - expected)
    if clamp and value < 0:
        warnings.warn(f"ARI {value:.4f} < 0 floored at 0", MetricDegeneracyWarning, stacklevel=2)
        return 0.0
    return float(value)


class LinearSVM:
    """One-vs-rest linear SVM trained by full-batch subgradient descent on the hinge loss.

    Per class the objective is mean_i max(0, 1 - y_i (w.x_i + b)) + ||w||^2 / (2 C n).
    Features are standardized with training statistics; the returned weights
    are the Polyak average of the iterates, which is deterministic.
    """

    def __init__(self, c=1.0, epochs=500, step=0.5):
        self.c = c
        self.epochs = epochs
        self.step = step

    def fit(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise InvalidInputError("need at least two classes to train an SVM")
        self.mu_ = x.mean(axis=0)
        sd = x.std(axis=0)
        self.sd_ = np.where(sd > 0, sd, 1.0)
        xs = (x - self.mu_) / self.sd_
        n, d = xs.shape
        alpha = 1.0 / (self.c * n)
        targets = np.where(y[:, None] == self.classes_[None, :], 1.0, -1.0)
        w = np.zeros((d, self.classes_.size))
        b = np.zeros(self.classes_.size)
        w_avg, b_avg = np.zeros_like(w), np.zeros_like(b)
        for t in range(1, self.epochs + 1):
            margins = targets * (xs @ w + b)
            active = (margins < 1.0) * targets
            gw = -xs.T @ active / n + alpha * w
            gb = -active.sum(axis=0) / n
            eta = self.step / np.sqrt(t)
            w -= eta * gw
            b -= eta * gb
            w_avg += (w - w_avg) / t
            b_avg += (b - b_avg) / t
        self.coef_, self.intercept_ = w_avg, b_avg
        return self

    def decision_function(self, x):
        return ((np.asarray(x) - self.mu_) / self.sd_) @ self.coef_ + self.intercept_

    def predict(self, x):
        return self.classes_[np.argmax(self.decision_function(x), axis=1)]


def linear_svm(train_x, train_y, test_x, test_y, c=1.0, epochs=500):
    test_y = np.asarray(test_y)
    classes = np.unique(train_y)
    if not np.all(np.isin(test_y, classes)):
        raise InvalidInputError("a test class is absent from the training labels")
    clf = LinearSVM(c=c, epochs=epochs).fit(train_x, train_y)
    return float(np.mean(clf.predict(test_x) == test_y))


def knn_predict(train_x, train_y, test_x, k=5):
    """Euclidean k-nearest-neighbour majority vote; ties go to the nearest tied label."""
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    if train_x.shape[0] == 0:
        raise InvalidInputError("training set is empty")
    k = min(k, train_x.shape[0])
    d = np.maximum(_sq_dists(np.asarray(test_x, dtype=np.float64), train_x), 0.0)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    preds = []
    for row in order:
        neigh = train_y[row]
        values, counts = np.unique(neigh, return_counts=True)
        tied = set(values[counts == counts.max()])
        preds.append(next(lbl for lbl in neigh if lbl in tied))
    return np.array(preds)


def knn(train_x, train_y, test_x, test_y, k=5):
    return float(np.mean(knn_predict(train_x, train_y, test_x, k) == np.asarray(test_y)))


def evaluate_embeddings(train_emb, train_y, test_emb, test_y, test_views_emb, n_clusters, rng,
                        method="", lam=None, seed=0, svm_c=1.0):
    """Compute one ``MetricsRecord`` from averaged and per-view embeddings."""
    labels, _ = kmeans(test_emb, n_clusters, restarts=10, rng=rng)
    k = max(n_clusters, int(np.max(test_y)) + 1)
    return MetricsRecord(
        method=method,
        lam=lam,
        seed=seed,
        acc=clustering_accuracy(labels, test_y, k),
        nmi=nmi(labels, test_y),
        ari=ari(labels, test_y),
        cla_acc=linear_svm(train_emb, train_y, test_emb, test_y, c=svm_c),
        corr_coef=total_corr_coef(test_views_emb),
    )
