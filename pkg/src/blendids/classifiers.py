"""First-level learners: Gaussian naive Bayes, linear SVM and a CART tree.

All three share the :class:`BaseModel` surface (``predict`` and
``predict_scores``). Wherever an argmax is taken, ties go to the lowest class
id, which is what ``np.argmax`` does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import FitError, PreconditionError, ShapeError

NAIVE_BAYES = "naive_bayes"
SVM = "svm"
DECISION_TREE = "decision_tree"


def as_matrix(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ShapeError(f"expected rows of {n_features} features, got array of shape {X.shape}")
    return X


class BaseModel:
    """Common surface of the fitted first-level classifiers."""

    kind: str
    n_classes: int
    n_features: int

    def predict_scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_scores(X), axis=1)

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_classes(train: Dataset, what: str) -> None:
    train.check_clean()
    if train.n_samples == 0:
        raise FitError(f"{what}: empty training set")
    counts = train.class_counts()
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise FitError(f"{what}: class(es) {missing.tolist()} absent from the training data")


# ---------------------------------------------------------------------------
# Gaussian naive Bayes
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class NaiveBayesModel(BaseModel):
    priors: np.ndarray  # (C,)
    means: np.ndarray  # (C, d)
    variances: np.ndarray  # (C, d)
    variance_floor: float = 1e-9
    kind: str = field(default=NAIVE_BAYES, init=False)

    @property
    def n_classes(self) -> int:
        return self.priors.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def log_posteriors(self, X) -> np.ndarray:
        """Unnormalised log posteriors, one column per class."""
        X = as_matrix(X, self.n_features)
        diff = X[:, None, :] - self.means[None, :, :]
        ll = -0.5 * np.log(2.0 * np.pi * self.variances)[None] - diff**2 / (2.0 * self.variances[None])
        return np.log(self.priors)[None, :] + ll.sum(axis=2)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.log_posteriors(X), axis=1)

    def predict_scores(self, X) -> np.ndarray:
        lp = self.log_posteriors(X)
        lp = lp - lp.max(axis=1, keepdims=True)
        p = np.exp(lp)
        return p / p.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "variance_floor": self.variance_floor,
        }

    @classmethod
    def from_dict(cls, data) -> "NaiveBayesModel":
        return cls(
            np.asarray(data["priors"], dtype=np.float64),
            np.asarray(data["means"], dtype=np.float64).reshape(len(data["priors"]), -1),
            np.asarray(data["variances"], dtype=np.float64).reshape(len(data["priors"]), -1),
            float(data["variance_floor"]),
        )


def fit_naive_bayes(train: Dataset, variance_floor: float = 1e-9) -> NaiveBayesModel:
    """Per-class Gaussian ML estimates; variances are clamped below at ``variance_floor``."""
    if not variance_floor > 0:
        raise PreconditionError("variance_floor must be positive")
    _check_classes(train, "naive Bayes")
    X, y, C = train.features, train.labels, train.n_classes
    counts = np.bincount(y, minlength=C)
    means = np.stack([X[y == k].mean(axis=0) for k in range(C)])
    variances = np.stack([X[y == k].var(axis=0) for k in range(C)])
    return NaiveBayesModel(
        priors=counts / counts.sum(),
        means=means,
        variances=np.maximum(variances, variance_floor),
        variance_floor=float(variance_floor),
    )


# ---------------------------------------------------------------------------
# Linear SVM
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SvmModel(BaseModel):
    """Linear soft-margin SVM; one weight row per binary problem.

    Binary data has a single problem (class 1 positive); ``C > 2`` trains one
    problem per class, one-vs-rest.
    """

    weights: np.ndarray  # (P, d)
    biases: np.ndarray  # (P,)
    n_classes: int
    lam: float = 1e-4
    epochs: int = 20
    seed: int = 0
    kind: str = field(default=SVM, init=False)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        return X @ self.weights.T + self.biases

    def predict_scores(self, X) -> np.ndarray:
        """Raw margins. For two classes the single margin ``s`` is returned as ``[-s, s]``."""
        s = self.decision_function(X)
        if self.n_classes == 2:
            return np.column_stack([-s[:, 0], s[:, 0]])
        return s

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "n_classes": self.n_classes,
            "lam": self.lam,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data) -> "SvmModel":
        b = np.asarray(data["biases"], dtype=np.float64)
        return cls(
            np.asarray(data["weights"], dtype=np.float64).reshape(b.shape[0], -1),
            b,
            int(data["n_classes"]),
            float(data["lam"]),
            int(data["epochs"]),
            int(data["seed"]),
        )


def fit_svm(train: Dataset, lam: float = 1e-4, epochs: int = 20, seed: int = 0, batch_size: int = 1) -> SvmModel:
    """Pegasos: stochastic subgradient descent on the L2-regularised hinge loss.

    Step size at iteration ``t`` is ``1 / (lam * t)``. Each epoch visits the rows
    in a fresh seeded permutation, ``batch_size`` rows per step. The bias is
    learned as the weight of a constant 1 feature.
    """
    if not lam > 0:
        raise PreconditionError("lam must be positive")
    if epochs < 1 or batch_size < 1:
        raise PreconditionError("epochs and batch_size must be >= 1")
    if not np.all(np.isfinite(train.features)):
        raise FitError("SVM: non-finite feature values")
    if train.n_samples < 2:
        raise FitError("SVM: need at least two rows")
    _check_classes(train, "SVM")
    C = train.n_classes
    if C < 2:
        raise FitError("SVM: need at least two classes")

    X = np.column_stack([train.features, np.ones(train.n_samples)])
    y = train.labels
    problems = [1] if C == 2 else list(range(C))
    Y = np.stack([np.where(y == c, 1.0, -1.0) for c in problems], axis=1)  # (n, P)
    W = np.zeros((len(problems), X.shape[1]))
    radius = 1.0 / math.sqrt(lam)
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            t += 1
            b = order[start:start + batch_size]
            xb, yb = X[b], Y[b]
            eta = 1.0 / (lam * t)
            active = (yb * (xb @ W.T)) < 1.0  # (B, P)
            W *= 1.0 - eta * lam
            W += (eta / len(b)) * ((active * yb).T @ xb)
            norms = np.linalg.norm(W, axis=1)
            over = norms > radius
            if over.any():
                W[over] *= (radius / norms[over])[:, None]
    if not np.all(np.isfinite(W)):
        raise FitError("SVM: weights diverged")
    return SvmModel(W[:, :-1].copy(), W[:, -1].copy(), C, float(lam), int(epochs), int(seed))


# ---------------------------------------------------------------------------
# CART decision tree
# ---------------------------------------------------------------------------


def gini(counts) -> float:
    """Gini impurity ``1 - sum p_k^2`` of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass(eq=False)
class TreeModel(BaseModel):
    """Array-encoded binary tree. Node 0 is the root; leaves have ``feature == -1``.

    A row goes left when ``x[feature] <= threshold``. ``counts[i]`` is the class
    histogram of the training rows that reached node ``i``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, C)
    n_features: int
    max_depth: int | None = 12
    min_samples_leaf: int = 2
    kind: str = field(default=DECISION_TREE, init=False)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.is_leaf(node):
                best = max(best, d)
            else:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = as_matrix(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_scores(self, X) -> np.ndarray:
        c = self.counts[self.apply(X)]
        return c / c.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
        }

    @classmethod
    def from_dict(cls, data) -> "TreeModel":
        return cls(
            np.asarray(data["feature"], dtype=np.int64),
            np.asarray(data["threshold"], dtype=np.float64),
            np.asarray(data["left"], dtype=np.int64),
            np.asarray(data["right"], dtype=np.int64),
            np.asarray(data["counts"], dtype=np.float64),
            int(data["n_features"]),
            None if data["max_depth"] is None else int(data["max_depth"]),
            int(data["min_samples_leaf"]),
        )


_TIE_TOL = 1e-12


def _best_split_on(x: np.ndarray, y: np.ndarray, C: int, min_leaf: int):
    """Lowest weighted-Gini threshold on one feature, as (score, threshold) or None.

    ``score`` is the weighted child impurity times the node size.
    """
    m = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    onehot = np.zeros((m, C))
    onehot[np.arange(m), ys] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1] + onehot[-1] - left
    nl = np.arange(1, m, dtype=np.float64)
    nr = m - nl
    valid = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    score = m - (left**2).sum(axis=1) / nl - (right**2).sum(axis=1) / nr
    score[~valid] = np.inf
    # scores that are equal in exact arithmetic can differ in the last bits
    i = int(np.flatnonzero(score <= score.min() + _TIE_TOL * m)[0])
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(score[i]), float(thr)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: int | None = 12,
    min_samples_leaf: int = 2,
    features_per_split: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeModel:
    """Grow a CART classification tree on raw arrays.

    A node becomes a leaf when it is pure, sits at ``max_depth``, or admits no
    threshold leaving ``min_samples_leaf`` rows on both sides. Otherwise it takes
    the split with the lowest weighted child Gini, even if that equals the
    parent's impurity. Ties go to the lower feature index, then the lower
    threshold.

    With ``features_per_split`` set, each node first examines that many
    features drawn from ``rng``, falling back to the rest only when none of
    them can split.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    if n < 1:
        raise PreconditionError("cannot grow a tree on an empty training set")
    if min_samples_leaf < 1:
        raise PreconditionError("min_samples_leaf must be >= 1")
    if max_depth is not None and max_depth < 0:
        raise PreconditionError("max_depth must be >= 0")
    if features_per_split is not None:
        if not 1 <= features_per_split <= d:
            raise PreconditionError(f"features_per_split must be in [1, {d}]")
        if rng is None:
            rng = np.random.default_rng(0)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes).astype(np.float64))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        m = idx.shape[0]
        if np.count_nonzero(c) <= 1 or (max_depth is not None and depth >= max_depth) or m < 2 * min_samples_leaf:
            continue
        if features_per_split is None or features_per_split == d:
            groups = [np.arange(d)]
        else:
            drawn = np.sort(rng.choice(d, size=features_per_split, replace=False))
            groups = [drawn, np.setdiff1d(np.arange(d), drawn)]
        best = None
        yi = y[idx]
        for group in groups:
            for j in group:
                found = _best_split_on(X[idx, j], yi, n_classes, min_samples_leaf)
                if found is not None and (best is None or found[0] < best[0] - _TIE_TOL * m):
                    best = (found[0], found[1], int(j))
            if best is not None:
                break
        if best is None:
            continue
        _, thr, j = best
        mask = X[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = j, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return TreeModel(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts, dtype=np.float64).reshape(len(feature), n_classes),
        d,
        max_depth,
        int(min_samples_leaf),
    )


def fit_tree(train: Dataset, max_depth: int | None = 12, min_samples_leaf: int = 2) -> TreeModel:
    """CART tree with Gini splits at midpoints of consecutive distinct values."""
    train.check_clean()
    if train.n_samples < 1:
        raise PreconditionError("cannot fit a tree on an empty training set")
    return grow_tree(train.features, train.labels, train.n_classes, max_depth, min_samples_leaf)


_KINDS = {NAIVE_BAYES: NaiveBayesModel, SVM: SvmModel, DECISION_TREE: TreeModel}


def model_from_dict(data) -> BaseModel:
    try:
        cls = _KINDS[data["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {data.get('kind')!r}") from None
    return cls.from_dict(data)
