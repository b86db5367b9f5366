"""Blended ensemble: first-level outputs on a holdout slice feed a random forest."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classifiers import (
    BaseModel,
    TreeModel,
    as_matrix,
    fit_naive_bayes,
    fit_svm,
    fit_tree,
    grow_tree,
    model_from_dict,
)
from .dataset import Dataset, SplitPlan, split_labels
from .errors import BlendSplitError, PreconditionError, ShapeError, StratificationError

LABELS = "labels"
SCORES = "scores"
META_MODES = (LABELS, SCORES)


@dataclass(frozen=True, eq=False)
class MetaDataset:
    """Base-model outputs on holdout rows, with the holdout's true labels.

    ``labels`` mode has one column per base model (its predicted class id);
    ``scores`` mode has ``C`` columns per base model. With ``include_raw`` the
    raw feature columns are appended after the base-model block.
    """

    meta_features: np.ndarray
    labels: np.ndarray
    mode: str
    source_models: tuple[str, ...]
    n_classes: int
    include_raw: bool = False

    @property
    def n_samples(self) -> int:
        return self.meta_features.shape[0]

    @property
    def n_columns(self) -> int:
        return self.meta_features.shape[1]


def meta_features(models, X, mode: str = LABELS, include_raw: bool = False) -> np.ndarray:
    """Stack the base models' outputs on ``X`` column-wise, in model order."""
    if mode not in META_MODES:
        raise PreconditionError(f"meta mode must be one of {META_MODES}, got {mode!r}")
    X = np.asarray(X, dtype=np.float64)
    if mode == LABELS:
        cols = [m.predict(X).astype(np.float64)[:, None] for m in models]
    else:
        cols = [m.predict_scores(X) for m in models]
    if include_raw:
        cols.append(X.reshape(X.shape[0], -1))
    return np.hstack(cols)


def build_meta(models, holdout: Dataset, mode: str = LABELS, include_raw: bool = False) -> MetaDataset:
    """Derive the second-level training set from ``holdout``.

    The caller is responsible for ``models`` never having seen these rows.
    """
    if holdout.n_samples == 0:
        raise PreconditionError("holdout set is empty")
    for m in models:
        if m.n_features != holdout.n_features:
            raise ShapeError(f"{m.kind} expects {m.n_features} features, holdout has {holdout.n_features}")
    return MetaDataset(
        meta_features(models, holdout.features, mode, include_raw),
        holdout.labels.copy(),
        mode,
        tuple(m.kind for m in models),
        holdout.n_classes,
        include_raw,
    )


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ForestModel:
    trees: list[TreeModel]
    tree_seeds: list[int]
    features_per_split: int
    n_classes: int
    n_features: int
    bootstrap: bool = True
    oob_indices: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def tree_predictions(self, X) -> np.ndarray:
        """(T, n) matrix of per-tree class ids."""
        X = as_matrix(X, self.n_features)
        return np.stack([t.predict(X) for t in self.trees])

    def votes(self, X) -> np.ndarray:
        preds = self.tree_predictions(X)
        out = np.zeros((preds.shape[1], self.n_classes), dtype=np.int64)
        for row in preds:
            out[np.arange(preds.shape[1]), row] += 1
        return out

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.votes(X), axis=1)

    def predict_proba(self, X) -> np.ndarray:
        """Vote shares."""
        return self.votes(X) / self.n_trees

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "tree_seeds": list(self.tree_seeds),
            "features_per_split": self.features_per_split,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "bootstrap": self.bootstrap,
        }

    @classmethod
    def from_dict(cls, data) -> "ForestModel":
        return cls(
            [TreeModel.from_dict(t) for t in data["trees"]],
            [int(s) for s in data["tree_seeds"]],
            int(data["features_per_split"]),
            int(data["n_classes"]),
            int(data["n_features"]),
            bool(data["bootstrap"]),
        )


def _xy(data):
    if isinstance(data, MetaDataset):
        return data.meta_features, data.labels, data.n_classes
    if isinstance(data, Dataset):
        data.check_clean()
        return data.features, data.labels, data.n_classes
    raise TypeError(f"expected MetaDataset or Dataset, got {type(data).__name__}")


def fit_forest(
    meta,
    n_trees: int = 100,
    features_per_split: int | None = None,
    max_depth: int | None = 12,
    min_samples_leaf: int = 1,
    seed: int = 0,
    bootstrap: bool = True,
    n_jobs: int = 1,
) -> ForestModel:
    """Random forest of CART trees.

    Each tree gets its own seed, drawn up front from ``seed``; it draws its
    n-row bootstrap sample and per-node feature subsets from that seed alone,
    so trees can be grown in any order or in parallel with identical results.
    ``features_per_split`` defaults to ceil(sqrt(m)).
    """
    X, y, C = _xy(meta)
    n, m = X.shape
    if n == 0:
        raise PreconditionError("cannot fit a forest on an empty meta-dataset")
    if n_trees < 1:
        raise PreconditionError("n_trees must be >= 1")
    f = math.ceil(math.sqrt(m)) if features_per_split is None else int(features_per_split)
    if not 1 <= f <= m:
        raise PreconditionError(f"features_per_split must be in [1, {m}], got {f}")
    tree_seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint32)]

    def grow(s):
        rng = np.random.default_rng(s)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree = grow_tree(X[rows], y[rows], C, max_depth, min_samples_leaf, f, rng)
        oob = np.setdiff1d(np.arange(n), rows) if bootstrap else np.empty(0, dtype=np.int64)
        return tree, oob

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            grown = list(pool.map(grow, tree_seeds))
    else:
        grown = [grow(s) for s in tree_seeds]
    return ForestModel(
        trees=[t for t, _ in grown],
        tree_seeds=tree_seeds,
        features_per_split=f,
        n_classes=C,
        n_features=m,
        bootstrap=bootstrap,
        oob_indices=[o for _, o in grown],
    )


def predict_forest(model: ForestModel, rows) -> np.ndarray:
    """Majority vote over the trees; ties go to the lowest class id."""
    return model.predict(rows)


# ---------------------------------------------------------------------------
# Full blend
# ---------------------------------------------------------------------------


@dataclass
class BlendConfig:
    blend_ratio: tuple[float, float] = (80.0, 20.0)
    stratify: bool = True
    mode: str = LABELS
    include_raw: bool = False
    variance_floor: float = 1e-9
    svm_lambda: float = 1e-4
    svm_epochs: int = 20
    svm_batch_size: int = 1
    tree_max_depth: int | None = 12
    tree_min_samples_leaf: int = 2
    forest_trees: int = 100
    forest_features: int | None = None
    forest_max_depth: int | None = 12
    forest_min_samples_leaf: int = 1
    forest_bootstrap: bool = True
    n_jobs: int = 1
    split_seed: int = 0
    svm_seed: int = 0
    forest_seed: int = 0


@dataclass(eq=False)
class BlendedEnsemble:
    """Fitted first level (SVM, naive Bayes, tree) plus the forest over their outputs.

    ``base_plan`` indexes the training set the blend was fitted on: its train
    side fed the base models, its test side is the holdout behind ``meta``.
    """

    base_models: tuple[BaseModel, BaseModel, BaseModel]
    forest: ForestModel
    mode: str = LABELS
    include_raw: bool = False
    base_plan: SplitPlan | None = None
    meta: MetaDataset | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.base_models[0].n_features

    def meta_features(self, X) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        return meta_features(self.base_models, X, self.mode, self.include_raw)

    def build_meta(self, d: Dataset) -> MetaDataset:
        return build_meta(self.base_models, d, self.mode, self.include_raw)

    def predict(self, X) -> np.ndarray:
        return self.forest.predict(self.meta_features(X))

    def to_dict(self) -> dict:
        return {
            "base_models": [m.to_dict() for m in self.base_models],
            "forest": self.forest.to_dict(),
            "mode": self.mode,
            "include_raw": self.include_raw,
        }

    @classmethod
    def from_dict(cls, data) -> "BlendedEnsemble":
        return cls(
            tuple(model_from_dict(m) for m in data["base_models"]),
            ForestModel.from_dict(data["forest"]),
            data["mode"],
            bool(data["include_raw"]),
        )


def blend_pipeline(train: Dataset, config: BlendConfig | None = None) -> BlendedEnsemble:
    """Split ``train`` into base and holdout portions, fit the three base models
    on the first, derive the meta-dataset on the second and fit the forest on it.
    """
    config = config or BlendConfig()
    train.check_clean()
    try:
        plan = split_labels(train.labels, config.blend_ratio, config.split_seed, config.stratify)
    except StratificationError as exc:
        raise BlendSplitError(f"blend split: {exc}") from exc
    base = train.subset(plan.train_indices)
    holdout = train.subset(plan.test_indices)
    for name, part in (("base", base), ("holdout", holdout)):
        missing = np.flatnonzero(part.class_counts() == 0)
        if missing.size:
            raise BlendSplitError(f"blend split: class(es) {missing.tolist()} missing from the {name} portion")

    models = (
        fit_svm(base, config.svm_lambda, config.svm_epochs, config.svm_seed, config.svm_batch_size),
        fit_naive_bayes(base, config.variance_floor),
        fit_tree(base, config.tree_max_depth, config.tree_min_samples_leaf),
    )
    meta = build_meta(models, holdout, config.mode, config.include_raw)
    forest = fit_forest(
        meta,
        n_trees=config.forest_trees,
        features_per_split=config.forest_features,
        max_depth=config.forest_max_depth,
        min_samples_leaf=config.forest_min_samples_leaf,
        seed=config.forest_seed,
        bootstrap=config.forest_bootstrap,
        n_jobs=config.n_jobs,
    )
    return BlendedEnsemble(models, forest, config.mode, config.include_raw, plan, meta)
