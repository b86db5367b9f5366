from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blendids.blend import (
    LABELS,
    SCORES,
    BlendConfig,
    BlendedEnsemble,
    ForestModel,
    MetaDataset,
    blend_pipeline,
    build_meta,
    fit_forest,
    predict_forest,
)
from blendids.classifiers import TreeModel, fit_naive_bayes, fit_svm, fit_tree, grow_tree
from blendids.errors import BlendSplitError, PreconditionError
from blendids.synth import make_blobs

from conftest import make_dataset


def constant_tree(cls: int, n_classes: int = 2, n_features: int = 3) -> TreeModel:
    counts = np.zeros((1, n_classes))
    counts[0, cls] = 1
    one = np.array([-1])
    return TreeModel(one, np.zeros(1), one, one, counts, n_features, None, 1)


def forest_of(classes, n_classes=2) -> ForestModel:
    trees = [constant_tree(c, n_classes) for c in classes]
    return ForestModel(trees, list(range(len(trees))), 1, n_classes, 3)


def brute_vote(forest, rows):
    """Ask each tree one row at a time, tally with a Counter, lowest id on ties."""
    out = []
    for r in rows:
        tally = Counter(int(t.predict(r[None])[0]) for t in forest.trees)
        top = max(tally.values())
        out.append(min(c for c, v in tally.items() if v == top))
    return np.array(out)


class StubModel:
    """Predicts a fixed class; stands in for a base model."""

    def __init__(self, cls, kind, n_features=2, n_classes=2):
        self.cls, self.kind, self.n_features, self.C = cls, kind, n_features, n_classes

    def predict(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.cls)

    def predict_scores(self, X):
        s = np.zeros((np.atleast_2d(X).shape[0], self.C))
        s[:, self.cls] = 1.0
        return s


@pytest.fixture(scope="module")
def base_models(blobs):
    return fit_svm(blobs, epochs=3), fit_naive_bayes(blobs), fit_tree(blobs, max_depth=5)


class TestBuildMeta:
    def test_label_shape(self, blobs, base_models):
        meta = build_meta(base_models, blobs.subset(np.arange(100)), LABELS)
        assert meta.meta_features.shape == (100, 3)
        np.testing.assert_array_equal(meta.labels, blobs.labels[:100])
        assert meta.source_models == ("svm", "naive_bayes", "decision_tree")

    def test_score_shape(self, blobs, base_models):
        meta = build_meta(base_models, blobs.subset(np.arange(100)), SCORES)
        assert meta.meta_features.shape == (100, 6)

    def test_include_raw(self, blobs, base_models):
        meta = build_meta(base_models, blobs.subset(np.arange(10)), LABELS, include_raw=True)
        np.testing.assert_array_equal(meta.meta_features[:, 3:], blobs.features[:10])

    def test_agreeing_models(self):
        d = make_dataset([[0, 0], [1, 1]], [0, 1])
        models = [StubModel(1, k) for k in ("svm", "naive_bayes", "decision_tree")]
        assert build_meta(models, d).meta_features.tolist() == [[1, 1, 1], [1, 1, 1]]

    def test_empty_holdout(self, blobs, base_models):
        with pytest.raises(PreconditionError):
            build_meta(base_models, blobs.subset([]))


class TestVoting:
    def test_majority_of_101(self):
        assert predict_forest(forest_of([0] * 51 + [1] * 50), np.zeros((1, 3))).tolist() == [0]
        assert predict_forest(forest_of([1] * 51 + [0] * 50), np.zeros((1, 3))).tolist() == [1]

    def test_even_split_tie_goes_low(self):
        assert predict_forest(forest_of([1] * 50 + [0] * 50), np.zeros((1, 3))).tolist() == [0]

    def test_three_trees(self):
        assert predict_forest(forest_of([1, 1, 0]), np.zeros((1, 3))).tolist() == [1]

    def test_three_way_tie(self):
        assert predict_forest(forest_of([2, 1, 2, 1], 3), np.zeros((1, 3))).tolist() == [1]

    def test_vote_shares(self):
        f = forest_of([1, 1, 0, 1])
        np.testing.assert_allclose(f.predict_proba(np.zeros((2, 3))), [[0.25, 0.75]] * 2)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 7), st.integers(0, 2**31 - 1))
    def test_matches_brute_force(self, T, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 2, (200, 3)).astype(float)
        y = rng.integers(0, 2, 200)
        f = fit_forest(MetaDataset(X, y, LABELS, ("a", "b", "c"), 2), n_trees=T, features_per_split=2, seed=seed)
        rows = rng.integers(0, 2, (500, 3)).astype(float)
        np.testing.assert_array_equal(predict_forest(f, rows), brute_vote(f, rows))


class TestFitForest:
    def test_single_tree_without_bootstrap_is_cart(self, blobs):
        f = fit_forest(blobs, n_trees=1, features_per_split=6, bootstrap=False, max_depth=6, min_samples_leaf=2)
        t = grow_tree(blobs.features, blobs.labels, 2, 6, 2)
        np.testing.assert_array_equal(f.predict(blobs.features), t.predict(blobs.features))
        np.testing.assert_array_equal(f.trees[0].threshold, t.threshold)

    def test_separable_training_accuracy(self):
        d = make_blobs(400, 3, separation=4.0, seed=2)
        f = fit_forest(d, n_trees=101, seed=1)
        assert np.mean(f.predict(d.features) == d.labels) == 1.0

    def test_deterministic_and_parallel_safe(self, blobs):
        a = fit_forest(blobs, n_trees=8, seed=5)
        b = fit_forest(blobs, n_trees=8, seed=5, n_jobs=4)
        assert a.tree_seeds == b.tree_seeds
        for s, t in zip(a.trees, b.trees):
            np.testing.assert_array_equal(s.feature, t.feature)
            np.testing.assert_array_equal(s.threshold, t.threshold)

    def test_default_feature_count(self, blobs):
        assert fit_forest(blobs, n_trees=1).features_per_split == 3

    def test_bad_arguments(self, blobs):
        with pytest.raises(PreconditionError):
            fit_forest(blobs, n_trees=0)
        with pytest.raises(PreconditionError):
            fit_forest(blobs, features_per_split=7)
        with pytest.raises(PreconditionError):
            fit_forest(blobs.subset([]))

    def test_oob_bookkeeping(self, blobs):
        f = fit_forest(blobs, n_trees=3, seed=0)
        assert len(f.oob_indices) == 3 and all(0 < len(o) < blobs.n_samples for o in f.oob_indices)

    def test_training_accuracy_beats_mode(self):
        d = make_blobs(300, 4, separation=0.3, label_noise=0.2, seed=4)
        f = fit_forest(d, n_trees=15, seed=0)
        assert np.mean(f.predict(d.features) == d.labels) >= np.bincount(d.labels).max() / d.n_samples

    def test_round_trip(self, blobs):
        f = fit_forest(blobs, n_trees=4, seed=0)
        g = ForestModel.from_dict(f.to_dict())
        np.testing.assert_array_equal(g.votes(blobs.features), f.votes(blobs.features))


class TestBlendPipeline:
    def test_end_to_end_accuracy(self, blobs):
        train = blobs.subset(np.arange(1600))
        test = blobs.subset(np.arange(1600, 2000))
        ens = blend_pipeline(train, BlendConfig(forest_trees=25))
        assert np.mean(ens.predict(test.features) == test.labels) >= 0.98
        assert ens.predict(test.features[0]).shape == (1,)

    def test_hygiene(self, blobs):
        ens = blend_pipeline(blobs, BlendConfig(forest_trees=5))
        plan = ens.base_plan
        assert not set(plan.train_indices) & set(plan.test_indices)
        assert ens.meta.n_samples == len(plan.test_indices)
        np.testing.assert_array_equal(ens.meta.labels, blobs.labels[plan.test_indices])

    def test_half_ratio_on_ten_rows(self):
        d = make_dataset(np.arange(10.0), [0, 1] * 5)
        ens = blend_pipeline(d, BlendConfig(blend_ratio=(50, 50), forest_trees=3, svm_epochs=2))
        assert len(ens.base_plan.train_indices) == len(ens.base_plan.test_indices) == 5

    def test_class_missing_from_portion(self):
        d = make_dataset(np.arange(10.0), [0] * 9 + [1])
        with pytest.raises(BlendSplitError):
            blend_pipeline(d, BlendConfig(forest_trees=3))
        with pytest.raises(BlendSplitError):
            blend_pipeline(d, BlendConfig(forest_trees=3, stratify=False, split_seed=0, blend_ratio=(90, 10)))

    def test_round_trip(self, blobs):
        ens = blend_pipeline(blobs, BlendConfig(forest_trees=5, mode=SCORES))
        back = BlendedEnsemble.from_dict(ens.to_dict())
        np.testing.assert_array_equal(back.predict(blobs.features), ens.predict(blobs.features))

    def test_deterministic(self, blobs):
        a = blend_pipeline(blobs, BlendConfig(forest_trees=5, forest_seed=2))
        b = blend_pipeline(blobs, BlendConfig(forest_trees=5, forest_seed=2))
        assert a.to_dict() == b.to_dict()
