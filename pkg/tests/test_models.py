import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairkit import _fallback, _kernels
from fairkit.cohort import CATEGORICAL, NUMERIC, OUTCOME, PROTECTED, Cohort, ColumnSpec, EncodedMatrix, stratified_kfold
from fairkit.errors import DegenerateLabels, DidNotConverge, FeatureMismatch
from fairkit.models import (
    GBT,
    LOGISTIC,
    TrainedModel,
    decision_margin,
    default_grid,
    feature_importance,
    predict_proba,
    select_config,
    train_gbt,
    train_logistic,
)
from fairkit.models.gbt import GbtConfig
from fairkit.models.logistic import LogisticConfig, logistic_objective


def _data(rng, n=200, p=4, signal=1.0):
    X = rng.normal(size=(n, p))
    beta = signal * rng.normal(size=p)
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ beta)))).astype(float)
    return X, y


def numeric_gradient(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestLogistic:
    def test_gradient_matches_central_difference(self, rng):
        X, y = _data(rng, 60, 3)
        w = rng.uniform(0.2, 3, 60)
        for _ in range(5):
            params = rng.normal(size=4)
            _, grad, hess = logistic_objective(params, X, y, w, 0.1)
            num = numeric_gradient(lambda b: logistic_objective(b, X, y, w, 0.1, False)[0], params)
            assert np.max(np.abs(grad - num)) <= 1e-6
            num_h = np.stack([numeric_gradient(
                lambda b: logistic_objective(b, X, y, w, 0.1, False)[1][i], params) for i in range(4)])
            np.testing.assert_allclose(hess, num_h, atol=1e-5)

    def test_duplicating_rows_equals_weight_two(self, rng):
        X, y = _data(rng, 80, 3)
        w = np.ones(80)
        w[:10] = 2.0
        a = train_logistic(X, y, w)
        b = train_logistic(np.vstack([X, X[:10]]), np.concatenate([y, y[:10]]))
        np.testing.assert_allclose(a.coef / a.scale, b.coef / b.scale, atol=1e-10)
        np.testing.assert_allclose(predict_proba(a, X), predict_proba(b, X), atol=1e-10)

    def test_zero_coefficients_predict_half(self):
        m = TrainedModel(LOGISTIC, ("a", "b"), 0.0, np.zeros(2), np.zeros(2), np.ones(2), np.ones(2))
        np.testing.assert_array_equal(predict_proba(m, np.array([[3.0, -7.0], [0.0, 1.0]])), 0.5)

    def test_feature_mismatch(self, rng):
        X, y = _data(rng, 50, 3)
        m = train_logistic(X, y)
        with pytest.raises(FeatureMismatch):
            predict_proba(m, X[:, :2])
        with pytest.raises(FeatureMismatch):
            predict_proba(m, EncodedMatrix(X, ("p", "q", "r")))

    def test_degenerate_labels(self, rng):
        with pytest.raises(DegenerateLabels):
            train_logistic(rng.normal(size=(5, 2)), np.ones(5))
        with pytest.raises(DegenerateLabels):
            train_logistic(rng.normal(size=(4, 2)), np.array([1, 0, 0, 0.]), np.array([0, 1, 1, 1.]))

    def test_loss_monotone(self, rng):
        X, y = _data(rng)
        m = train_logistic(X, y)
        assert np.all(np.diff(m.losses) <= 1e-12)
        assert m.converged

    def test_regularisation_shrinks(self, rng):
        X, y = _data(rng, signal=2.0)
        norms = [np.linalg.norm(train_logistic(X, y, cfg=LogisticConfig(l2_strength=l)).coef)
                 for l in (1e-4, 1e-2, 1.0, 100.0)]
        assert norms == sorted(norms, reverse=True)

    def test_weight_scaling_invariance(self, rng):
        X, y = _data(rng)
        w = rng.uniform(0.5, 2, len(y))
        a, b = train_logistic(X, y, w), train_logistic(X, y, 7.5 * w)
        np.testing.assert_allclose(a.coef, b.coef, atol=1e-10)

    def test_nonconvergence_warns(self, rng):
        X, y = _data(rng)
        with pytest.warns(DidNotConverge):
            m = train_logistic(X, y, cfg=LogisticConfig(max_iterations=1, tolerance=1e-30))
        assert not m.converged

    def test_separable_data_stays_finite(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1.0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DidNotConverge)
            m = train_logistic(X, y, cfg=LogisticConfig(l2_strength=1e-3))
        assert np.all(np.isfinite(m.coef))

    def test_json_roundtrip(self, rng):
        X, y = _data(rng)
        m = train_logistic(X, y)
        again = TrainedModel.from_json(m.to_json())
        np.testing.assert_array_equal(predict_proba(m, X), predict_proba(again, X))
        assert json.loads(m.to_json())["format_version"] == 1


class TestGbt:
    def test_duplicating_rows_equals_weight_two(self, rng):
        X, y = _data(rng, 80, 3)
        X = np.round(X, 2)
        w = np.ones(80)
        w[:10] = 2.0
        cfg = GbtConfig(rounds=20, max_depth=3)
        a = train_gbt(X, y, w, cfg)
        b = train_gbt(np.vstack([X, X[:10]]), np.concatenate([y, y[:10]]), None, cfg)
        np.testing.assert_allclose(decision_margin(a, X), decision_margin(b, X), atol=1e-10)

    def test_loss_decreases(self, rng):
        X, y = _data(rng, 300, 3)
        m = train_gbt(X, y, cfg=GbtConfig(rounds=30))
        assert np.all(np.diff(m.losses) <= 1e-12)
        assert m.losses[-1] < m.losses[0]

    def test_zero_rounds_rejected(self):
        with pytest.raises(ValueError):
            GbtConfig(rounds=0)

    def test_base_margin_is_prevalence(self, rng):
        X, y = _data(rng, 100, 2)
        m = train_gbt(X, y, cfg=GbtConfig(rounds=1))
        np.testing.assert_allclose(1 / (1 + np.exp(-m.base_margin)), y.mean())

    def test_one_stump_beats_majority_on_step(self):
        from fairkit.metrics import balanced_accuracy, confusion_at_threshold
        X = np.linspace(-1, 1, 40)[:, None]
        y = (X[:, 0] > 0.2).astype(float)
        m = train_gbt(X, y, cfg=GbtConfig(rounds=1, max_depth=1, learning_rate=1.0))
        assert balanced_accuracy(confusion_at_threshold(predict_proba(m, X), y)) >= 0.5

    def test_single_split_oracle(self):
        # one feature, perfectly separable at 0: a depth-1 tree must split between -1 and 1
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1.0])
        m = train_gbt(X, y, cfg=GbtConfig(rounds=1, max_depth=1, learning_rate=1.0, min_child_weight=0.0))
        t = m.trees[0]
        assert t.feature[0] == 0 and t.threshold[0] == 0.0
        # g = 0.5 - y, h = 0.25 per row; leaf value = -G / (H + 1)
        np.testing.assert_allclose(t.value[t.left[0]], -1.0 / 1.5)
        np.testing.assert_allclose(t.gain[0], 0.5 * (1 / 1.5 + 1 / 1.5 - 0))

    def test_deterministic(self, rng):
        X, y = _data(rng, 150, 3)
        cfg = GbtConfig(rounds=10, subsample=0.7, subsample_seed=4)
        assert train_gbt(X, y, cfg=cfg).to_json() == train_gbt(X, y, cfg=cfg).to_json()

    def test_json_roundtrip(self, rng):
        X, y = _data(rng, 150, 3)
        m = train_gbt(X, y, cfg=GbtConfig(rounds=5))
        np.testing.assert_array_equal(predict_proba(m, X), predict_proba(TrainedModel.from_json(m.to_json()), X))

    def test_bad_config(self):
        with pytest.raises(ValueError):
            GbtConfig(max_depth=0)


class TestKernels:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32), n=st.integers(2, 80), p=st.integers(1, 4), nodes=st.integers(1, 4))
    def test_compiled_matches_fallback(self, seed, n, p, nodes):
        if _kernels.BACKEND != "compiled":
            pytest.skip("compiled extension not built")
        r = np.random.default_rng(seed)
        X = np.round(r.normal(size=(n, p)), 1)
        order = np.ascontiguousarray(np.stack([np.argsort(X[:, j], kind="stable") for j in range(p)]), dtype=np.int64)
        g, h = r.normal(size=n), r.uniform(0.01, 0.25, n)
        node_of = r.integers(-1, nodes, n).astype(np.int64)
        valid = node_of >= 0
        G = np.bincount(node_of[valid], weights=g[valid], minlength=nodes)
        H = np.bincount(node_of[valid], weights=h[valid], minlength=nodes)
        G, H = G.astype(float), H.astype(float)
        a = _fallback.find_best_splits(X, order, g, h, node_of, G, H, 1.0, 0.05)
        b = _kernels.find_best_splits(X, order, g, h, node_of, G, H, 1.0, 0.05)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)


class TestImportance:
    def test_logistic_ranks_strong_feature_first(self, rng):
        X = rng.normal(size=(400, 3))
        y = (rng.random(400) < 1 / (1 + np.exp(-3 * X[:, 2]))).astype(float)
        ranked = feature_importance(train_logistic(X, y))
        assert ranked[0][0] == "x2"

    def test_ties_keep_feature_order(self):
        m = TrainedModel(LOGISTIC, ("a", "b", "c"), 0.0, np.zeros(3), np.zeros(3), np.ones(3), np.ones(3))
        assert [name for name, _ in feature_importance(m)] == ["a", "b", "c"]

    def test_gbt_uses_gain(self, rng):
        X = rng.normal(size=(300, 2))
        y = (X[:, 1] > 0).astype(float)
        ranked = feature_importance(train_gbt(X, y, cfg=GbtConfig(rounds=5)))
        assert ranked[0][0] == "x1"


def _cohort(X, y):
    names = [f"f{j}" for j in range(X.shape[1])]
    schema = [ColumnSpec(n, NUMERIC) for n in names] + [ColumnSpec("y", NUMERIC, OUTCOME)]
    return Cohort(schema, {n: X[:, j] for j, n in enumerate(names)}, y)


class TestSelection:
    def test_picks_light_penalty_on_strong_signal(self, rng):
        X, y = _data(rng, 300, 3, signal=3.0)
        c = _cohort(X, y)
        grid = [LogisticConfig(l2_strength=1e4), LogisticConfig(l2_strength=1e-4)]
        res = select_config(c, stratified_kfold(c, 3, 0), LOGISTIC, grid, metric="auc")
        assert res.best_index == 1

    def test_earliest_wins_ties(self, rng):
        X, y = _data(rng, 120, 2)
        c = _cohort(X, y)
        grid = [LogisticConfig(l2_strength=0.1), LogisticConfig(l2_strength=0.1)]
        assert select_config(c, stratified_kfold(c, 3, 0), LOGISTIC, grid).best_index == 0

    def test_oof_covers_every_row(self, rng):
        X, y = _data(rng, 90, 2)
        c = _cohort(X, y)
        res = select_config(c, stratified_kfold(c, 3, 0), LOGISTIC, default_grid(LOGISTIC))
        assert res.oof.shape == (90,) and np.all((res.oof > 0) & (res.oof < 1))

    def test_default_grids(self):
        assert len(default_grid(LOGISTIC)) == 3
        assert len(default_grid(GBT)) == 8
        with pytest.raises(ValueError):
            select_config(None, None, LOGISTIC, [])


class TestSpecExamples:
    def test_separable_slope_positive(self):
        X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 0, 1, 1, 1.0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DidNotConverge)
            m = train_logistic(X, y, cfg=LogisticConfig(l2_strength=1e-3))
        assert m.coef[0] > 0

    def test_weight_three_equals_triplicate(self, rng):
        X, y = _data(rng, 40, 2)
        w = np.ones(40)
        w[5] = 3.0
        a = train_logistic(X, y, w)
        X3 = np.vstack([X, X[[5, 5]]])
        y3 = np.concatenate([y, y[[5, 5]]])
        b = train_logistic(X3, y3)
        assert abs(a.losses[-1] - b.losses[-1]) <= 1e-10
        np.testing.assert_allclose(a.coef / a.scale, b.coef / b.scale, atol=1e-10)
        np.testing.assert_allclose(a.intercept - a.mean / a.scale @ a.coef,
                                   b.intercept - b.mean / b.scale @ b.coef, atol=1e-10)

    def test_grid_of_one(self, rng):
        from fairkit.cohort import nested_folds
        from fairkit.models import grid_search
        X, y = _data(rng, 90, 2)
        c = _cohort(X, y)
        only = LogisticConfig(l2_strength=0.5)
        chosen = grid_search(c, LOGISTIC, [only], nested_folds(c, 3, 2, 1))
        assert chosen == [only, only, only]

    def test_coefficients_two_and_zero(self):
        m = TrainedModel(LOGISTIC, ("a", "b"), 0.0, np.array([2.0, 0.0]), np.zeros(2), np.ones(2), np.ones(2))
        ranked = feature_importance(m)
        assert ranked[0] == ("a", 2.0) and ranked[1][1] == 0.0

    def test_stump_on_one_feature(self, rng):
        X = rng.normal(size=(200, 3))
        y = (X[:, 1] > 0.3).astype(float)
        m = train_gbt(X, y, cfg=GbtConfig(rounds=1, max_depth=1))
        scores = dict(feature_importance(m))
        assert scores["x1"] > 0 and scores["x0"] == 0 and scores["x2"] == 0
