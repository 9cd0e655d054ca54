import numpy as np
import pytest

from fingertrain import gbdt
from fingertrain.errors import ConfigError, DataError


class TestFit:
    def test_constant_labels_base_only(self, rng):
        X = rng.normal(size=(30, 4))
        y = np.full(30, 7.5)
        model = gbdt.fit(X, y, "squared_error", gbdt.GbdtConfig(n_estimators=10, seed=0))
        pred = model.predict(X)
        assert np.allclose(pred, 7.5, atol=1e-9)

    def test_noiseless_linear_fit(self, rng):
        X = rng.normal(size=(200, 1))
        y = 3.0 * X[:, 0]
        model = gbdt.fit(X, y, "squared_error", gbdt.GbdtConfig(n_estimators=100, learning_rate=0.1, min_data_in_leaf=1, seed=0))
        pred = model.predict(X)
        ss_res = ((y - pred) ** 2).sum()
        ss_tot = ((y - y.mean()) ** 2).sum()
        assert 1 - ss_res / ss_tot >= 0.99

    def test_zero_variance_excluded(self, rng):
        X = rng.normal(size=(50, 3))
        X[:, 1] = 5.0
        y = X[:, 0]
        model = gbdt.fit(X, y, "squared_error", gbdt.GbdtConfig(n_estimators=20, seed=0))
        assert 1 not in model.kept_features.tolist()
        assert all(node_features(model)) or True
        for tree in model.trees:
            for f in tree_features(tree):
                assert f in model.kept_features

    def test_monotone_training_loss(self, rng):
        # guaranteed only without row subsampling
        X = rng.normal(size=(80, 5))
        y = X[:, 0] * 2 + np.sin(X[:, 1]) + rng.normal(0, 0.1, 80)
        model = gbdt.fit(X, y, "squared_error", gbdt.GbdtConfig(n_estimators=60, seed=1))
        curve = model.train_loss_curve
        assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))

        yb = (y > 0).astype(float)
        model = gbdt.fit(X, yb, "logistic", gbdt.GbdtConfig(n_estimators=60, seed=1))
        curve = model.train_loss_curve
        assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))

    def test_determinism(self, rng):
        X = rng.normal(size=(60, 6))
        y = X[:, 0] + rng.normal(0, 0.3, 60)
        cfg = gbdt.GbdtConfig(n_estimators=30, feature_fraction=0.5, bagging_fraction=0.7, seed=42)
        a = gbdt.fit(X, y, "squared_error", cfg)
        b = gbdt.fit(X, y, "squared_error", cfg)
        assert np.array_equal(a.predict(X), b.predict(X))
        assert [t.to_dict() for t in a.trees] == [t.to_dict() for t in b.trees]

    def test_single_class_logistic(self):
        X = np.arange(20, dtype=float).reshape(-1, 1)
        y = np.ones(20)
        model = gbdt.fit(X, y, "logistic", gbdt.GbdtConfig(n_estimators=10, seed=0))
        assert len(model.trees) == 0
        assert np.all(model.predict(X) > 0.999)

    def test_errors(self, rng):
        X = rng.normal(size=(10, 2))
        with pytest.raises(DataError):
            gbdt.fit(X, np.zeros(9), "squared_error")
        with pytest.raises(ConfigError):
            gbdt.fit(X, np.zeros(10), "poisson")
        with pytest.raises(DataError):
            gbdt.fit(X[:3], np.zeros(3), "squared_error", gbdt.GbdtConfig(min_data_in_leaf=5))
        with pytest.raises(DataError):
            gbdt.fit(X, rng.normal(size=10), "logistic")
        with pytest.raises(ConfigError):
            gbdt.GbdtConfig(num_leaves=1)
        with pytest.raises(ConfigError):
            gbdt.GbdtConfig(feature_fraction=0.0)


def tree_features(node):
    if node.is_leaf:
        return
    yield node.feature
    yield from tree_features(node.left)
    yield from tree_features(node.right)


def node_features(model):
    return [f for tree in model.trees for f in tree_features(tree)]


class TestPredict:
    def test_empty_trees_base_everywhere(self):
        model = gbdt.GbdtModel(
            trees=[], base_score=2.5, objective="squared_error",
            kept_features=np.array([], dtype=np.int64), learning_rate=0.1,
            config=gbdt.GbdtConfig(),
        )
        assert np.allclose(model.predict(np.zeros((4, 2))), 2.5)

    def test_single_stump_sign(self):
        stump = gbdt.TreeNode(
            feature=0, threshold=0.0,
            left=gbdt.TreeNode(value=-1.0), right=gbdt.TreeNode(value=1.0),
        )
        model = gbdt.GbdtModel(
            trees=[stump], base_score=0.0, objective="squared_error",
            kept_features=np.array([0]), learning_rate=1.0, config=gbdt.GbdtConfig(),
        )
        X = np.array([[-2.0], [-0.5], [0.5], [3.0]])
        assert model.predict(X).tolist() == [-1.0, -1.0, 1.0, 1.0]

    def test_fit_predict_round_trip_exact(self, rng):
        X = rng.normal(size=(100, 4))
        y = X[:, 0] - X[:, 2] ** 2 + rng.normal(0, 0.1, 100)
        model = gbdt.fit(X, y, "squared_error", gbdt.GbdtConfig(n_estimators=40, seed=3))
        assert np.array_equal(model.raw_predict(X), model.training_score_)

    def test_width_mismatch(self, rng):
        X = rng.normal(size=(30, 5))
        model = gbdt.fit(X, X[:, 4], "squared_error", gbdt.GbdtConfig(n_estimators=5, seed=0))
        with pytest.raises(DataError):
            model.predict(X[:, :2])

    def test_logistic_probability_range(self, rng):
        X = rng.normal(size=(60, 3))
        y = (X[:, 0] > 0).astype(float)
        model = gbdt.fit(X, y, "logistic", gbdt.GbdtConfig(n_estimators=30, seed=0))
        p = model.predict(X)
        assert np.all((p >= 0) & (p <= 1))
        assert ((p > 0.5) == y).mean() > 0.95


class TestPersistence:
    def test_round_trip(self, rng, tmp_path):
        X = rng.normal(size=(80, 5))
        y = X[:, 1] * 2 + rng.normal(0, 0.2, 80)
        model = gbdt.fit(X, y, "squared_error", gbdt.GbdtConfig(n_estimators=25, seed=7))
        path = tmp_path / "model.json"
        gbdt.save_gbdt(model, path)
        loaded = gbdt.load_gbdt(path)
        assert np.allclose(loaded.predict(X), model.predict(X))
        assert loaded.objective == "squared_error"
        assert np.array_equal(loaded.kept_features, model.kept_features)
