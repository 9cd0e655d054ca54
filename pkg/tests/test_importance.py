import numpy as np
import pytest

from fingertrain import gbdt
from fingertrain.chem.parser import parse_smiles
from fingertrain.errors import DataError
from fingertrain.importance import (
    ImportanceReport,
    PermutationPlan,
    feature_permutation_importance,
    gin_importance_over_folds,
    gin_substructure_importance,
    importance_tokens,
    permute_graph_embeddings,
    substructure_map,
    write_importance_csv,
)
from fingertrain.metrics import MetricKind
from fingertrain.nn.gin import GinConfig, GinModel
from fingertrain.vocab import build_vocabulary, tokenize


class TestPermuteEmbeddings:
    def test_plan_validation(self):
        with pytest.raises(DataError):
            PermutationPlan(token=1, shuffled_indices=np.array([0, 0, 2]), seed=0)
        PermutationPlan(token=1, shuffled_indices=np.array([2, 0, 1]), seed=0)

    def test_absent_token_untouched(self, rng):
        emb = rng.normal(size=(3, 2, 8))
        tokens = np.ones((3, 2), dtype=np.int64)
        out = permute_graph_embeddings(emb, tokens, token=9, shuffled_indices=rng.permutation(8))
        assert out is emb  # early return, bit-identical

    def test_single_location_full_permutation(self, rng):
        emb = rng.normal(size=(2, 2, 8))
        tokens = np.zeros((2, 2), dtype=np.int64)
        tokens[1, 0] = 7
        perm = rng.permutation(8)
        out = permute_graph_embeddings(emb, tokens, 7, perm)
        assert np.array_equal(out[1, 0], emb[1, 0][perm])
        mask = np.ones((2, 2), bool)
        mask[1, 0] = False
        assert np.array_equal(out[mask], emb[mask])

    def test_identity_permutation_is_noop(self, rng):
        emb = rng.normal(size=(4, 2, 8))
        tokens = rng.integers(0, 3, size=(4, 2))
        out = permute_graph_embeddings(emb, tokens, 1, np.arange(8))
        assert np.array_equal(out, emb)

    def test_two_locations_chunked(self, rng):
        emb = rng.normal(size=(2, 1, 8))
        tokens = np.array([[3], [3]])
        perm = rng.permutation(8)
        out = permute_graph_embeddings(emb, tokens, 3, perm)
        # location order is row-major: atom 0 gets indices [0..3], atom 1 [4..7]
        want0 = emb[0, 0].copy()
        want0[0:4] = emb[0, 0][perm[0:4]]
        want1 = emb[1, 0].copy()
        want1[4:8] = emb[1, 0][perm[4:8]]
        assert np.array_equal(out[0, 0], want0)
        assert np.array_equal(out[1, 0], want1)

    def test_remainder_indices_unused(self, rng):
        emb = rng.normal(size=(3, 1, 8))
        tokens = np.array([[2], [2], [2]])
        perm = rng.permutation(8)
        out = permute_graph_embeddings(emb, tokens, 2, perm)
        # chunk = 8 // 3 = 2: cells cover positions 0:2, 2:4, 4:6; 6:8 untouched
        for row in range(3):
            assert np.array_equal(out[row, 0, 6:], emb[row, 0, 6:])

    def test_non_interference(self, rng):
        emb = rng.normal(size=(5, 2, 16))
        tokens = rng.integers(0, 4, size=(5, 2))
        token = 2
        out = permute_graph_embeddings(emb, tokens, token, rng.permutation(16))
        changed = np.any(out != emb, axis=2)
        assert not np.any(changed[tokens != token])

    def test_dimension_too_small_raises(self, rng):
        emb = rng.normal(size=(5, 1, 3))  # 3 dims < 5 atoms
        tokens = np.ones((5, 1), dtype=np.int64)
        with pytest.raises(DataError):
            permute_graph_embeddings(emb, tokens, 1, np.arange(3))


@pytest.fixture(scope="module")
def importance_setup():
    scaffolds = ["CCO{X}", "c1ccc({X})cc1", "CC(C){X}", "C1CCC({X})C1"]
    subs = ["C", "N", "O", "CC", "CO"]
    smiles = [b.replace("{X}", s) for b in scaffolds for s in subs]
    graphs = [parse_smiles(s) for s in smiles]
    vocab = build_vocabulary(graphs, r_max=1, k=128)
    tokenized = [tokenize(g, vocab) for g in graphs]
    model = GinModel(
        GinConfig(r_max=1, embed_dim=32, hidden_dim=16, message_layers=2, mlp_layers=2,
                  head_layers=2, dropout=0.0, pooling="sum", layer_agg="last"),
        vocab.n_tokens, 8, np.random.default_rng(0),
    )
    return graphs, vocab, tokenized, model


class TestGinImportance:
    def test_zero_iterations(self, importance_setup, rng):
        graphs, vocab, tokenized, model = importance_setup
        labels = rng.normal(size=len(graphs))
        scores, b0, predictor = gin_substructure_importance(
            model, vocab, tokenized[:14], labels[:14], tokenized[14:], labels[14:],
            MetricKind("r2"), iterations=0,
            predictor_config=gbdt.GbdtConfig(n_estimators=10, min_data_in_leaf=2, seed=0),
        )
        assert scores.shape == (len(importance_tokens(vocab)), 0)
        assert np.isfinite(b0)

    def test_absent_token_scores_exactly_zero(self, importance_setup, rng):
        graphs, vocab, tokenized, model = importance_setup
        labels = rng.normal(size=len(graphs))
        test = tokenized[14:]
        scores, _, _ = gin_substructure_importance(
            model, vocab, tokenized[:14], labels[:14], test, labels[14:],
            MetricKind("r2"), iterations=3,
            predictor_config=gbdt.GbdtConfig(n_estimators=10, min_data_in_leaf=2, seed=0),
        )
        tokens = importance_tokens(vocab)
        present = set()
        for tg in test:
            present |= set(tg.tokens.reshape(-1).tolist())
        for ti, token in enumerate(tokens):
            if token not in present:
                assert np.all(scores[ti] == 0.0)

    def test_determinism(self, importance_setup, rng):
        graphs, vocab, tokenized, model = importance_setup
        labels = rng.normal(size=len(graphs))
        kwargs = dict(
            metric=MetricKind("r2"), iterations=2,
            predictor_config=gbdt.GbdtConfig(n_estimators=10, min_data_in_leaf=2, seed=0),
            seed=11,
        )
        s1, b1, _ = gin_substructure_importance(
            model, vocab, tokenized[:14], labels[:14], tokenized[14:], labels[14:], **kwargs
        )
        s2, b2, _ = gin_substructure_importance(
            model, vocab, tokenized[:14], labels[:14], tokenized[14:], labels[14:], **kwargs
        )
        assert b1 == b2
        assert np.array_equal(s1, s2)

    def test_report_over_folds_and_csv(self, importance_setup, rng, tmp_path):
        graphs, vocab, tokenized, model = importance_setup
        labels = rng.normal(size=len(graphs))
        idx = np.arange(len(graphs))
        folds = [(idx[5:], idx[:5]), (idx[:15], idx[15:])]
        report = gin_importance_over_folds(
            model, vocab, tokenized, labels, folds, MetricKind("r2"), iterations=2,
            predictor_config=gbdt.GbdtConfig(n_estimators=10, min_data_in_leaf=2, seed=0),
        )
        n_tokens = len(importance_tokens(vocab))
        assert report.scores.shape == (n_tokens, 2, 2)
        assert report.base_scores.shape == (2,)
        assert set(report.substructure_of) == set(report.tokens)
        path = tmp_path / "imp.csv"
        write_importance_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "token,substructure_id,radius,fold,iteration,delta_metric"
        assert len(lines) == 1 + n_tokens * 2 * 2


class TestFeatureImportance:
    def test_excluded_column_zero(self, rng):
        X = rng.normal(size=(60, 4))
        X[:, 2] = 7.0  # zero variance
        y = X[:, 0] * 2 + rng.normal(0, 0.1, 60)
        model = gbdt.fit(X[:40], y[:40], "squared_error", gbdt.GbdtConfig(n_estimators=30, seed=0))
        scores, b0 = feature_permutation_importance(model, X[40:], y[40:], MetricKind("r2"), iterations=3)
        assert np.all(scores[2] == 0.0)

    def test_label_copied_column_dominates(self, rng):
        X = rng.normal(size=(80, 5))
        y = X[:, 3].copy()  # label equals one column
        model = gbdt.fit(X[:60], y[:60], "squared_error", gbdt.GbdtConfig(n_estimators=50, seed=0))
        scores, _ = feature_permutation_importance(model, X[60:], y[60:], MetricKind("r2"), iterations=5, seed=1)
        means = scores.mean(axis=1)
        assert int(np.argmax(means)) == 3

    def test_single_row_raises(self, rng):
        X = rng.normal(size=(30, 3))
        y = X[:, 0]
        model = gbdt.fit(X, y, "squared_error", gbdt.GbdtConfig(n_estimators=5, seed=0))
        with pytest.raises(DataError):
            feature_permutation_importance(model, X[:1], y[:1], MetricKind("r2"), iterations=1)
