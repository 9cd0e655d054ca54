"""Substructure importance via embedding permutation and column shuffling.

For the GIN path, one shared index permutation per (iteration, token) is
split into floor(l / occurrences) consecutive chunks and distributed across
every cell holding the token, so a token's prevalence inside a graph does
not inflate its measured importance. Graphs without the token pass through
untouched, which forces their importance contribution to exactly zero.
The classical path shuffles one feature column at a time across test rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fingertrain import gbdt
from fingertrain.errors import DataError
from fingertrain.metrics import MetricKind, compute_metric
from fingertrain.nn import tensor as T
from fingertrain.nn.gin import GinModel, GraphBatch, featurise
from fingertrain.seeds import rng_for
from fingertrain.vocab import TokenizedGraph, Vocabulary


@dataclass(frozen=True)
class PermutationPlan:
    token: int
    shuffled_indices: np.ndarray  # permutation of 0..l-1
    seed: int

    def __post_init__(self):
        idx = np.sort(self.shuffled_indices)
        if not np.array_equal(idx, np.arange(len(idx))):
            raise DataError("shuffled_indices must be a permutation of 0..l-1")


@dataclass
class ImportanceReport:
    tokens: list[int]
    substructure_of: dict[int, tuple[int | None, int | None]]  # token -> (id, radius)
    scores: np.ndarray  # (n_tokens, n_folds, iterations)
    base_scores: np.ndarray  # (n_folds,)
    metric_label: str

    def mean_scores(self) -> np.ndarray:
        return self.scores.reshape(len(self.tokens), -1).mean(axis=1)

    def ranking(self) -> list[int]:
        means = self.mean_scores()
        order = np.argsort(-means, kind="stable")
        return [self.tokens[i] for i in order]


def permute_graph_embeddings(
    embeddings: np.ndarray,
    tokens: np.ndarray,
    token: int,
    shuffled_indices: np.ndarray,
) -> np.ndarray:
    """Permute the embedding cells holding ``token`` (SI embedding scheme).

    ``embeddings`` has shape (n, m, l). Consecutive ranges of the shared
    permutation are distributed across token locations in row-major order;
    leftover indices past the last full chunk stay unused. Graphs without
    the token are returned unchanged (same array, no copy).
    """
    n, m, l = embeddings.shape
    if l < n:
        raise DataError(
            f"node embedding dimension {l} is smaller than the graph's {n} atoms; "
            "the permutation-distribution scheme assumes the dimension is at least the atom count"
        )
    locs = [(i, j) for i in range(n) for j in range(m) if tokens[i, j] == token]
    if not locs:
        return embeddings
    out = embeddings.copy()
    chunk = l // len(locs)
    start = 0
    for i, j in locs:
        end = min(start + chunk, l)
        subset = shuffled_indices[start:end]
        out[i, j, start:end] = out[i, j, subset]
        start = end
    return out


def _permuted_global_embeddings(
    model: GinModel,
    graphs: list[TokenizedGraph],
    affected: list[int],
    token: int,
    shuffled_indices: np.ndarray,
    base_rows: np.ndarray,
) -> np.ndarray:
    """Concat-readout rows with one token's embeddings permuted.

    Only graphs containing the token are re-embedded and re-pooled; the rest
    reuse their unpermuted rows, which is exactly what the early return in
    the permutation scheme produces.
    """
    if not affected:
        return base_rows
    out = base_rows.copy()
    chunk = [graphs[i] for i in affected]
    batch = GraphBatch.from_tokenized(chunk)
    l = model.config.embed_dim
    m = model.config.r_max + 1

    table = model.embedding.data
    pieces = []
    for tg in chunk:
        emb = table[tg.tokens.reshape(-1)].reshape(tg.n_atoms, m, l)
        emb = permute_graph_embeddings(emb, tg.tokens, token, shuffled_indices)
        pieces.append(emb.reshape(tg.n_atoms, m * l))
    features = T.constant(np.concatenate(pieces, axis=0))
    pooled = model.forward(batch, training=False, node_features=features)
    rows = model.readout(pooled, layer_agg="concat").data
    out[affected] = rows
    return out


def gin_substructure_importance(
    model: GinModel,
    vocab: Vocabulary,
    train_graphs: list[TokenizedGraph],
    train_labels: np.ndarray,
    test_graphs: list[TokenizedGraph],
    test_labels: np.ndarray,
    metric: MetricKind,
    iterations: int,
    predictor_config: gbdt.GbdtConfig = gbdt.GbdtConfig(),
    seed: int = 0,
    fold_tag: int = 0,
) -> tuple[np.ndarray, float, gbdt.GbdtModel]:
    """One train/test split: (scores (n_tokens, iterations), b0, predictor)."""
    objective = "logistic" if metric.kind in ("auroc", "aucpr", "mcc", "ef") else "squared_error"
    x_train = featurise(model, train_graphs)
    x_test = featurise(model, test_graphs)
    predictor = gbdt.fit(x_train, train_labels, objective, predictor_config)
    b0 = compute_metric(metric, test_labels, predictor.predict(x_test))

    tokens = importance_tokens(vocab)
    l = model.config.embed_dim
    contains: dict[int, list[int]] = {
        t: [gi for gi, tg in enumerate(test_graphs) if (tg.tokens == t).any()] for t in tokens
    }
    scores = np.zeros((len(tokens), iterations))
    for it in range(iterations):
        for ti, token in enumerate(tokens):
            affected = contains[token]
            if not affected:
                continue  # untouched embeddings give exactly b0 back
            rng = rng_for(seed, "gin-importance", fold_tag, it, token)
            shuffled = rng.permutation(l)
            x_perm = _permuted_global_embeddings(model, test_graphs, affected, token, shuffled, x_test)
            b_perm = compute_metric(metric, test_labels, predictor.predict(x_perm))
            scores[ti, it] = b0 - b_perm
    return scores, b0, predictor


def importance_tokens(vocab: Vocabulary) -> list[int]:
    """Tokens scored: every rank plus UNK. Padding maps to no substructure."""
    return [e.rank for e in vocab.entries] + [vocab.unk_token]


def substructure_map(vocab: Vocabulary) -> dict[int, tuple[int | None, int | None]]:
    out: dict[int, tuple[int | None, int | None]] = {e.rank: (e.id, e.radius) for e in vocab.entries}
    out[vocab.unk_token] = (None, None)
    return out


def gin_importance_over_folds(
    model: GinModel,
    vocab: Vocabulary,
    graphs: list[TokenizedGraph],
    labels: np.ndarray,
    folds: list[tuple[np.ndarray, np.ndarray]],
    metric: MetricKind,
    iterations: int,
    predictor_config: gbdt.GbdtConfig = gbdt.GbdtConfig(),
    seed: int = 0,
) -> ImportanceReport:
    """Repeat the single-split measurement over folds (default protocol:
    five iterations on each of five folds)."""
    tokens = importance_tokens(vocab)
    scores = np.zeros((len(tokens), len(folds), iterations))
    base = np.zeros(len(folds))
    for fi, (train_idx, test_idx) in enumerate(folds):
        fold_scores, b0, _ = gin_substructure_importance(
            model,
            vocab,
            [graphs[i] for i in train_idx],
            labels[train_idx],
            [graphs[i] for i in test_idx],
            labels[test_idx],
            metric,
            iterations,
            predictor_config,
            seed=seed,
            fold_tag=fi,
        )
        scores[:, fi, :] = fold_scores
        base[fi] = b0
    return ImportanceReport(
        tokens=tokens,
        substructure_of=substructure_map(vocab),
        scores=scores,
        base_scores=base,
        metric_label=metric.label(),
    )


def feature_permutation_importance(
    predictor: gbdt.GbdtModel,
    features: np.ndarray,
    labels: np.ndarray,
    metric: MetricKind,
    iterations: int,
    seed: int = 0,
) -> tuple[np.ndarray, float]:
    """Classical column-shuffle importance on a test set.

    Returns (scores (n_columns, iterations), b0). Columns the predictor
    ignored (zero variance at fit time) shift nothing and score zero.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] < 2:
        raise DataError("permutation importance needs at least two test rows")
    b0 = compute_metric(metric, labels, predictor.predict(features))
    n, n_cols = features.shape
    scores = np.zeros((n_cols, iterations))
    for it in range(iterations):
        for col in range(n_cols):
            rng = rng_for(seed, "col-importance", it, col)
            perm = rng.permutation(n)
            shuffled = features.copy()
            shuffled[:, col] = features[perm, col]
            b_perm = compute_metric(metric, labels, predictor.predict(shuffled))
            scores[col, it] = b0 - b_perm
    return scores, b0


def write_importance_csv(report: ImportanceReport, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token", "substructure_id", "radius", "fold", "iteration", "delta_metric"])
        for ti, token in enumerate(report.tokens):
            sid, radius = report.substructure_of.get(token, (None, None))
            for fold in range(report.scores.shape[1]):
                for it in range(report.scores.shape[2]):
                    writer.writerow(
                        [
                            token,
                            "" if sid is None else sid,
                            "" if radius is None else radius,
                            fold,
                            it,
                            f"{report.scores[ti, fold, it]:.12g}",
                        ]
                    )
