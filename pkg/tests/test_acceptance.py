"""Acceptance suite: one test per primary criterion, each printing a
pass/fail line with its runtime. Tolerances are pinned here and nowhere
else; the helpers compute expectations with independent brute-force oracles
wherever a criterion demands one.
"""

import csv
import subprocess
import sys
import time
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from fingertrain import gbdt
from fingertrain.chem.parser import parse_smiles
from fingertrain.chem.writer import to_smiles
from fingertrain.clustering import butina_cluster
from fingertrain.filtering import FilterConfig, similarity_filter
from fingertrain.fingerprints import (
    FingerprintConfig,
    fingerprint_graph,
    morgan_enumerate,
    packed_matrix,
)
from fingertrain.importance import gin_substructure_importance, importance_tokens
from fingertrain.kernels import tanimoto_block
from fingertrain.metrics import MetricKind, MetricVector, auroc, mape
from fingertrain.nn import tensor as T
from fingertrain.nn.gin import GinConfig, GinModel, GraphBatch
from fingertrain.nn.train import TrainConfig, bit_class_weights, predict_bits, pretrain
from fingertrain.seeds import rng_for
from fingertrain.splitting import repeated_grouped_cv
from fingertrain.stats import multiple_comparison, rank_biserial, wilcoxon_signed_rank
from fingertrain.toydata import SCAFFOLDS, SUBSTITUENTS, make_toy_dataset, toy_smiles
from fingertrain.vocab import build_vocabulary, tokenize


def report(name: str, started: float, budget: float | None = None):
    elapsed = time.monotonic() - started
    line = f"[PASS] {name} ({elapsed:.1f}s)"
    print(line)
    if budget is not None:
        assert elapsed < budget, f"{name} exceeded its {budget}s budget"


def extended_corpus() -> list[str]:
    decos = ["{S}", "C{S}", "CC{S}"]
    return [
        sc.replace("{X}", d.replace("{S}", sub))
        for sc in SCAFFOLDS
        for d in decos
        for sub in SUBSTITUENTS
    ]


def test_fingerprint_permutation_invariance():
    """50 toy molecules x 20 random atom renumberings: identical folded fingerprints."""
    started = time.monotonic()
    config = FingerprintConfig(radius=2, nbits=2048, use_chirality=True)
    smiles = [s for _, s in toy_smiles()[:44]] + [
        "N[C@@H](C)C(=O)O",
        "N[C@H](CC(C)C)C(=O)O",
        "O[C@@H]1CCCC[C@H]1N",
        "C[C@H](N)C(=O)N[C@@H](C)C(=O)O",
        "FC(F)(F)c1ccc(Cl)cc1",
        "c1ccc2[nH]ccc2c1",
    ]
    assert len(smiles) == 50
    rng = np.random.default_rng(2024)
    failures = 0
    for s in smiles:
        graph = parse_smiles(s)
        reference = fingerprint_graph(graph, config)
        for _ in range(20):
            renumbered = parse_smiles(to_smiles(graph, rng=rng))
            folded = fingerprint_graph(renumbered, config)
            if not np.array_equal(folded.words, reference.words):
                failures += 1
    assert failures == 0
    report("fingerprint permutation invariance (50 x 20, exact)", started, budget=10.0)


def test_sort_slice_oracle():
    """Vocabulary equals an independent brute-force counter exactly."""
    started = time.monotonic()
    graphs = [parse_smiles(s) for _, s in toy_smiles()]
    assert len(graphs) == 200
    for r_max, k in ((1, 100), (2, 400), (2, 100000)):
        config = FingerprintConfig(radius=r_max, nbits=2048, use_chirality=True)
        counts: dict[int, int] = {}
        for g in graphs:
            for sid in {e.id for e in morgan_enumerate(g, config).entries}:
                counts[sid] = counts.get(sid, 0) + 1
        ordered = sorted(counts, key=lambda s: (-counts[s], s))
        want_ranks = {sid: rank for rank, sid in enumerate(ordered[:k], start=1)}
        want_unk = len(want_ranks) + 1

        vocab = build_vocabulary(graphs, r_max=r_max, k=k)
        assert vocab.rank_of == want_ranks, f"rank map mismatch at r_max={r_max} k={k}"
        assert vocab.unk_token == want_unk
        for e in vocab.entries:
            assert e.count == counts[e.id]
    report("sort & slice vocabulary equals brute-force oracle", started, budget=5.0)


def test_embedding_dimension_table():
    """Init / concat readout widths for r_max 0,1,2 at l=512, hidden=512, 3 layers."""
    started = time.monotonic()
    expected = {0: (512, 2048), 1: (1024, 2560), 2: (1536, 3072)}
    for r_max, (node_dim, concat_dim) in expected.items():
        config = GinConfig(r_max=r_max, embed_dim=512, hidden_dim=512, message_layers=3)
        assert config.node_dim == node_dim
        assert config.concat_dim == concat_dim
        # verify with a real forward pass at scaled-down vocabulary size
        model = GinModel(config, vocab_size=16, out_dim=8, rng=np.random.default_rng(0))
        tokens = np.ones((3, r_max + 1), dtype=np.int64)
        g = parse_smiles("CCO")
        from fingertrain.vocab import TokenizedGraph

        batch = GraphBatch.from_tokenized([TokenizedGraph(graph=g, tokens=tokens, vocab_ref="")])
        pooled = model.forward(batch)
        assert model.readout(pooled, "concat").shape == (1, concat_dim)
        assert model.node_embeddings(batch).shape == (3, node_dim)
    report("embedding dimension table (512/1024/1536 -> 2048/2560/3072)", started)


def _random_molecule(rng) -> str:
    fragments = ["C", "N", "O", "CC", "C(C)", "CO", "CN", "C(=O)", "c1ccccc1", "C1CC1", "CCO"]
    n = rng.integers(1, 4)
    return "".join(fragments[rng.integers(0, len(fragments))] for _ in range(n))


def test_gradient_check():
    """Analytic vs central finite differences on 20 random small graphs.

    Each trial batches the trial's graph with three companions so the
    per-bit class weights are non-degenerate (a single molecule would zero
    out every bit's loss term).
    """
    started = time.monotonic()
    rng = np.random.default_rng(99)
    corpus = [parse_smiles(_random_molecule(rng)) for _ in range(30)]
    vocab = build_vocabulary(corpus, r_max=1, k=24)
    step = 1e-4
    worst = 0.0
    for trial in range(20):
        picks = rng.integers(0, len(corpus), size=4)
        tgs = [tokenize(corpus[i], vocab) for i in picks]
        config = GinConfig(
            r_max=1, embed_dim=3, hidden_dim=4, message_layers=2, mlp_layers=2,
            head_layers=2, dropout=0.0, pooling=("sum", "mean", "max")[trial % 3],
            activation=("hardswish", "gelu", "leaky_relu")[trial % 3], layer_agg="last",
        )
        model = GinModel(config, vocab.n_tokens, out_dim=3, rng=np.random.default_rng(trial))
        batch = GraphBatch.from_tokenized(tgs)
        target_rng = np.random.default_rng(trial + 1)
        targets = (target_rng.random((4, 3)) > 0.5).astype(float)
        targets[0, :] = 1.0  # guarantee a positive per bit
        targets[1, :] = 0.0  # ... and a negative, so no bit degenerates
        weights, mask = bit_class_weights(targets)
        assert mask.sum() == 3

        def loss_value():
            pooled = model.forward(batch)
            logits = model.head_logits(model.readout(pooled, "last"))
            return T.weighted_bce_with_logits(logits, targets, weights, mask)

        loss = loss_value()
        assert float(loss.data) > 0.0
        for p in model.parameters().values():
            p.zero_grad()
        T.backward(loss)
        checked_nonzero = 0
        for name, p in model.parameters().items():
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            numeric = np.zeros_like(p.data)
            flat, nflat = p.data.reshape(-1), numeric.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = float(loss_value().data)
                flat[i] = orig - step
                down = float(loss_value().data)
                flat[i] = orig
                nflat[i] = (up - down) / (2 * step)
            denom = max(np.linalg.norm(numeric), 1e-12)
            rel = np.linalg.norm(analytic - numeric) / denom
            worst = max(worst, rel)
            checked_nonzero += np.linalg.norm(numeric) > 1e-8
            assert rel < 1e-4, f"trial {trial} tensor {name}: rel err {rel:.2e}"
        assert checked_nonzero >= 5  # the check must exercise real gradients
    report(f"gradient check (20 graphs, worst rel err {worst:.1e} < 1e-4)", started, budget=60.0)


def test_pretraining_smoke():
    """500 molecules, 256-bit targets, hidden 64, 10 epochs: loss halves and
    held-out per-bit AUROC beats 0.7 on bits set in at least 5% of molecules."""
    started = time.monotonic()
    smiles = extended_corpus()
    order = np.random.default_rng(3).permutation(len(smiles))
    smiles = [smiles[i] for i in order]
    graphs = [parse_smiles(s) for s in smiles]
    train_graphs, held_graphs = graphs[:500], graphs[500:]

    vocab = build_vocabulary(train_graphs, r_max=1, k=512)
    train_tg = [tokenize(g, vocab) for g in train_graphs]
    held_tg = [tokenize(g, vocab) for g in held_graphs]

    fp = FingerprintConfig(radius=2, nbits=256, use_chirality=True)

    def targets_of(gs):
        out = np.zeros((len(gs), fp.nbits))
        for i, g in enumerate(gs):
            out[i, fingerprint_graph(g, fp).bit_indices()] = 1.0
        return out

    train_targets, held_targets = targets_of(train_graphs), targets_of(held_graphs)
    config = GinConfig(
        r_max=1, embed_dim=64, hidden_dim=64, message_layers=3, mlp_layers=2,
        head_layers=2, dropout=0.0, pooling="sum", layer_agg="last",
    )
    model = GinModel(config, vocab.n_tokens, fp.nbits, np.random.default_rng(1))
    tc = TrainConfig(epochs=10, batch_size=64, warmup_epochs=2, lr_half_life_epochs=5, seed=2)
    history = pretrain(model, train_tg, train_targets, tc)
    assert history[9] < 0.5 * history[0], f"epoch-10 {history[9]:.4f} vs epoch-1 {history[0]:.4f}"

    probs = predict_bits(model, held_tg)
    aucs = []
    for j in range(fp.nbits):
        positives = held_targets[:, j].sum()
        if held_targets[:, j].mean() >= 0.05 and 0 < positives < len(held_graphs):
            aucs.append(auroc(held_targets[:, j], probs[:, j]))
    mean_auc = float(np.mean(aucs))
    assert mean_auc > 0.7, f"held-out mean per-bit AUROC {mean_auc:.3f}"
    report(
        f"pre-training smoke (loss {history[0]:.3f}->{history[9]:.3f}, AUROC {mean_auc:.3f})",
        started,
        budget=600.0,
    )


def test_split_hygiene():
    """Full 200x5 plan: zero cluster leakage; dropped folds exactly match
    zero-test-positive folds."""
    started = time.monotonic()
    dataset = make_toy_dataset()
    graphs = [parse_smiles(s) for s in dataset.smiles()]
    config = FingerprintConfig(radius=2, nbits=2048, use_chirality=True)
    packed = packed_matrix([fingerprint_graph(g, config) for g in graphs])
    clusters = butina_cluster(packed, cutoff=0.65)
    # rare positives force dropped folds under stratified grouping
    labels = (dataset.labels() > np.quantile(dataset.labels(), 0.98)).astype(float)
    assert 0 < labels.sum() <= 5
    positive_clusters = len(set(clusters.cluster_of[labels == 1.0]))
    assert positive_clusters < 5  # fewer positive clusters than folds: drops must occur

    leaks = 0
    n_folds = 0
    n_dropped = 0
    for plan in repeated_grouped_cv(labels, "binary", clusters, k=5, repeats=200, seed=17):
        n_folds += 1
        train_clusters = set(clusters.cluster_of[plan.train_idx])
        test_clusters = set(clusters.cluster_of[plan.test_idx])
        leaks += len(train_clusters & test_clusters)
        test_pos = labels[plan.test_idx].sum()
        assert plan.dropped == (test_pos == 0)
        n_dropped += plan.dropped
        assert plan.train_idx.size + plan.test_idx.size == len(labels)
    assert leaks == 0
    assert n_folds == 1000
    assert n_dropped > 0, "the dropped-fold path was never exercised"
    report(f"split hygiene (1000 folds, 0 leaks, {n_dropped} dropped)", started, budget=30.0)


def test_similarity_filter_correctness():
    """No retained molecule exceeds 0.5 similarity to any benchmark molecule
    on a 300 x 100 pairing, verified by brute force."""
    started = time.monotonic()
    corpus = extended_corpus()
    assert len(corpus) >= 350
    config = FingerprintConfig(radius=2, nbits=2048, use_chirality=True)
    folded = [fingerprint_graph(parse_smiles(s), config) for s in corpus[:350]]
    pre = packed_matrix(folded[:300])
    # overlap the benchmark with the tail of the pre-training set so exact
    # matches (similarity 1.0) are guaranteed and the exclusion path runs
    bench = packed_matrix(folded[250:350])
    keep = similarity_filter(pre, bench, FilterConfig(threshold=0.5))

    sims = tanimoto_block(pre, bench)
    brute_keep = [i for i in range(300) if max(sims[i]) <= 0.5]
    assert keep.tolist() == brute_keep
    assert all(float(sims[i].max()) <= 0.5 for i in keep)
    excluded = sorted(set(range(300)) - set(keep.tolist()))
    assert len(excluded) >= 50  # at least the exact duplicates
    assert all(float(sims[i].max()) > 0.5 for i in excluded)
    report(f"similarity filter brute-force verification ({keep.size}/300 kept)", started)


def test_wilcoxon_exactness():
    """Exact p equals full 2^n sign enumeration within 1e-12 for n <= 12;
    rank-biserial equals (wins - losses)/n exactly."""
    started = time.monotonic()
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        n = int(rng.integers(5, 13))
        a = np.round(rng.normal(size=n), 3)
        b = np.round(rng.normal(size=n), 3)
        diff = a - b
        nz = diff[diff != 0]
        if nz.size < 5:
            continue
        checked += 1
        res = wilcoxon_signed_rank(a, b)

        mags = np.abs(nz)
        order = np.argsort(mags, kind="stable")
        ranks = np.empty(nz.size)
        sm = mags[order]
        i = 0
        while i < nz.size:
            j = i
            while j + 1 < nz.size and sm[j + 1] == sm[i]:
                j += 1
            ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
            i = j + 1
        w_obs = ranks[nz > 0].sum()
        total = ranks.sum()
        w_min = min(w_obs, total - w_obs)
        hits = 0
        for signs in product((0, 1), repeat=nz.size):
            w = sum(r for r, s in zip(ranks, signs) if s)
            if w <= w_min + 1e-9 or w >= total - w_min - 1e-9:
                hits += 1
        brute_p = hits / 2**nz.size
        assert abs(res.p_value - brute_p) < 1e-12

        wins = int((a > b).sum())
        losses = int((a < b).sum())
        assert rank_biserial(a, b) == (wins - losses) / n
    report("wilcoxon exactness vs 2^n enumeration (100 vectors)", started)


def test_statistical_pipeline():
    """A beats B on all 199 repeats: r_rb = 1.00 and Bonferroni p < 0.05."""
    started = time.monotonic()
    rng = np.random.default_rng(11)
    base = 0.6 + 0.05 * rng.random(199)
    vectors = [
        MetricVector("method_a", "toy", MetricKind("r2"), base + 0.02 + 0.01 * rng.random(199), [5] * 199),
        MetricVector("method_b", "toy", MetricKind("r2"), base, [5] * 199),
        MetricVector("method_c", "toy", MetricKind("r2"), base - 0.5 * rng.random(199), [5] * 199),
    ]
    results = multiple_comparison(vectors, alpha=0.05)
    assert len(results) == 3  # Bonferroni m = 3
    ab = next(r for r in results if {r.method_a, r.method_b} == {"method_a", "method_b"})
    assert ab.r_rb == pytest.approx(1.0)
    assert ab.p_adjusted < 0.05
    assert ab.stars in ("*", "**", "***", "****")
    report(f"statistical pipeline (r_rb={ab.r_rb:.2f}, adj p={ab.p_adjusted:.2e})", started)


def test_mape_exclusion():
    """One y=0 record: exclusion count 1 and the hand-computed value to 1e-12."""
    started = time.monotonic()
    truth = np.array([0.0, 2.0, 4.0])
    pred = np.array([0.0, 1.0, 5.0])
    value, excluded = mape(truth, pred)
    assert excluded == 1
    assert abs(value - 37.5) < 1e-12
    report("mape exclusion (count 1, value 37.5)", started)


def test_importance_invariants():
    """Absent tokens score exactly zero; the planted substructure ranks first
    by mean delta-metric in at least 9 of 10 seeded runs."""
    started = time.monotonic()
    arom = ["c1ccc({P})cc1", "c1ccnc({P})c1", "c1cc({P})co1", "c1cc({P})cs1", "c1ccc2cc({P})ccc2c1"]
    alip = ["C1CCC({P})CC1", "C1CCC({P})C1", "CCCC{P}", "CC(C){P}", "CCOCC{P}"]
    subs = ["C", "CC", "O", "N", "CO", "CC(C)C", "OC", "CCN"]
    pos = [b.replace("{P}", s) for b in arom for s in subs]
    neg = [b.replace("{P}", s) for b in alip for s in subs]
    smiles = pos + neg
    is_pos = np.array([1.0] * len(pos) + [0.0] * len(neg))
    graphs = [parse_smiles(s) for s in smiles]
    vocab = build_vocabulary(graphs, r_max=1, k=512)
    tokenized = [tokenize(g, vocab) for g in graphs]

    # the planted substructure: unsubstituted aromatic CH at radius 0,
    # present in every aromatic molecule and in no aliphatic one
    probe = parse_smiles("c1ccc(C)cc1")
    planted_ids = {
        e.id
        for e in morgan_enumerate(probe, vocab.fingerprint_config()).entries
        if e.radius == 0 and probe.atoms[e.central_atom].aromatic and probe.atoms[e.central_atom].hcount == 1
    }
    planted = vocab.rank_of[next(iter(planted_ids))]
    tokens = importance_tokens(vocab)

    test_mask = np.zeros(len(smiles), dtype=bool)
    test_mask[::2] = True
    train_idx = np.flatnonzero(~test_mask)
    test_idx = np.flatnonzero(test_mask)
    metric = MetricKind("r2")

    present = set()
    for i in test_idx:
        present |= set(tokenized[i].tokens.reshape(-1).tolist())

    wins = 0
    for trial in range(10):
        labels = 10.0 * is_pos + rng_for(900 + trial, "noise").normal(0, 0.1, len(smiles))
        model = GinModel(
            GinConfig(r_max=1, embed_dim=192, hidden_dim=32, message_layers=2, mlp_layers=2,
                      head_layers=2, dropout=0.0, pooling="sum", layer_agg="last"),
            vocab.n_tokens, 16, np.random.default_rng(trial),
        )
        predictor_config = gbdt.GbdtConfig(
            n_estimators=150, learning_rate=0.1, num_leaves=4, min_data_in_leaf=8,
            feature_fraction=0.15, bagging_fraction=0.7, seed=trial,
        )
        scores, b0, _ = gin_substructure_importance(
            model, vocab,
            [tokenized[i] for i in train_idx], labels[train_idx],
            [tokenized[i] for i in test_idx], labels[test_idx],
            metric, iterations=25, predictor_config=predictor_config, seed=trial,
        )
        for ti, token in enumerate(tokens):
            if token not in present:
                assert np.all(scores[ti] == 0.0), f"absent token {token} scored non-zero"
        means = scores.mean(axis=1)
        wins += tokens[int(np.argmax(means))] == planted
    assert wins >= 9, f"planted token first in only {wins}/10 runs"
    report(f"importance invariants (absent tokens zero, planted first {wins}/10)", started, budget=300.0)


def test_predictor_sanity():
    """Noiseless y = 3x reaches train R2 >= 0.99; zero-variance exclusion and
    seeded determinism hold."""
    started = time.monotonic()
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 1))
    y = 3.0 * x[:, 0]
    config = gbdt.GbdtConfig(n_estimators=100, learning_rate=0.1, min_data_in_leaf=1, seed=0)
    model = gbdt.fit(x, y, "squared_error", config)
    pred = model.predict(x)
    r2 = 1.0 - ((y - pred) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    assert r2 >= 0.99

    x3 = np.hstack([x, np.full((200, 1), 5.0), rng.normal(size=(200, 1))])
    model3 = gbdt.fit(x3, y, "squared_error", config)
    assert 1 not in model3.kept_features.tolist()

    again = gbdt.fit(x3, y, "squared_error", config)
    assert np.array_equal(model3.predict(x3), again.predict(x3))
    assert [t.to_dict() for t in model3.trees] == [t.to_dict() for t in again.trees]
    report(f"predictor sanity (train R2 {r2:.4f})", started)


def test_end_to_end_toy_pipeline(tmp_path):
    """Bundled toy corpus through the CLI pipeline: completes in budget and the
    pre-trained featurisation clearly beats a shuffled-label control."""
    started = time.monotonic()
    workdir = tmp_path / "toy"
    run = subprocess.run(
        [sys.executable, "-m", "fingertrain.cli", "toydata", "--out", str(workdir)],
        capture_output=True, text=True,
    )
    assert run.returncode == 0, run.stderr
    run = subprocess.run(
        [sys.executable, "-m", "fingertrain.cli", "pipeline", "run", "--config", str(workdir / "toy.conf")],
        capture_output=True, text=True,
    )
    assert run.returncode == 0, run.stderr + run.stdout
    out = workdir / "run"
    assert (out / "manifest.json").exists()

    rows = list(csv.DictReader((out / "metrics.csv").open()))
    ptgin_r2 = [float(r["value"]) for r in rows if r["method"] == "ptgin" and r["metric"] == "r2"]
    mean_r2 = float(np.mean(ptgin_r2))
    assert mean_r2 > 0.5, f"PT-GIN mean test R2 {mean_r2:.3f}"

    # shuffled-label control on the same frozen embeddings and splits
    from fingertrain.config import load_config
    from fingertrain.metrics import compute_metric
    from fingertrain.pipeline import load_embeddings_csv, _load_standardized
    from fingertrain.splitting import read_split_csv

    config = load_config(workdir / "toy.conf")
    dataset = _load_standardized(out, "regression")
    ids, emb = load_embeddings_csv(out / "embeddings.csv")
    labels = dataset.labels().copy()
    rng_for(99, "shuffle-control").shuffle(labels)
    plans = [p for p in read_split_csv(out / "splits.csv", dataset.ids()) if p.repeat_id == 1]
    predictor_config = gbdt.GbdtConfig(
        n_estimators=config["predictor.n_estimators"],
        learning_rate=config["predictor.learning_rate"],
        num_leaves=config["predictor.num_leaves"],
        min_data_in_leaf=config["predictor.min_data_in_leaf"],
        feature_fraction=config["predictor.feature_fraction"],
        bagging_fraction=config["predictor.bagging_fraction"],
        reg_lambda=config["predictor.reg_lambda"],
        seed=0,
    )
    control = []
    for plan in plans:
        model = gbdt.fit(emb[plan.train_idx], labels[plan.train_idx], "squared_error", predictor_config)
        control.append(compute_metric(MetricKind("r2"), labels[plan.test_idx], model.predict(emb[plan.test_idx])))
    control_r2 = float(np.mean(control))
    assert control_r2 < 0.1, f"shuffled-label control R2 {control_r2:.3f}"
    report(
        f"end-to-end toy pipeline (PT-GIN R2 {mean_r2:.3f} vs shuffled {control_r2:.3f})",
        started,
        budget=900.0,
    )
