"""End-to-end pipeline: standardise, fingerprint, vocabulary, splits,
pre-training, featurisation, benchmarking, statistics, and optional
importance, driven by one run configuration.

Every stage records the hash of its config slice, inputs, and outputs in the
run manifest; a rerun skips stages whose records still match, so interrupted
or repeated runs are cheap and byte-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from fingertrain import __version__, bitset, gbdt
from fingertrain.chem.parser import parse_smiles
from fingertrain.chem.standardize import standardize_smiles
from fingertrain.chem.writer import to_smiles
from fingertrain.clustering import butina_cluster
from fingertrain.config import RunConfig
from fingertrain.data import LabeledDataset, load_dataset_csv
from fingertrain.errors import ConfigError, DataError, StageError
from fingertrain.fingerprints import (
    FingerprintConfig,
    fingerprint_graph,
    morgan_enumerate,
    sparse_to_line,
)
from fingertrain.importance import gin_importance_over_folds, write_importance_csv
from fingertrain.metrics import MetricVector, compute_metric, fold_mean, parse_metric
from fingertrain.nn.gin import GinConfig, GinModel, featurise
from fingertrain.nn.io import load_model, save_model
from fingertrain.nn.train import TrainConfig, pretrain
from fingertrain.seeds import derive_seed
from fingertrain.splitting import SplitPlan, read_split_csv, repeated_grouped_cv, write_split_csv
from fingertrain.stats import multiple_comparison
from fingertrain.vocab import (
    Vocabulary,
    build_vocabulary,
    corpus_fingerprint,
    load_vocabulary,
    save_vocabulary,
    sort_slice_vector,
    tokenize,
)

STAGE_ORDER = (
    "standardize",
    "fingerprint",
    "vocab",
    "split",
    "pretrain",
    "featurise",
    "benchmark",
    "stats",
    "importance",
)

_STAGE_KEYS = {
    "standardize": ("data.dataset", "data.task", "data.name", "data.smiles_column"),
    "fingerprint": ("fp.radius", "fp.nbits", "fp.chirality", "fp.kind", "threads"),
    "vocab": ("vocab.rmax", "vocab.k", "fp.kind", "fp.chirality"),
    "split": ("split.k", "split.repeats", "split.cutoff", "data.task"),
    "pretrain": tuple(
        f"pretrain.{f}"
        for f in (
            "epochs",
            "batch_size",
            "warmup_epochs",
            "half_life",
            "start_factor",
            "lr_scale",
            "embed_dim",
            "hidden_dim",
            "message_layers",
            "mlp_layers",
            "head_layers",
            "activation",
            "pooling",
            "dropout",
            "share_weights",
            "train_eps",
            "target_nbits",
            "target_radius",
        )
    )
    + ("fp.chirality", "vocab.rmax"),
    "featurise": (),
    "benchmark": (
        "benchmark.methods",
        "benchmark.metrics",
        "data.task",
        "fp.radius",
        "fp.nbits",
        "fp.chirality",
        "predictor.n_estimators",
        "predictor.learning_rate",
        "predictor.num_leaves",
        "predictor.min_data_in_leaf",
        "predictor.feature_fraction",
        "predictor.bagging_fraction",
        "predictor.reg_lambda",
    ),
    "stats": ("stats.alpha",),
    "importance": (
        "importance.enabled",
        "importance.iterations",
        "importance.metric",
        "importance.repeat",
        "predictor.n_estimators",
        "predictor.learning_rate",
        "predictor.num_leaves",
        "predictor.min_data_in_leaf",
        "predictor.feature_fraction",
        "predictor.bagging_fraction",
        "predictor.reg_lambda",
    ),
}

_STAGE_INPUTS = {
    "standardize": lambda cfg, out: [Path(cfg["data.dataset"])],
    "fingerprint": lambda cfg, out: [out / "standardized.csv"],
    "vocab": lambda cfg, out: [out / "standardized.csv"],
    "split": lambda cfg, out: [out / "standardized.csv", out / "fingerprints.csv"],
    "pretrain": lambda cfg, out: [out / "standardized.csv", out / "vocab.json"],
    "featurise": lambda cfg, out: [out / "standardized.csv", out / "vocab.json", out / "model.npz"],
    "benchmark": lambda cfg, out: [
        out / "standardized.csv",
        out / "fingerprints.csv",
        out / "splits.csv",
        out / "embeddings.csv",
        out / "vocab.json",
    ],
    "stats": lambda cfg, out: [out / "metrics.csv"],
    "importance": lambda cfg, out: [
        out / "standardized.csv",
        out / "splits.csv",
        out / "model.npz",
        out / "vocab.json",
    ],
}

_STAGE_OUTPUTS = {
    "standardize": ("standardized.csv", "rejects.csv"),
    "fingerprint": ("fingerprints.csv", "fingerprints_sparse.tsv"),
    "vocab": ("vocab.json",),
    "split": ("splits.csv",),
    "pretrain": ("model.npz", "pretrain_loss.csv"),
    "featurise": ("embeddings.csv",),
    "benchmark": ("metrics.csv",),
    "stats": ("comparison.csv",),
    "importance": ("importance.csv",),
}


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_hash(config: RunConfig, stage: str) -> str:
    items = [f"seed={config['seed']}"]
    for key in _STAGE_KEYS[stage]:
        items.append(f"{key}={config.values[key]}")
    items.append(f"version={__version__}")
    return hashlib.sha256("\n".join(items).encode()).hexdigest()


def run_pipeline(config: RunConfig, force: bool = False, echo=lambda msg: None) -> dict:
    outdir = Path(config["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    manifest_path = outdir / "manifest.json"
    prior = {}
    if manifest_path.exists() and not force:
        try:
            prior = json.loads(manifest_path.read_text(encoding="utf-8")).get("stages", {})
        except (json.JSONDecodeError, OSError):
            prior = {}

    manifest = {
        "tool_version": __version__,
        "config": {k: _config_value_str(v) for k, v in sorted(config.values.items())},
        "stages": {},
    }

    runners = {
        "standardize": _stage_standardize,
        "fingerprint": _stage_fingerprint,
        "vocab": _stage_vocab,
        "split": _stage_split,
        "pretrain": _stage_pretrain,
        "featurise": _stage_featurise,
        "benchmark": _stage_benchmark,
        "stats": _stage_stats,
        "importance": _stage_importance,
    }

    for stage in STAGE_ORDER:
        if stage == "importance" and not config["importance.enabled"]:
            continue
        cfg_hash = _config_hash(config, stage)
        inputs = _STAGE_INPUTS[stage](config, outdir)
        missing = [str(p) for p in inputs if not p.exists()]
        if missing:
            raise StageError(stage, f"missing inputs: {', '.join(missing)}")
        input_hashes = {p.name: sha256_file(p) for p in inputs}
        outputs = [outdir / name for name in _STAGE_OUTPUTS[stage]]

        record = prior.get(stage)
        if (
            record
            and record.get("config_hash") == cfg_hash
            and record.get("input_hashes") == input_hashes
            and all(p.exists() for p in outputs)
            and {p.name: sha256_file(p) for p in outputs} == record.get("outputs")
        ):
            manifest["stages"][stage] = {**record, "skipped": True}
            echo(f"[{stage}] up to date, skipped")
            continue

        started = time.monotonic()
        try:
            runners[stage](config, outdir)
        except (ConfigError, DataError, StageError):
            raise
        except Exception as exc:  # surface the failing stage
            raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
        seconds = time.monotonic() - started
        for p in outputs:
            if not p.exists():
                raise StageError(stage, f"declared output {p.name} was not produced")
        manifest["stages"][stage] = {
            "config_hash": cfg_hash,
            "input_hashes": input_hashes,
            "outputs": {p.name: sha256_file(p) for p in outputs},
            "seconds": round(seconds, 3),
            "skipped": False,
        }
        echo(f"[{stage}] done in {seconds:.1f}s")

    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def _config_value_str(v) -> str:
    if isinstance(v, list):
        return ",".join(str(x) for x in v)
    return str(v)


# -- shared loaders -------------------------------------------------------------


def _load_standardized(outdir: Path, task: str) -> LabeledDataset:
    return load_dataset_csv(outdir / "standardized.csv", task_kind=task, name="standardized")


def _fp_config(config: RunConfig) -> FingerprintConfig:
    return FingerprintConfig(
        radius=config["fp.radius"],
        nbits=config["fp.nbits"],
        use_chirality=config["fp.chirality"],
        kind=config["fp.kind"],
    )


def _parse_all(smiles: list[str], threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(parse_smiles, smiles))
    return [parse_smiles(s) for s in smiles]


def _load_packed(outdir: Path, nbits: int) -> tuple[list[str], np.ndarray]:
    ids = []
    rows = []
    with (outdir / "fingerprints.csv").open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ids.append(row["id"])
            rows.append(bitset.from_hex(row["fingerprint_hex"], nbits))
    return ids, np.stack(rows) if rows else np.zeros((0, bitset.n_words(nbits)), dtype=np.uint64)


# -- stages ----------------------------------------------------------------------


def _stage_standardize(config: RunConfig, outdir: Path) -> None:
    dataset = load_dataset_csv(
        config["data.dataset"],
        task_kind=config["data.task"],
        name=config["data.name"],
        smiles_column=config["data.smiles_column"],
    )
    kept = []
    rejects = []
    for mid, smi, label in dataset.records:
        report = standardize_smiles(smi)
        if report.ok:
            kept.append((mid, to_smiles(report.output), label))
        else:
            rejects.append((smi, report.failure_reason))
    if not kept:
        raise DataError("no molecule survived standardisation")
    with (outdir / "standardized.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "smiles", "label"])
        for mid, smi, label in kept:
            writer.writerow([mid, smi, f"{label:.12g}"])
    with (outdir / "rejects.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["smiles", "reason"])
        writer.writerows(rejects)


def _stage_fingerprint(config: RunConfig, outdir: Path) -> None:
    dataset = _load_standardized(outdir, config["data.task"])
    fp_config = _fp_config(config)
    graphs = _parse_all(dataset.smiles(), config["threads"])
    with (
        (outdir / "fingerprints.csv").open("w", newline="", encoding="utf-8") as dense,
        (outdir / "fingerprints_sparse.tsv").open("w", encoding="utf-8") as sparse,
    ):
        writer = csv.writer(dense)
        writer.writerow(["id", "fingerprint_hex"])
        for mid, graph in zip(dataset.ids(), graphs):
            sp = morgan_enumerate(graph, fp_config, molecule_ref=mid)
            writer.writerow([mid, bitset.to_hex(bitset.from_indices({e.id & (fp_config.nbits - 1) for e in sp.entries}, fp_config.nbits))])
            sparse.write(sparse_to_line(sp) + "\n")


def _stage_vocab(config: RunConfig, outdir: Path) -> None:
    dataset = _load_standardized(outdir, config["data.task"])
    graphs = [parse_smiles(s) for s in dataset.smiles()]
    vocab = build_vocabulary(
        graphs,
        r_max=config["vocab.rmax"],
        k=config["vocab.k"],
        kind=config["fp.kind"],
        use_chirality=config["fp.chirality"],
        corpus_hash=corpus_fingerprint(dataset.smiles()),
    )
    save_vocabulary(vocab, outdir / "vocab.json")


def _stage_split(config: RunConfig, outdir: Path) -> None:
    dataset = _load_standardized(outdir, config["data.task"])
    ids, packed = _load_packed(outdir, config["fp.nbits"])
    if ids != dataset.ids():
        raise DataError("fingerprints.csv does not align with standardized.csv")
    clusters = butina_cluster(packed, cutoff=config["split.cutoff"])
    plans = list(
        repeated_grouped_cv(
            dataset.labels(),
            config["data.task"],
            clusters,
            k=config["split.k"],
            repeats=config["split.repeats"],
            seed=config["seed"],
        )
    )
    write_split_csv(plans, dataset.ids(), outdir / "splits.csv")


def _stage_pretrain(config: RunConfig, outdir: Path) -> None:
    dataset = _load_standardized(outdir, config["data.task"])
    vocab = load_vocabulary(outdir / "vocab.json")
    graphs = [parse_smiles(s) for s in dataset.smiles()]
    tokenized = [tokenize(g, vocab) for g in graphs]
    target_config = FingerprintConfig(
        radius=config["pretrain.target_radius"],
        nbits=config["pretrain.target_nbits"],
        use_chirality=config["fp.chirality"],
        kind="ecfp",
    )
    targets = np.zeros((len(graphs), target_config.nbits))
    for i, g in enumerate(graphs):
        targets[i, fingerprint_graph(g, target_config).bit_indices()] = 1.0

    gin_config = GinConfig(
        r_max=vocab.r_max,
        embed_dim=config["pretrain.embed_dim"],
        hidden_dim=config["pretrain.hidden_dim"],
        message_layers=config["pretrain.message_layers"],
        mlp_layers=config["pretrain.mlp_layers"],
        head_layers=config["pretrain.head_layers"],
        activation=config["pretrain.activation"],
        pooling=config["pretrain.pooling"],
        layer_agg="last",
        dropout=config["pretrain.dropout"],
        share_weights=config["pretrain.share_weights"],
        train_eps=config["pretrain.train_eps"],
    )
    seed = derive_seed(config["seed"], "pretrain")
    model = GinModel(gin_config, vocab.n_tokens, target_config.nbits, np.random.default_rng(seed))
    tc = TrainConfig(
        epochs=config["pretrain.epochs"],
        batch_size=config["pretrain.batch_size"],
        warmup_epochs=config["pretrain.warmup_epochs"],
        lr_half_life_epochs=config["pretrain.half_life"],
        lr_start_factor=config["pretrain.start_factor"],
        lr_scale=config["pretrain.lr_scale"],
        seed=seed,
    )
    history = pretrain(model, tokenized, targets, tc)
    save_model(
        model,
        outdir / "model.npz",
        vocab_ref=vocab.corpus_fingerprint,
        metadata={"seed": seed, "epochs": tc.epochs, "loss_history": history},
    )
    with (outdir / "pretrain_loss.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_bce"])
        for epoch, value in enumerate(history):
            writer.writerow([epoch, f"{value:.12g}"])


def _stage_featurise(config: RunConfig, outdir: Path) -> None:
    dataset = _load_standardized(outdir, config["data.task"])
    vocab = load_vocabulary(outdir / "vocab.json")
    model, _ = load_model(outdir / "model.npz")
    tokenized = [tokenize(parse_smiles(s), vocab) for s in dataset.smiles()]
    emb = featurise(model, tokenized)
    with (outdir / "embeddings.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"e{i}" for i in range(emb.shape[1])])
        for mid, row in zip(dataset.ids(), emb):
            writer.writerow([mid] + [f"{v:.12g}" for v in row])


def load_embeddings_csv(path: Path) -> tuple[list[str], np.ndarray]:
    ids = []
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.asarray(rows, dtype=np.float64)


def _method_features(method: str, config: RunConfig, outdir: Path, dataset: LabeledDataset):
    """Feature matrix for a benchmark method, or a per-fold builder for S&S."""
    if method == "ptgin":
        ids, emb = load_embeddings_csv(outdir / "embeddings.csv")
        if ids != dataset.ids():
            raise DataError("embeddings.csv does not align with standardized.csv")
        return emb
    if method == "ecfp_hashed":
        ids, packed = _load_packed(outdir, config["fp.nbits"])
        if config["fp.kind"] != "ecfp":
            raise ConfigError("ecfp_hashed baseline requires fp.kind = ecfp")
        return _unpack_bits(packed, config["fp.nbits"])
    if method == "fcfp_hashed":
        fp_config = FingerprintConfig(
            radius=config["fp.radius"],
            nbits=config["fp.nbits"],
            use_chirality=config["fp.chirality"],
            kind="fcfp",
        )
        graphs = [parse_smiles(s) for s in dataset.smiles()]
        rows = np.zeros((len(graphs), fp_config.nbits))
        for i, g in enumerate(graphs):
            rows[i, fingerprint_graph(g, fp_config).bit_indices()] = 1.0
        return rows
    raise ConfigError(f"unknown benchmark method {method!r}")


def _unpack_bits(packed: np.ndarray, nbits: int) -> np.ndarray:
    out = np.zeros((packed.shape[0], nbits))
    for i in range(packed.shape[0]):
        out[i, bitset.to_indices(packed[i])] = 1.0
    return out


def _sortslice_fold_features(
    graphs, train_idx: np.ndarray, k: int, r_max: int, use_chirality: bool
) -> np.ndarray:
    """Per-fold Sort & Slice vectors; the ranking uses only training molecules."""
    fold_vocab = build_vocabulary(
        [graphs[i] for i in train_idx], r_max=r_max, k=k, use_chirality=use_chirality
    )
    return np.stack([sort_slice_vector(g, fold_vocab) for g in graphs])


def _stage_benchmark(config: RunConfig, outdir: Path) -> None:
    task = config["data.task"]
    dataset = _load_standardized(outdir, task)
    labels = dataset.labels()
    plans = read_split_csv(outdir / "splits.csv", dataset.ids())
    metrics = [parse_metric(m) for m in config["benchmark.metrics"]]
    _check_metric_task(metrics, task)
    objective = "squared_error" if task == "regression" else "logistic"
    graphs = None

    rows = []
    for method in config["benchmark.methods"]:
        if method == "ecfp_sortslice":
            if graphs is None:
                graphs = [parse_smiles(s) for s in dataset.smiles()]
            features = None
        else:
            features = _method_features(method, config, outdir, dataset)
        by_repeat: dict[int, list[SplitPlan]] = {}
        for plan in plans:
            if plan.tuning_flag:
                continue  # evaluation repeats only; repeat 0 is reserved for tuning
            by_repeat.setdefault(plan.repeat_id, []).append(plan)
        for repeat_id in sorted(by_repeat):
            fold_values: dict[str, list[float]] = {m.label(): [] for m in metrics}
            drops = []
            for plan in sorted(by_repeat[repeat_id], key=lambda p: p.fold_id):
                if plan.dropped:
                    drops.append(True)
                    for m in metrics:
                        fold_values[m.label()].append(float("nan"))
                    continue
                drops.append(False)
                if method == "ecfp_sortslice":
                    feats = _sortslice_fold_features(
                        graphs, plan.train_idx, config["fp.nbits"], config["fp.radius"], config["fp.chirality"]
                    )
                else:
                    feats = features
                predictor_config = gbdt.GbdtConfig(
                    n_estimators=config["predictor.n_estimators"],
                    learning_rate=config["predictor.learning_rate"],
                    num_leaves=config["predictor.num_leaves"],
                    min_data_in_leaf=config["predictor.min_data_in_leaf"],
                    feature_fraction=config["predictor.feature_fraction"],
                    bagging_fraction=config["predictor.bagging_fraction"],
                    reg_lambda=config["predictor.reg_lambda"],
                    seed=derive_seed(config["seed"], "gbdt", method, repeat_id, plan.fold_id),
                )
                model = gbdt.fit(feats[plan.train_idx], labels[plan.train_idx], objective, predictor_config)
                pred = model.predict(feats[plan.test_idx])
                for m in metrics:
                    fold_values[m.label()].append(compute_metric(m, labels[plan.test_idx], pred))
            used = sum(1 for d in drops if not d)
            for m in metrics:
                value = fold_mean(fold_values[m.label()], drops)
                rows.append((method, dataset.name, m.label(), repeat_id, value, used))

    with (outdir / "metrics.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "dataset", "metric", "repeat", "value", "folds_used"])
        for method, name, metric, repeat_id, value, used in rows:
            writer.writerow([method, name, metric, repeat_id, f"{value:.12g}", used])


def _check_metric_task(metrics, task: str) -> None:
    for m in metrics:
        regression = m.kind in ("r2", "pearson", "mape")
        if regression != (task == "regression"):
            raise ConfigError(f"metric {m.label()} does not match task kind {task!r}")


def _stage_stats(config: RunConfig, outdir: Path) -> None:
    table: dict[tuple[str, str], dict[int, float]] = {}
    datasets: dict[str, str] = {}
    with (outdir / "metrics.csv").open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["method"], row["metric"])
            table.setdefault(key, {})[int(row["repeat"])] = float(row["value"])
            datasets[row["method"]] = row["dataset"]

    metric_labels = sorted({metric for _, metric in table})
    out_rows = []
    for metric_label in metric_labels:
        methods = sorted({method for method, metric in table if metric == metric_label})
        if len(methods) < 2:
            continue
        repeats = sorted(set.intersection(*(set(table[(m, metric_label)]) for m in methods)))
        vectors = [
            MetricVector(
                method=m,
                dataset=datasets[m],
                metric=parse_metric(metric_label),
                per_repeat=np.array([table[(m, metric_label)][r] for r in repeats]),
                folds_used=[0] * len(repeats),
            )
            for m in methods
        ]
        for res in multiple_comparison(vectors, alpha=config["stats.alpha"]):
            out_rows.append(res)

    with (outdir / "comparison.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["dataset", "metric", "method_a", "method_b", "p_raw", "p_adjusted", "r_rb", "stars", "note"]
        )
        for r in out_rows:
            writer.writerow(
                [
                    r.dataset,
                    r.metric_label,
                    r.method_a,
                    r.method_b,
                    _fmt_p(r.p_raw),
                    _fmt_p(r.p_adjusted),
                    f"{r.r_rb:.6g}",
                    r.stars,
                    r.note,
                ]
            )


def _fmt_p(p: float) -> str:
    return "nan" if not np.isfinite(p) else f"{p:.6g}"


def _stage_importance(config: RunConfig, outdir: Path) -> None:
    task = config["data.task"]
    dataset = _load_standardized(outdir, task)
    labels = dataset.labels()
    vocab = load_vocabulary(outdir / "vocab.json")
    model, _ = load_model(outdir / "model.npz")
    plans = read_split_csv(outdir / "splits.csv", dataset.ids())
    repeat = config["importance.repeat"]
    folds = [
        (p.train_idx, p.test_idx)
        for p in plans
        if p.repeat_id == repeat and not p.dropped
    ]
    if not folds:
        raise DataError(f"no usable folds in repeat {repeat} for importance")
    tokenized = [tokenize(parse_smiles(s), vocab) for s in dataset.smiles()]
    metric = parse_metric(config["importance.metric"])
    predictor_config = gbdt.GbdtConfig(
        n_estimators=config["predictor.n_estimators"],
        learning_rate=config["predictor.learning_rate"],
        num_leaves=config["predictor.num_leaves"],
        min_data_in_leaf=config["predictor.min_data_in_leaf"],
        feature_fraction=config["predictor.feature_fraction"],
        bagging_fraction=config["predictor.bagging_fraction"],
        reg_lambda=config["predictor.reg_lambda"],
        seed=derive_seed(config["seed"], "importance-gbdt"),
    )
    report = gin_importance_over_folds(
        model,
        vocab,
        tokenized,
        labels,
        folds,
        metric,
        iterations=config["importance.iterations"],
        predictor_config=predictor_config,
        seed=derive_seed(config["seed"], "importance"),
    )
    write_importance_csv(report, outdir / "importance.csv")
