"""Command-line interface.

Each subcommand is a thin shell over one module's operation; ``pipeline
run`` executes the whole chain from a run configuration. Exit codes: 0
success, 2 configuration error, 3 data error, 4 stage failure.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from fingertrain import __version__, bitset
from fingertrain.chem.parser import parse_smiles
from fingertrain.chem.standardize import standardize_smiles
from fingertrain.chem.writer import to_smiles
from fingertrain.clustering import butina_cluster
from fingertrain.config import load_config
from fingertrain.data import load_dataset_csv, substructure_coverage
from fingertrain.errors import ConfigError, DataError, FingertrainError, StageError
from fingertrain.filtering import FilterConfig, similarity_filter
from fingertrain.fingerprints import FingerprintConfig, fingerprint_graph, morgan_enumerate, sparse_to_line
from fingertrain.metrics import MetricVector, parse_metric
from fingertrain.splitting import repeated_grouped_cv, write_split_csv
from fingertrain.stats import multiple_comparison, rank_biserial, wilcoxon_signed_rank
from fingertrain.vocab import build_vocabulary, corpus_fingerprint, load_vocabulary, save_vocabulary, tokenize

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STAGE = 4


def _die(exc: FingertrainError) -> None:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, ConfigError):
        sys.exit(EXIT_CONFIG)
    if isinstance(exc, StageError):
        sys.exit(EXIT_STAGE)
    sys.exit(EXIT_DATA)


@click.group()
@click.version_option(version=__version__, prog_name="fingertrain")
def main() -> None:
    """Fingerprint-supervised GIN pre-training toolchain."""


def _read_smiles_input(path: str, smiles_column: str) -> list[tuple[str, str]]:
    """(id, smiles) pairs from a CSV with a smiles column or plain lines."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    first = text.splitlines()[0] if text.splitlines() else ""
    if "," in first and smiles_column in [c.strip() for c in first.split(",")]:
        out = []
        with p.open(newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.DictReader(fh)):
                out.append((row.get("id", f"m{i}"), row[smiles_column]))
        return out
    return [(f"m{i}", line.strip()) for i, line in enumerate(text.splitlines()) if line.strip()]


def _fp_options(fn):
    fn = click.option("--radius", default=2, show_default=True)(fn)
    fn = click.option("--nbits", default=2048, show_default=True)(fn)
    fn = click.option("--chirality/--no-chirality", default=True, show_default=True)(fn)
    fn = click.option("--kind", default="ecfp", type=click.Choice(["ecfp", "fcfp"]), show_default=True)(fn)
    return fn


@main.command()
@click.option("--smiles", required=True)
def parse(smiles):
    """Parse one SMILES string and print the graph as JSON."""
    try:
        graph = parse_smiles(smiles)
        doc = {
            "n_atoms": graph.n_atoms(),
            "n_bonds": len(graph.bonds),
            "atoms": [
                {
                    "element": a.element,
                    "charge": a.charge,
                    "hcount": a.hcount,
                    "aromatic": a.aromatic,
                    "in_ring": a.in_ring,
                    "isotope": a.isotope,
                    "chirality": a.chirality.name.lower(),
                }
                for a in graph.atoms
            ],
            "bonds": [{"a": b.a, "b": b.b, "order": b.order.name.lower()} for b in graph.bonds],
        }
        click.echo(json.dumps(doc, sort_keys=True))
    except FingertrainError as exc:
        _die(exc)


@main.command()
@click.option("--smiles-a", default=None, help="First molecule as SMILES.")
@click.option("--smiles-b", default=None, help="Second molecule as SMILES.")
@click.option("--hex-a", default=None, help="First fingerprint as hex bitset.")
@click.option("--hex-b", default=None, help="Second fingerprint as hex bitset.")
@_fp_options
def tanimoto(smiles_a, smiles_b, hex_a, hex_b, radius, nbits, chirality, kind):
    """Tanimoto similarity of two molecules or two hex fingerprints."""
    try:
        from fingertrain.fingerprints import FoldedFingerprint
        from fingertrain.fingerprints import tanimoto as tanimoto_op

        config = FingerprintConfig(radius=radius, nbits=nbits, use_chirality=chirality, kind=kind)

        def folded(smiles, hexes):
            if smiles is not None:
                return fingerprint_graph(parse_smiles(smiles), config)
            if hexes is not None:
                return FoldedFingerprint(bitset.from_hex(hexes, nbits), nbits)
            raise ConfigError("each side needs either a SMILES string or a hex fingerprint")

        value = tanimoto_op(folded(smiles_a, hex_a), folded(smiles_b, hex_b))
        click.echo(f"{value:.12g}")
    except (FingertrainError, ValueError) as exc:
        if isinstance(exc, FingertrainError):
            _die(exc)
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)


@main.command()
@click.option("--kind", required=True, help="Metric label, e.g. r2, mape, auroc, ef0.1.")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True), help="CSV with truth,pred columns.")
def metric(kind, input_path):
    """Evaluate one metric over a truth/prediction CSV."""
    try:
        from fingertrain.metrics import compute_metric

        truth, pred = [], []
        with Path(input_path).open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                truth.append(float(row["truth"]))
                pred.append(float(row["pred"]))
        value = compute_metric(parse_metric(kind), np.asarray(truth), np.asarray(pred))
        click.echo(f"{value:.12g}")
    except FingertrainError as exc:
        _die(exc)


@main.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--rejects", "rejects_path", default=None, type=click.Path())
@click.option("--smiles-col", default="smiles", show_default=True)
def standardize(input_path, output_path, rejects_path, smiles_col):
    """Standardise molecules; failures go to the rejects file."""
    try:
        pairs = _read_smiles_input(input_path, smiles_col)
        kept, rejects = [], []
        for mid, smi in pairs:
            report = standardize_smiles(smi)
            if report.ok:
                kept.append((mid, to_smiles(report.output)))
            else:
                rejects.append((smi, report.failure_reason))
        with Path(output_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "smiles"])
            writer.writerows(kept)
        rej_path = rejects_path or str(Path(output_path).with_suffix(".rejects.csv"))
        with Path(rej_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["smiles", "reason"])
            writer.writerows(rejects)
        click.echo(f"standardized {len(kept)} molecules, rejected {len(rejects)}")
    except FingertrainError as exc:
        _die(exc)


@main.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--sparse-out", default=None, type=click.Path())
@click.option("--smiles-col", default="smiles", show_default=True)
@_fp_options
def fingerprint(input_path, output_path, sparse_out, smiles_col, radius, nbits, chirality, kind):
    """Fold Morgan fingerprints to hex bitsets (one row per molecule)."""
    try:
        config = FingerprintConfig(radius=radius, nbits=nbits, use_chirality=chirality, kind=kind)
        pairs = _read_smiles_input(input_path, smiles_col)
        sparse_fh = Path(sparse_out).open("w", encoding="utf-8") if sparse_out else None
        with Path(output_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "fingerprint_hex"])
            for mid, smi in pairs:
                graph = parse_smiles(smi)
                sp = morgan_enumerate(graph, config, molecule_ref=mid)
                idx = {e.id & (nbits - 1) for e in sp.entries}
                writer.writerow([mid, bitset.to_hex(bitset.from_indices(idx, nbits))])
                if sparse_fh:
                    sparse_fh.write(sparse_to_line(sp) + "\n")
        if sparse_fh:
            sparse_fh.close()
        click.echo(f"fingerprinted {len(pairs)} molecules")
    except FingertrainError as exc:
        _die(exc)


@main.group()
def vocab() -> None:
    """Build or apply Sort & Slice vocabularies."""


@vocab.command("build")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--rmax", required=True, type=int)
@click.option("--k", required=True, type=int)
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--kind", default="ecfp", type=click.Choice(["ecfp", "fcfp"]), show_default=True)
@click.option("--chirality/--no-chirality", default=True, show_default=True)
@click.option("--smiles-col", default="smiles", show_default=True)
def vocab_build(corpus, rmax, k, output_path, kind, chirality, smiles_col):
    try:
        pairs = _read_smiles_input(corpus, smiles_col)
        graphs = [parse_smiles(s) for _, s in pairs]
        built = build_vocabulary(
            graphs,
            r_max=rmax,
            k=k,
            kind=kind,
            use_chirality=chirality,
            corpus_hash=corpus_fingerprint([s for _, s in pairs]),
        )
        save_vocabulary(built, output_path)
        click.echo(f"vocabulary with {len(built.entries)} ranked substructures (unk={built.unk_token})")
    except FingertrainError as exc:
        _die(exc)


@vocab.command("apply")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--smiles-col", default="smiles", show_default=True)
def vocab_apply(vocab_path, input_path, output_path, smiles_col):
    """Tokenise molecules: per-atom rows of per-radius tokens."""
    try:
        built = load_vocabulary(vocab_path)
        pairs = _read_smiles_input(input_path, smiles_col)
        with Path(output_path).open("w", encoding="utf-8") as fh:
            for mid, smi in pairs:
                tg = tokenize(parse_smiles(smi), built)
                rows = ";".join(",".join(str(t) for t in atom_row) for atom_row in tg.tokens)
                fh.write(f"{mid}\t{rows}\n")
        click.echo(f"tokenized {len(pairs)} molecules")
    except FingertrainError as exc:
        _die(exc)


@main.group()
def split() -> None:
    """Cross-validation split plans."""


@split.command("make")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--task", default="regression", type=click.Choice(["regression", "binary"]), show_default=True)
@click.option("--k", default=5, show_default=True)
@click.option("--repeats", default=200, show_default=True)
@click.option("--cutoff", default=0.65, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "output_path", required=True, type=click.Path())
@_fp_options
def split_make(input_path, task, k, repeats, cutoff, seed, output_path, radius, nbits, chirality, kind):
    try:
        dataset = load_dataset_csv(input_path, task_kind=task)
        config = FingerprintConfig(radius=radius, nbits=nbits, use_chirality=chirality, kind=kind)
        packed = np.stack([fingerprint_graph(parse_smiles(s), config).words for s in dataset.smiles()])
        clusters = butina_cluster(packed, cutoff=cutoff)
        plans = list(repeated_grouped_cv(dataset.labels(), task, clusters, k=k, repeats=repeats, seed=seed))
        write_split_csv(plans, dataset.ids(), output_path)
        dropped = sum(1 for p in plans if p.dropped)
        click.echo(f"{len(plans)} folds over {repeats} repeats, {clusters.n_clusters} clusters, {dropped} dropped")
    except FingertrainError as exc:
        _die(exc)


@main.command("filter")
@click.option("--pretrain", "pretrain_path", required=True, type=click.Path(exists=True))
@click.option("--benchmarks", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--target-size", default=None, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--smiles-col", default="smiles", show_default=True)
def filter_cmd(pretrain_path, benchmarks, threshold, target_size, seed, output_path, smiles_col):
    """Exclude pre-training molecules too similar to any benchmark molecule."""
    try:
        pre = _read_smiles_input(pretrain_path, smiles_col)
        bench = _read_smiles_input(benchmarks, smiles_col)
        config = FingerprintConfig(radius=2, nbits=2048, use_chirality=True)
        pre_packed = np.stack([fingerprint_graph(parse_smiles(s), config).words for _, s in pre])
        bench_packed = np.stack([fingerprint_graph(parse_smiles(s), config).words for _, s in bench])
        keep = similarity_filter(pre_packed, bench_packed, FilterConfig(threshold, target_size, seed))
        with Path(output_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "smiles"])
            for i in keep:
                writer.writerow([pre[i][0], pre[i][1]])
        click.echo(f"kept {keep.size} of {len(pre)} pre-training molecules")
    except FingertrainError as exc:
        _die(exc)


@main.command()
@click.option("--benchmark", "benchmark_path", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--top-n", default=None, type=int)
@click.option("--smiles-col", default="smiles", show_default=True)
def coverage(benchmark_path, vocab_path, top_n, smiles_col):
    """Percentage of benchmark substructures present in a vocabulary."""
    try:
        built = load_vocabulary(vocab_path)
        pairs = _read_smiles_input(benchmark_path, smiles_col)
        graphs = (parse_smiles(s) for _, s in pairs)
        pct = substructure_coverage(graphs, built, top_n=top_n)
        click.echo(f"{pct:.2f}")
    except FingertrainError as exc:
        _die(exc)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True), help="Standardized molecules CSV.")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--targets", default="ecfp", type=click.Choice(["ecfp"]), show_default=True)
@click.option("--target-radius", default=2, show_default=True)
@click.option("--target-nbits", default=2048, show_default=True)
@click.option("--chirality/--no-chirality", default=True, show_default=True)
@click.option("--epochs", default=50, show_default=True)
@click.option("--batch-size", default=128, show_default=True)
@click.option("--warmup-epochs", default=2, show_default=True)
@click.option("--half-life", default=5.0, show_default=True)
@click.option("--start-factor", default=0.5, show_default=True)
@click.option("--lr-scale", default=1.0, show_default=True)
@click.option("--embed-dim", default=512, show_default=True)
@click.option("--hidden-dim", default=512, show_default=True)
@click.option("--message-layers", default=3, show_default=True)
@click.option("--mlp-layers", default=3, show_default=True)
@click.option("--head-layers", default=2, show_default=True)
@click.option("--activation", default="hardswish", type=click.Choice(["hardswish", "gelu", "leaky_relu"]), show_default=True)
@click.option("--pooling", default="sum", type=click.Choice(["sum", "mean", "max"]), show_default=True)
@click.option("--dropout", default=0.125, show_default=True)
@click.option("--share-weights/--no-share-weights", default=True, show_default=True)
@click.option("--train-eps/--no-train-eps", default=True, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--smiles-col", default="smiles", show_default=True)
def pretrain(corpus, vocab_path, output_path, targets, target_radius, target_nbits, chirality,
             epochs, batch_size, warmup_epochs, half_life, start_factor, lr_scale,
             embed_dim, hidden_dim, message_layers, mlp_layers, head_layers, activation,
             pooling, dropout, share_weights, train_eps, seed, smiles_col):
    """Pre-train a GIN to predict hashed fingerprint bits."""
    try:
        from fingertrain.fingerprints import fingerprint_graph as fp_graph
        from fingertrain.nn.gin import GinConfig, GinModel
        from fingertrain.nn.io import save_model
        from fingertrain.nn.train import TrainConfig, pretrain as pretrain_op

        built = load_vocabulary(vocab_path)
        pairs = _read_smiles_input(corpus, smiles_col)
        graphs = [parse_smiles(s) for _, s in pairs]
        tokenized = [tokenize(g, built) for g in graphs]
        target_config = FingerprintConfig(radius=target_radius, nbits=target_nbits, use_chirality=chirality, kind=targets)
        target_matrix = np.zeros((len(graphs), target_nbits))
        for i, g in enumerate(graphs):
            target_matrix[i, fp_graph(g, target_config).bit_indices()] = 1.0
        gin_config = GinConfig(
            r_max=built.r_max,
            embed_dim=embed_dim,
            hidden_dim=hidden_dim,
            message_layers=message_layers,
            mlp_layers=mlp_layers,
            head_layers=head_layers,
            activation=activation,
            pooling=pooling,
            layer_agg="last",
            dropout=dropout,
            share_weights=share_weights,
            train_eps=train_eps,
        )
        model = GinModel(gin_config, built.n_tokens, target_nbits, np.random.default_rng(seed))
        tc = TrainConfig(
            epochs=epochs,
            batch_size=batch_size,
            warmup_epochs=warmup_epochs,
            lr_half_life_epochs=half_life,
            lr_start_factor=start_factor,
            lr_scale=lr_scale,
            seed=seed,
        )
        history = pretrain_op(model, tokenized, target_matrix, tc)
        save_model(model, output_path, vocab_ref=built.corpus_fingerprint,
                   metadata={"seed": seed, "epochs": epochs, "loss_history": history})
        last = f"{history[-1]:.4f}" if history else "n/a"
        click.echo(f"pre-trained on {len(graphs)} molecules for {epochs} epochs (final loss {last})")
    except FingertrainError as exc:
        _die(exc)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--smiles-col", default="smiles", show_default=True)
def featurise(model_path, vocab_path, input_path, output_path, smiles_col):
    """Frozen concat-readout embeddings for molecules."""
    try:
        from fingertrain.nn.gin import featurise as featurise_op
        from fingertrain.nn.io import load_model

        model, _ = load_model(model_path)
        built = load_vocabulary(vocab_path)
        pairs = _read_smiles_input(input_path, smiles_col)
        tokenized = [tokenize(parse_smiles(s), built) for _, s in pairs]
        emb = featurise_op(model, tokenized)
        with Path(output_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + [f"e{i}" for i in range(emb.shape[1])])
            for (mid, _), row in zip(pairs, emb):
                writer.writerow([mid] + [f"{v:.12g}" for v in row])
        click.echo(f"featurised {len(pairs)} molecules into {emb.shape[1]} dimensions")
    except FingertrainError as exc:
        _die(exc)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True)
def benchmark(config_path, force):
    """Run the pipeline through benchmarking (cached stages are skipped)."""
    _run_pipeline_cmd(config_path, force)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True)
def importance(config_path, force):
    """Run the pipeline with the importance stage enabled."""
    try:
        config = load_config(config_path)
        if not config["importance.enabled"]:
            raise ConfigError("importance.enabled must be true for the importance command")
        _run_pipeline_cmd(config_path, force)
    except FingertrainError as exc:
        _die(exc)


@main.group()
def stats() -> None:
    """Statistical comparisons."""


@stats.command("compare")
@click.option("--metrics", "metrics_paths", required=True, help="Comma-separated metrics CSV files.")
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--alpha", default=0.05, show_default=True)
def stats_compare(metrics_paths, output_path, alpha):
    """Pairwise Wilcoxon + rank-biserial over per-repeat metric vectors."""
    try:
        table: dict[tuple[str, str], dict[int, float]] = {}
        datasets: dict[str, str] = {}
        for path in metrics_paths.split(","):
            with Path(path.strip()).open(newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    table.setdefault((row["method"], row["metric"]), {})[int(row["repeat"])] = float(row["value"])
                    datasets[row["method"]] = row["dataset"]
        rows = []
        for metric_label in sorted({metric for _, metric in table}):
            methods = sorted({m for m, metric in table if metric == metric_label})
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
            rows.extend(multiple_comparison(vectors, alpha=alpha))
        with Path(output_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "metric", "method_a", "method_b", "p_raw", "p_adjusted", "r_rb", "stars", "note"])
            for r in rows:
                raw = "nan" if not np.isfinite(r.p_raw) else f"{r.p_raw:.6g}"
                adj = "nan" if not np.isfinite(r.p_adjusted) else f"{r.p_adjusted:.6g}"
                writer.writerow([r.dataset, r.metric_label, r.method_a, r.method_b, raw, adj, f"{r.r_rb:.6g}", r.stars, r.note])
        click.echo(f"compared {len(rows)} method pairs")
    except FingertrainError as exc:
        _die(exc)


@main.group()
def pipeline() -> None:
    """Full pipeline runs."""


def _run_pipeline_cmd(config_path: str, force: bool, threads: int | None = None) -> None:
    try:
        from fingertrain.pipeline import run_pipeline

        config = load_config(config_path)
        resolved = threads if threads is not None else os.environ.get("FINGERTRAIN_THREADS")
        if resolved is not None:
            config.values["threads"] = int(resolved)
        manifest = run_pipeline(config, force=force, echo=click.echo)
        click.echo(f"manifest: {Path(config['outdir']) / 'manifest.json'}")
    except FingertrainError as exc:
        _die(exc)


@pipeline.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True, help="Ignore cached stage records.")
@click.option("--threads", default=None, type=int, help="Worker threads; FINGERTRAIN_THREADS mirrors this.")
def pipeline_run(config_path, force, threads):
    """Execute every configured stage."""
    _run_pipeline_cmd(config_path, force, threads)


@main.command()
@click.option("--out", "output_dir", required=True, type=click.Path())
@click.option("--seed", default=11, show_default=True)
def toydata(output_dir, seed):
    """Materialise the bundled toy corpus and a ready-to-run config."""
    try:
        from fingertrain.toydata import write_toy_run

        config_path = write_toy_run(output_dir, seed=seed)
        click.echo(f"wrote {config_path}")
    except FingertrainError as exc:
        _die(exc)


if __name__ == "__main__":
    main()
