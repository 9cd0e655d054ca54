"""Notebook bindings for the fingertrain toolchain.

Thin wrappers: every function shells out to the core CLI and parses its
documented output formats, so results are bit-identical to command-line
use. Sequence inputs are batched into single CLI invocations. Artifact
owners (vocabularies) are handles whose lifetime controls the backing
files; using a released handle raises instead of crashing.
"""

from __future__ import annotations

import csv
import io
import json
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from fingertrain_bindings._cli import BindingsError, run

__all__ = [
    "BindingsError",
    "parse",
    "standardize",
    "fingerprint",
    "tanimoto",
    "build_vocab",
    "tokenize",
    "make_splits",
    "metric",
    "wilcoxon",
    "rank_biserial",
    "VocabularyHandle",
    "StandardizeResult",
    "PairedComparison",
]


def parse(smiles: str) -> dict:
    """Molecular graph of one SMILES string as a plain dict."""
    return json.loads(run(["parse", "--smiles", smiles]))


@dataclass(frozen=True)
class StandardizeResult:
    ok: bool
    smiles: str | None
    reason: str | None


def standardize(smiles: str | Sequence[str]) -> StandardizeResult | list[StandardizeResult]:
    """Standardise one molecule or a sequence of them."""
    single = isinstance(smiles, str)
    items = [smiles] if single else list(smiles)
    with tempfile.TemporaryDirectory(prefix="ftb-") as tmp:
        src = Path(tmp) / "in.csv"
        _write_molecules(src, items)
        out = Path(tmp) / "out.csv"
        rej = Path(tmp) / "rej.csv"
        run(["standardize", "--in", str(src), "--out", str(out), "--rejects", str(rej)])
        ok_by_id = {row["id"]: row["smiles"] for row in csv.DictReader(out.open())}
        reasons = {row["smiles"]: row["reason"] for row in csv.DictReader(rej.open())}
        results = []
        for i, item in enumerate(items):
            key = f"m{i}"
            if key in ok_by_id:
                results.append(StandardizeResult(True, ok_by_id[key], None))
            else:
                results.append(StandardizeResult(False, None, reasons.get(item, "rejected")))
    return results[0] if single else results


def fingerprint(
    smiles: str | Sequence[str],
    radius: int = 2,
    nbits: int = 2048,
    chirality: bool = True,
    kind: str = "ecfp",
) -> str | list[str]:
    """Hex-encoded folded fingerprints, identical to the CLI's CSV column."""
    single = isinstance(smiles, str)
    items = [smiles] if single else list(smiles)
    with tempfile.TemporaryDirectory(prefix="ftb-") as tmp:
        src = Path(tmp) / "in.csv"
        _write_molecules(src, items)
        out = Path(tmp) / "fp.csv"
        run(
            [
                "fingerprint",
                "--in", str(src),
                "--out", str(out),
                "--radius", str(radius),
                "--nbits", str(nbits),
                "--chirality" if chirality else "--no-chirality",
                "--kind", kind,
            ]
        )
        rows = {row["id"]: row["fingerprint_hex"] for row in csv.DictReader(out.open())}
    hexes = [rows[f"m{i}"] for i in range(len(items))]
    return hexes[0] if single else hexes


def tanimoto(
    a: str,
    b: str,
    radius: int = 2,
    nbits: int = 2048,
    chirality: bool = True,
    kind: str = "ecfp",
    as_hex: bool = False,
) -> float:
    """Tanimoto similarity of two molecules (or two hex fingerprints)."""
    side = ("--hex-a", "--hex-b") if as_hex else ("--smiles-a", "--smiles-b")
    out = run(
        [
            "tanimoto",
            side[0], a,
            side[1], b,
            "--radius", str(radius),
            "--nbits", str(nbits),
            "--chirality" if chirality else "--no-chirality",
            "--kind", kind,
        ]
    )
    return float(out.strip())


class VocabularyHandle:
    """Owns a vocabulary artifact; operations raise after release."""

    def __init__(self, tmpdir: tempfile.TemporaryDirectory, path: Path):
        self._tmpdir = tmpdir
        self._path = path
        self._released = False

    def _require_live(self) -> Path:
        if self._released:
            raise BindingsError("operation on a released vocabulary handle")
        return self._path

    @property
    def path(self) -> Path:
        return self._require_live()

    def file_bytes(self) -> bytes:
        return self._require_live().read_bytes()

    def to_dict(self) -> dict:
        return json.loads(self._require_live().read_text(encoding="utf-8"))

    def entries(self) -> list[tuple[int, int, int, int]]:
        """(id, radius, count, rank) rows in rank order."""
        return [tuple(e) for e in self.to_dict()["entries"]]

    def release(self) -> None:
        if not self._released:
            self._released = True
            self._tmpdir.cleanup()

    close = release

    def __enter__(self) -> "VocabularyHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.release()


def build_vocab(
    smiles: Sequence[str],
    rmax: int,
    k: int,
    kind: str = "ecfp",
    chirality: bool = True,
) -> VocabularyHandle:
    """Build a frequency-ranked substructure vocabulary; returns a handle."""
    tmpdir = tempfile.TemporaryDirectory(prefix="ftb-vocab-")
    tmp = Path(tmpdir.name)
    src = tmp / "corpus.csv"
    _write_molecules(src, list(smiles))
    out = tmp / "vocab.json"
    try:
        run(
            [
                "vocab", "build",
                "--corpus", str(src),
                "--rmax", str(rmax),
                "--k", str(k),
                "--out", str(out),
                "--kind", kind,
                "--chirality" if chirality else "--no-chirality",
            ]
        )
    except BindingsError:
        tmpdir.cleanup()
        raise
    return VocabularyHandle(tmpdir, out)


def tokenize(smiles: str | Sequence[str], vocab: VocabularyHandle) -> list[list[int]] | list[list[list[int]]]:
    """Per-atom, per-radius token rows under a built vocabulary."""
    vocab_path = vocab.path  # raises on released handles
    single = isinstance(smiles, str)
    items = [smiles] if single else list(smiles)
    with tempfile.TemporaryDirectory(prefix="ftb-") as tmp:
        src = Path(tmp) / "in.csv"
        _write_molecules(src, items)
        out = Path(tmp) / "tokens.tsv"
        run(["vocab", "apply", "--vocab", str(vocab_path), "--in", str(src), "--out", str(out)])
        by_id = {}
        for line in out.read_text(encoding="utf-8").splitlines():
            mid, _, body = line.partition("\t")
            by_id[mid] = [[int(t) for t in atom.split(",")] for atom in body.split(";")]
    tokens = [by_id[f"m{i}"] for i in range(len(items))]
    return tokens[0] if single else tokens


def make_splits(
    ids: Sequence[str],
    smiles: Sequence[str],
    labels: Sequence[float],
    task: str = "regression",
    k: int = 5,
    repeats: int = 5,
    cutoff: float = 0.65,
    seed: int = 0,
) -> list[dict]:
    """Grouped cross-validation plans as dicts with train/test id lists."""
    with tempfile.TemporaryDirectory(prefix="ftb-") as tmp:
        src = Path(tmp) / "data.csv"
        with src.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "smiles", "label"])
            for row in zip(ids, smiles, labels):
                writer.writerow(row)
        out = Path(tmp) / "splits.csv"
        run(
            [
                "split", "make",
                "--in", str(src),
                "--task", task,
                "--k", str(k),
                "--repeats", str(repeats),
                "--cutoff", str(cutoff),
                "--seed", str(seed),
                "--out", str(out),
            ]
        )
        folds: dict[tuple[int, int], dict] = {}
        for row in csv.DictReader(out.open()):
            key = (int(row["repeat"]), int(row["fold"]))
            rec = folds.setdefault(
                key,
                {"repeat": key[0], "fold": key[1], "train_ids": [], "test_ids": [], "dropped": False},
            )
            rec["train_ids" if row["side"] == "train" else "test_ids"].append(row["record_id"])
            rec["dropped"] = rec["dropped"] or row["dropped_flag"] == "1"
    return [folds[key] for key in sorted(folds)]


def metric(kind: str, truth: Sequence[float], pred: Sequence[float]) -> float:
    """One evaluation metric over paired truth/prediction vectors."""
    with tempfile.TemporaryDirectory(prefix="ftb-") as tmp:
        src = Path(tmp) / "values.csv"
        with src.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["truth", "pred"])
            for row in zip(truth, pred):
                writer.writerow([f"{row[0]:.17g}", f"{row[1]:.17g}"])
        out = run(["metric", "--kind", kind, "--in", str(src)])
    return float(out.strip())


@dataclass(frozen=True)
class PairedComparison:
    p_raw: float
    p_adjusted: float
    r_rb: float
    stars: str
    note: str


def _compare(a: Sequence[float], b: Sequence[float], metric_label: str) -> PairedComparison:
    with tempfile.TemporaryDirectory(prefix="ftb-") as tmp:
        metrics_csv = Path(tmp) / "metrics.csv"
        with metrics_csv.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "dataset", "metric", "repeat", "value", "folds_used"])
            for rep, (va, vb) in enumerate(zip(a, b), start=1):
                writer.writerow(["method_a", "bound", metric_label, rep, f"{va:.17g}", 1])
                writer.writerow(["method_b", "bound", metric_label, rep, f"{vb:.17g}", 1])
        out = Path(tmp) / "cmp.csv"
        run(["stats", "compare", "--metrics", str(metrics_csv), "--out", str(out)])
        rows = list(csv.DictReader(out.open()))
    if len(rows) != 1:
        raise BindingsError(f"expected one comparison row, got {len(rows)}")
    row = rows[0]
    return PairedComparison(
        p_raw=float(row["p_raw"]),
        p_adjusted=float(row["p_adjusted"]),
        r_rb=float(row["r_rb"]),
        stars=row["stars"],
        note=row["note"],
    )


def wilcoxon(a: Sequence[float], b: Sequence[float]) -> PairedComparison:
    """Two-sided paired signed-rank comparison of two aligned vectors."""
    return _compare(a, b, "r2")


def rank_biserial(a: Sequence[float], b: Sequence[float], higher_is_better: bool = True) -> float:
    """Paired effect size (wins - losses) / n."""
    label = "r2" if higher_is_better else "mape"
    return _compare(a, b, label).r_rb


def _write_molecules(path: Path, smiles: list[str]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "smiles"])
        for i, s in enumerate(smiles):
            writer.writerow([f"m{i}", s])
