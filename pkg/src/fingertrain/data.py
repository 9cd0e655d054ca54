"""Labeled molecular datasets, unit conversions, and vocabulary coverage."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fingertrain.chem.graph import MolecularGraph
from fingertrain.errors import DataError
from fingertrain.fingerprints import morgan_enumerate
from fingertrain.vocab import Vocabulary

TASK_KINDS = ("regression", "binary")


@dataclass
class LabeledDataset:
    records: list[tuple[str, str, float]]  # (molecule_id, smiles, label)
    task_kind: str
    name: str

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise DataError(f"unknown task kind {self.task_kind!r}")
        ids = [r[0] for r in self.records]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate molecule ids in dataset {self.name!r}")
        if self.task_kind == "binary":
            bad = [r for r in self.records if r[2] not in (0.0, 1.0)]
            if bad:
                raise DataError(f"binary labels must be 0/1; offending id {bad[0][0]!r}")

    @property
    def n(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [r[0] for r in self.records]

    def smiles(self) -> list[str]:
        return [r[1] for r in self.records]

    def labels(self) -> np.ndarray:
        return np.array([r[2] for r in self.records], dtype=np.float64)


def load_dataset_csv(path: str | Path, task_kind: str, name: str = "", smiles_column: str = "smiles") -> LabeledDataset:
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty dataset file")
        for col in ("id", smiles_column, "label"):
            if col not in reader.fieldnames:
                raise DataError(f"{path}: missing column {col!r}")
        for row in reader:
            try:
                label = float(row["label"])
            except ValueError:
                raise DataError(f"{path}: non-numeric label for id {row['id']!r}") from None
            records.append((row["id"], row[smiles_column], label))
    return LabeledDataset(records=records, task_kind=task_kind, name=name or path.stem)


def save_dataset_csv(dataset: LabeledDataset, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "smiles", "label"])
        for mid, smi, label in dataset.records:
            writer.writerow([mid, smi, f"{label:.12g}"])


def convert_units(labels: Sequence[float], kind: str) -> list[float]:
    """Unit conversions used by the affinity and solubility tasks.

    ``nM_to_pKi``: pKi = -log10(value * 1e-9), requires positive affinities.
    ``logM_to_loguM``: adds 6 (log10 of the M -> uM factor).
    """
    if kind == "nM_to_pKi":
        out = []
        for v in labels:
            if v <= 0:
                raise DataError(f"affinity must be positive for pKi conversion, got {v}")
            out.append(-math.log10(v * 1e-9))
        return out
    if kind == "logM_to_loguM":
        return [v + 6.0 for v in labels]
    raise DataError(f"unknown unit conversion {kind!r}")


def substructure_coverage(
    benchmark_graphs: Iterable[MolecularGraph],
    vocab: Vocabulary,
    top_n: int | None = None,
) -> float:
    """Percentage of unique benchmark substructures present in the vocabulary.

    ``top_n`` restricts the vocabulary to its n most frequent substructures.
    """
    config = vocab.fingerprint_config()
    benchmark_ids: set[int] = set()
    count = 0
    for graph in benchmark_graphs:
        count += 1
        benchmark_ids |= morgan_enumerate(graph, config).ids()
    if count == 0 or not benchmark_ids:
        raise DataError("empty benchmark: coverage undefined")
    if top_n is None:
        vocab_ids = set(vocab.rank_of)
    else:
        vocab_ids = {e.id for e in vocab.entries if e.rank <= top_n}
    covered = len(benchmark_ids & vocab_ids)
    return 100.0 * covered / len(benchmark_ids)
