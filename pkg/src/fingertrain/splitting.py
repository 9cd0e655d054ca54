"""Repeated grouped cross-validation split plans.

Clusters are atomic: a cluster's records land on exactly one side of every
split, which is what makes the held-out folds out-of-distribution. Fold
assignment is greedy over clusters in descending size (shuffled within equal
sizes by the repeat seed): regression balances record counts, binary tasks
balance positive counts first. Binary folds that end up with no test-side
positives are emitted flagged as dropped rather than silently skipped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from fingertrain.clustering import ClusterAssignment
from fingertrain.errors import ConfigError, DataError
from fingertrain.seeds import rng_for


@dataclass
class SplitPlan:
    repeat_id: int
    fold_id: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    tuning_flag: bool
    dropped: bool = False


def repeated_grouped_cv(
    labels: np.ndarray,
    task_kind: str,
    groups: ClusterAssignment,
    k: int,
    repeats: int,
    seed: int,
) -> Iterator[SplitPlan]:
    """Yield k folds per repeat; repeat 0 carries the tuning flag."""
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}")
    labels = np.asarray(labels, dtype=np.float64)
    cluster_of = groups.cluster_of
    if cluster_of.shape[0] != labels.shape[0]:
        raise DataError("cluster assignment does not cover every record")
    n_clusters = groups.n_clusters
    if n_clusters < k:
        raise DataError(f"only {n_clusters} clusters for {k} folds")

    members = [np.flatnonzero(cluster_of == c) for c in range(n_clusters)]
    sizes = np.array([m.size for m in members])
    positives = np.array([float(labels[m].sum()) for m in members]) if task_kind == "binary" else np.zeros(n_clusters)

    for repeat in range(repeats):
        rng = rng_for(seed, "cv", repeat)
        shuffled = rng.permutation(n_clusters)
        position = np.empty(n_clusters, dtype=np.int64)
        position[shuffled] = np.arange(n_clusters)
        # Big clusters first; the shuffle decides order among equal sizes.
        order = sorted(range(n_clusters), key=lambda c: (-sizes[c], position[c]))
        fold_records = np.zeros(k, dtype=np.int64)
        fold_pos = np.zeros(k)
        fold_of_cluster = np.empty(n_clusters, dtype=np.int64)
        for c in order:
            if task_kind == "binary":
                cost = [(fold_pos[f] + positives[c], fold_records[f] + sizes[c], f) for f in range(k)]
            else:
                cost = [(fold_records[f] + sizes[c], f) for f in range(k)]
            f = min(cost)[-1]
            fold_of_cluster[c] = f
            fold_records[f] += sizes[c]
            fold_pos[f] += positives[c]

        fold_of_record = fold_of_cluster[cluster_of]
        for fold in range(k):
            test_mask = fold_of_record == fold
            test_idx = np.flatnonzero(test_mask)
            train_idx = np.flatnonzero(~test_mask)
            dropped = bool(task_kind == "binary" and labels[test_idx].sum() == 0)
            yield SplitPlan(
                repeat_id=repeat,
                fold_id=fold,
                train_idx=train_idx,
                test_idx=test_idx,
                seed=seed,
                tuning_flag=repeat == 0,
                dropped=dropped,
            )


def write_split_csv(plans: list[SplitPlan], record_ids: list[str], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repeat", "fold", "record_id", "side", "dropped_flag"])
        for plan in plans:
            flag = int(plan.dropped)
            for idx in plan.train_idx:
                writer.writerow([plan.repeat_id, plan.fold_id, record_ids[idx], "train", flag])
            for idx in plan.test_idx:
                writer.writerow([plan.repeat_id, plan.fold_id, record_ids[idx], "test", flag])


def read_split_csv(path: str | Path, record_ids: list[str]) -> list[SplitPlan]:
    index_of = {rid: i for i, rid in enumerate(record_ids)}
    folds: dict[tuple[int, int], dict] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["repeat"]), int(row["fold"]))
            rec = folds.setdefault(key, {"train": [], "test": [], "dropped": False})
            rec[row["side"]].append(index_of[row["record_id"]])
            rec["dropped"] = rec["dropped"] or row["dropped_flag"] == "1"
    plans = []
    for (repeat, fold), rec in sorted(folds.items()):
        plans.append(
            SplitPlan(
                repeat_id=repeat,
                fold_id=fold,
                train_idx=np.array(sorted(rec["train"]), dtype=np.int64),
                test_idx=np.array(sorted(rec["test"]), dtype=np.int64),
                seed=-1,
                tuning_flag=repeat == 0,
                dropped=rec["dropped"],
            )
        )
    return plans
