"""Butina clustering on Tanimoto distances.

Classic greedy variant: neighbor lists at distance <= cutoff, candidates
visited by descending neighbor count (ascending index on ties), each
unassigned candidate becomes a centroid absorbing its unassigned neighbors.
Pairwise similarities are computed blockwise with popcount kernels so the
full matrix is never materialised beyond one row block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fingertrain import kernels
from fingertrain.errors import DataError

DEFAULT_BLOCK_ROWS = 256


@dataclass
class ClusterAssignment:
    cluster_of: np.ndarray  # per-record cluster index
    centroids: list[int]  # record index of each cluster's centroid
    cutoff: float

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.cluster_of == cluster)


def neighbor_lists(packed: np.ndarray, cutoff: float, block_rows: int = DEFAULT_BLOCK_ROWS) -> list[np.ndarray]:
    """Indices within Tanimoto distance <= cutoff of each row (self excluded)."""
    n = packed.shape[0]
    min_sim = 1.0 - cutoff
    out: list[np.ndarray] = []
    for start in range(0, n, block_rows):
        stop = min(start + block_rows, n)
        sims = kernels.tanimoto_block(packed[start:stop], packed)
        for local, row in enumerate(sims):
            idx = np.flatnonzero(row >= min_sim - 1e-12)
            out.append(idx[idx != start + local])
    return out


def butina_cluster(packed: np.ndarray, cutoff: float, block_rows: int = DEFAULT_BLOCK_ROWS) -> ClusterAssignment:
    """Cluster packed fingerprints; clusters are indexed by descending size."""
    n = packed.shape[0]
    if n == 0:
        raise DataError("butina clustering needs at least one fingerprint")
    neighbors = neighbor_lists(packed, cutoff, block_rows)
    order = sorted(range(n), key=lambda i: (-len(neighbors[i]), i))

    assigned = np.full(n, -1, dtype=np.int64)
    raw_clusters: list[tuple[int, list[int]]] = []  # (centroid, members)
    for cand in order:
        if assigned[cand] >= 0:
            continue
        members = [cand]
        assigned[cand] = len(raw_clusters)
        for nbr in neighbors[cand]:
            if assigned[nbr] < 0:
                assigned[nbr] = len(raw_clusters)
                members.append(int(nbr))
        raw_clusters.append((cand, members))

    # Reindex in non-increasing size order; centroid index breaks ties.
    ranking = sorted(range(len(raw_clusters)), key=lambda c: (-len(raw_clusters[c][1]), raw_clusters[c][0]))
    remap = {old: new for new, old in enumerate(ranking)}
    cluster_of = np.array([remap[c] for c in assigned], dtype=np.int64)
    centroids = [raw_clusters[old][0] for old in ranking]
    return ClusterAssignment(cluster_of=cluster_of, centroids=centroids, cutoff=cutoff)
