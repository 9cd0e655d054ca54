"""Similarity filtering of pre-training corpora against benchmark molecules.

A pre-training molecule survives when its maximum Tanimoto similarity to
every benchmark molecule does not exceed the threshold; only strictly
greater similarity excludes, applied uniformly, so a threshold of 1.0
excludes nothing (exact-fingerprint matches sit at similarity 1.0 and are
retained). The survivor set is then optionally subsampled uniformly without
replacement to a fixed size so corpora at different thresholds stay
comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fingertrain import kernels
from fingertrain.errors import ConfigError, DataError
from fingertrain.seeds import rng_for

BLOCK_ROWS = 256


@dataclass(frozen=True)
class FilterConfig:
    threshold: float
    target_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.target_size is not None and self.target_size < 0:
            raise ConfigError("target_size must be non-negative")


def max_similarity_to(packed_rows: np.ndarray, packed_reference: np.ndarray) -> np.ndarray:
    """Per-row maximum Tanimoto similarity against a reference set."""
    n = packed_rows.shape[0]
    out = np.zeros(n, dtype=np.float64)
    for start in range(0, n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, n)
        sims = kernels.tanimoto_block(packed_rows[start:stop], packed_reference)
        out[start:stop] = sims.max(axis=1) if sims.size else 0.0
    return out


def similarity_filter(
    pretrain_packed: np.ndarray,
    benchmark_packed: np.ndarray,
    config: FilterConfig,
) -> np.ndarray:
    """Indices of retained pre-training molecules, ascending."""
    if benchmark_packed.shape[0] == 0:
        survivors = np.arange(pretrain_packed.shape[0])
    else:
        max_sim = max_similarity_to(pretrain_packed, benchmark_packed)
        survivors = np.flatnonzero(max_sim <= config.threshold + 1e-12)
    if config.target_size is None:
        return survivors
    if config.target_size > survivors.size:
        raise DataError(
            f"target_size {config.target_size} exceeds {survivors.size} surviving molecules"
        )
    rng = rng_for(config.seed, "similarity-filter")
    chosen = rng.choice(survivors, size=config.target_size, replace=False)
    return np.sort(chosen)
