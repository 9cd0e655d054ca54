"""Deterministic seed derivation.

All randomness in a run flows from one global seed; each stage (and each
repeat within a stage) draws from a named substream so that adding or
reordering stages never perturbs the others.
"""

import hashlib

import numpy as np

_MASK63 = (1 << 63) - 1


def derive_seed(global_seed: int, *names: object) -> int:
    """Derive a 63-bit child seed from ``global_seed`` and a name path."""
    tag = ":".join(str(n) for n in (global_seed, *names))
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & _MASK63


def rng_for(global_seed: int, *names: object) -> np.random.Generator:
    """Generator seeded from the named substream."""
    return np.random.default_rng(derive_seed(global_seed, *names))
