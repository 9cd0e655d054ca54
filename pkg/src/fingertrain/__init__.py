"""Fingerprint-supervised GIN pre-training and OOD benchmarking toolkit.

The toolchain covers SMILES parsing and standardisation, Morgan circular
fingerprints (ECFP/FCFP invariants), Sort & Slice substructure vocabularies,
a small autodiff engine with a tokenised Graph Isomorphism Network,
similarity-filtered pre-training corpora, Butina-clustered grouped
cross-validation, a gradient-boosted tree predictor, non-parametric model
comparison, and permutation-based substructure importance.
"""

__version__ = "0.1.0"

from fingertrain.errors import (
    ConfigError,
    DataError,
    FingertrainError,
    SanitizeError,
    SmilesParseError,
    UndefinedMetricError,
)

__all__ = [
    "__version__",
    "FingertrainError",
    "SmilesParseError",
    "SanitizeError",
    "ConfigError",
    "DataError",
    "UndefinedMetricError",
]
