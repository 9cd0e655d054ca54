"""Hot numeric kernels with a compiled core and a NumPy fallback.

The compiled Cython module (``fingertrain.kernels._fast``) is preferred when
it was built; otherwise the NumPy reference (``_ref``) is used. Both expose
the same functions and are kept interchangeable by the parity tests, so the
backend choice never changes results, only speed.

Kernels:

``popcount_rows(words)``
    Per-row popcount of a 2-D uint64 array.
``tanimoto_block(a, b)``
    Dense Tanimoto similarity block between two packed fingerprint arrays.
``best_split(values, grad, hess, min_leaf, reg_lambda)``
    Best boundary position and gain for an exact tree-split scan over one
    pre-sorted feature column.
``scan_split_columns(values, grad, hess, min_leaf, reg_lambda)``
    The same scan batched over many pre-sorted columns; the tree learner's
    hot loop.
"""

import os

from fingertrain.kernels import _ref

try:  # compiled core is optional
    from fingertrain.kernels import _fast  # type: ignore[attr-defined]

    _impl = _fast
    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    _impl = _ref
    BACKEND = "numpy"

if os.environ.get("FINGERTRAIN_FORCE_NUMPY_KERNELS"):
    _impl = _ref
    BACKEND = "numpy"

popcount_rows = _impl.popcount_rows
tanimoto_block = _impl.tanimoto_block
best_split = _impl.best_split
scan_split_columns = _impl.scan_split_columns

reference = _ref

__all__ = [
    "popcount_rows",
    "tanimoto_block",
    "best_split",
    "scan_split_columns",
    "BACKEND",
    "reference",
]
