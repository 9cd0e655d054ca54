"""NumPy reference implementations of the hot kernels.

These defines the semantics; the Cython module must match them bit-for-bit
on integer outputs and to float64 round-off on similarity/gain values.
"""

from __future__ import annotations

import numpy as np


def popcount_rows(words: np.ndarray) -> np.ndarray:
    """Popcount per row of a (n, w) uint64 array, int64 result."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    return np.bitwise_count(words).sum(axis=1, dtype=np.int64)


def tanimoto_block(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tanimoto similarity matrix (n, m) between packed rows of a and b.

    A pair of all-zero fingerprints scores 0.0 (empty union convention).
    """
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if a.shape[1] != b.shape[1]:
        raise ValueError("word width mismatch")
    inter = np.bitwise_count(a[:, None, :] & b[None, :, :]).sum(axis=2, dtype=np.int64)
    pa = popcount_rows(a)
    pb = popcount_rows(b)
    union = pa[:, None] + pb[None, :] - inter
    out = np.zeros(inter.shape, dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def best_split(
    values: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    min_leaf: int,
    reg_lambda: float,
) -> tuple[float, int]:
    """Best split of one feature column pre-sorted ascending by value.

    Returns ``(gain, pos)`` where ``pos`` rows go left; boundaries inside a
    run of equal values are invalid. ``(-inf, -1)`` when no boundary is
    admissible. Leftmost position wins ties, making the scan deterministic.
    """
    n = values.shape[0]
    if n < 2 * min_leaf:
        return float("-inf"), -1
    g_left = np.cumsum(grad)[:-1]
    h_left = np.cumsum(hess)[:-1]
    g_total = g_left[-1] + grad[-1]
    h_total = h_left[-1] + hess[-1]
    g_right = g_total - g_left
    h_right = h_total - h_left

    valid = values[:-1] != values[1:]
    pos = np.arange(1, n)
    valid &= (pos >= min_leaf) & (pos <= n - min_leaf)
    if not valid.any():
        return float("-inf"), -1

    parent = g_total * g_total / (h_total + reg_lambda)
    gain = 0.5 * (
        g_left * g_left / (h_left + reg_lambda)
        + g_right * g_right / (h_right + reg_lambda)
        - parent
    )
    gain = np.where(valid, gain, float("-inf"))
    best = int(np.argmax(gain))
    return float(gain[best]), best + 1


def scan_split_columns(
    values: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    min_leaf: int,
    reg_lambda: float,
) -> tuple[float, int, int]:
    """Best split across many pre-sorted columns at once.

    ``values``, ``grad``, ``hess`` are (n, F) with every column sorted
    ascending by its own values. Returns ``(gain, column, pos)``; ties pick
    the smaller column index, then the smaller position. ``(-inf, -1, -1)``
    when nothing is admissible.
    """
    n, f = values.shape
    if n < 2 * min_leaf or f == 0:
        return float("-inf"), -1, -1
    g_left = np.cumsum(grad, axis=0)[:-1]
    h_left = np.cumsum(hess, axis=0)[:-1]
    g_total = float(grad[:, 0].sum())
    h_total = float(hess[:, 0].sum())
    g_right = g_total - g_left
    h_right = h_total - h_left

    valid = values[:-1] != values[1:]
    pos = np.arange(1, n)[:, None]
    valid &= (pos >= min_leaf) & (pos <= n - min_leaf)
    if not valid.any():
        return float("-inf"), -1, -1

    parent = g_total * g_total / (h_total + reg_lambda)
    gain = 0.5 * (
        g_left * g_left / (h_left + reg_lambda)
        + g_right * g_right / (h_right + reg_lambda)
        - parent
    )
    gain = np.where(valid, gain, float("-inf"))
    flat = int(np.argmax(gain.T))  # column-major: smaller column wins ties
    col, row = divmod(flat, n - 1)
    return float(gain[row, col]), col, row + 1
