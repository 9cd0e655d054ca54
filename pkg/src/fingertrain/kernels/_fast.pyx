# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; semantics defined by fingertrain.kernels._ref."""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()


cdef inline int popcount64(uint64_t x) noexcept nogil:
    x = x - ((x >> 1) & <uint64_t>0x5555555555555555)
    x = (x & <uint64_t>0x3333333333333333) + ((x >> 2) & <uint64_t>0x3333333333333333)
    x = (x + (x >> 4)) & <uint64_t>0x0F0F0F0F0F0F0F0F
    return <int>((x * <uint64_t>0x0101010101010101) >> 56)


def popcount_rows(words):
    cdef cnp.ndarray[cnp.uint64_t, ndim=2, mode="c"] w = np.ascontiguousarray(words, dtype=np.uint64)
    cdef Py_ssize_t n = w.shape[0], k = w.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef int64_t acc
    with nogil:
        for i in range(n):
            acc = 0
            for j in range(k):
                acc += popcount64(w[i, j])
            out[i] = acc
    return out


def tanimoto_block(a, b):
    cdef cnp.ndarray[cnp.uint64_t, ndim=2, mode="c"] aa = np.ascontiguousarray(a, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=2, mode="c"] bb = np.ascontiguousarray(b, dtype=np.uint64)
    if aa.shape[1] != bb.shape[1]:
        raise ValueError("word width mismatch")
    cdef Py_ssize_t n = aa.shape[0], m = bb.shape[0], k = aa.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pa = popcount_rows(aa)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pb = popcount_rows(bb)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j, w
    cdef int64_t inter, union_
    with nogil:
        for i in range(n):
            for j in range(m):
                inter = 0
                for w in range(k):
                    inter += popcount64(aa[i, w] & bb[j, w])
                union_ = pa[i] + pb[j] - inter
                if union_ > 0:
                    out[i, j] = <double>inter / <double>union_
    return out


def scan_split_columns(values, grad, hess, int min_leaf, double reg_lambda):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] g = np.ascontiguousarray(grad, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] h = np.ascontiguousarray(hess, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], f = v.shape[1]
    if n < 2 * min_leaf or f == 0:
        return float("-inf"), -1, -1
    cdef double g_total = 0.0, h_total = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        g_total += g[i, 0]
        h_total += h[i, 0]
    cdef double parent = g_total * g_total / (h_total + reg_lambda)
    cdef double best_gain = -np.inf
    cdef Py_ssize_t best_col = -1, best_pos = -1
    cdef double g_left, h_left, g_right, h_right, gain
    cdef Py_ssize_t col, pos
    with nogil:
        for col in range(f):
            g_left = 0.0
            h_left = 0.0
            for pos in range(1, n):
                g_left += g[pos - 1, col]
                h_left += h[pos - 1, col]
                if pos < min_leaf or pos > n - min_leaf:
                    continue
                if v[pos - 1, col] == v[pos, col]:
                    continue
                g_right = g_total - g_left
                h_right = h_total - h_left
                gain = 0.5 * (
                    g_left * g_left / (h_left + reg_lambda)
                    + g_right * g_right / (h_right + reg_lambda)
                    - parent
                )
                if gain > best_gain:
                    best_gain = gain
                    best_col = col
                    best_pos = pos
    if best_col < 0:
        return float("-inf"), -1, -1
    return best_gain, best_col, best_pos


def best_split(values, grad, hess, int min_leaf, double reg_lambda):
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] g = np.ascontiguousarray(grad, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] h = np.ascontiguousarray(hess, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    if n < 2 * min_leaf:
        return float("-inf"), -1
    cdef double g_total = 0.0, h_total = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        g_total += g[i]
        h_total += h[i]
    cdef double parent = g_total * g_total / (h_total + reg_lambda)
    cdef double g_left = 0.0, h_left = 0.0
    cdef double best_gain = -np.inf, gain, g_right, h_right
    cdef Py_ssize_t best_pos = -1, pos
    with nogil:
        for pos in range(1, n):
            g_left += g[pos - 1]
            h_left += h[pos - 1]
            if pos < min_leaf or pos > n - min_leaf:
                continue
            if v[pos - 1] == v[pos]:
                continue
            g_right = g_total - g_left
            h_right = h_total - h_left
            gain = 0.5 * (
                g_left * g_left / (h_left + reg_lambda)
                + g_right * g_right / (h_right + reg_lambda)
                - parent
            )
            if gain > best_gain:
                best_gain = gain
                best_pos = pos
    if best_pos < 0:
        return float("-inf"), -1
    return best_gain, best_pos
