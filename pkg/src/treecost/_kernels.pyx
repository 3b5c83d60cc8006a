# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the routines in ``_kernels_py``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

ctypedef unsigned long long u64


cdef bint _like(str value, str pattern):
    # two-pointer wildcard match with backtracking to the last '%'
    cdef Py_ssize_t n = len(value), m = len(pattern)
    cdef Py_ssize_t i = 0, j = 0, star = -1, mark = 0
    cdef Py_UCS4 pc
    while i < n:
        if j < m:
            pc = pattern[j]
            if pc == u'%':
                star = j
                mark = i
                j += 1
                continue
            if pc == u'_' or pc == value[i]:
                i += 1
                j += 1
                continue
        if star >= 0:
            j = star + 1
            mark += 1
            i = mark
            continue
        return False
    while j < m and pattern[j] == u'%':
        j += 1
    return j == m


def like_mask(values, str pattern):
    cdef Py_ssize_t n = len(values), k
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[:] view = out
    for k in range(n):
        view[k] = _like(<str>values[k], pattern)
    return out


def sgns_train(
    float[:, ::1] w_in,
    float[:, ::1] w_out,
    int[::1] tokens,
    long long[::1] offsets,
    int[::1] noise_table,
    int negative,
    double lr_start,
    double lr_end,
    int epochs,
    u64 seed,
):
    cdef u64 rng = seed
    cdef Py_ssize_t n_sent = offsets.shape[0] - 1
    cdef Py_ssize_t dim = w_in.shape[1]
    cdef Py_ssize_t table_size = noise_table.shape[0]
    cdef double total = <double>max(1, offsets[n_sent] * epochs)
    cdef double processed = 0.0, lr, f, g, label
    cdef Py_ssize_t e, s, i, j, k, lo, hi
    cdef int d, word, ctx, target
    cdef float[::1] neu1e = np.zeros(dim, dtype=np.float32)
    for e in range(epochs):
        for s in range(n_sent):
            lo = offsets[s]
            hi = offsets[s + 1]
            lr = lr_start - (lr_start - lr_end) * (processed / total)
            for i in range(lo, hi):
                word = tokens[i]
                for j in range(lo, hi):
                    if j == i:
                        continue
                    ctx = tokens[j]
                    for k in range(dim):
                        neu1e[k] = 0.0
                    for d in range(negative + 1):
                        if d == 0:
                            target = word
                            label = 1.0
                        else:
                            rng = rng * 25214903917ULL + 11ULL
                            target = noise_table[(rng >> 16) % <u64>table_size]
                            if target == word:
                                continue
                            label = 0.0
                        f = 0.0
                        for k in range(dim):
                            f += <double>w_in[ctx, k] * <double>w_out[target, k]
                        g = (label - 1.0 / (1.0 + exp(-f))) * lr
                        for k in range(dim):
                            neu1e[k] += <float>(g * w_out[target, k])
                        for k in range(dim):
                            w_out[target, k] += <float>(g * w_in[ctx, k])
                    for k in range(dim):
                        w_in[ctx, k] += neu1e[k]
            processed += hi - lo
    return rng
