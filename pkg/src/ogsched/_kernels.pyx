# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled subset kernels.  Must stay bit-for-bit equivalent to _kernels_py."""

import numpy as np

from libc.math cimport INFINITY


def subset_dp(double[::1] prev, double[::1] table, int mode):
    """out[S] = min over T subset of S of combine(prev[S minus T], table[T]).

    ``mode`` 0 combines by addition, 1 by max.  Submasks are scanned from S
    down to 0 and the first strict minimum wins; ``choice[S]`` is that T.
    """
    cdef Py_ssize_t size = prev.shape[0]
    if table.shape[0] != size:
        raise ValueError("table size mismatch")
    out_arr = np.empty(size, dtype=np.float64)
    choice_arr = np.empty(size, dtype=np.int64)
    cdef double[::1] out = out_arr
    cdef long long[::1] choice = choice_arr
    cdef Py_ssize_t S, T, bt
    cdef double best, a, b, v
    for S in range(size):
        best = INFINITY
        bt = -1
        T = S
        while True:
            a = prev[S ^ T]
            b = table[T]
            if mode == 0:
                v = a + b
            else:
                v = a if a > b else b
            if v < best:
                best = v
                bt = T
            if T == 0:
                break
            T = (T - 1) & S
        if bt < 0:
            bt = S
        out[S] = best
        choice[S] = bt
    return out_arr, choice_arr


def cover_table(unsigned long long[::1] masks, double[::1] costs):
    """Total cost and union bitmask for every family of sets."""
    cdef Py_ssize_t m = masks.shape[0]
    cdef Py_ssize_t size = (<Py_ssize_t>1) << m
    cost_arr = np.zeros(size, dtype=np.float64)
    cov_arr = np.zeros(size, dtype=np.uint64)
    cdef double[::1] cost = cost_arr
    cdef unsigned long long[::1] cov = cov_arr
    cdef Py_ssize_t i, S, half
    for i in range(m):
        half = (<Py_ssize_t>1) << i
        for S in range(half):
            cost[half + S] = cost[S] + costs[i]
            cov[half + S] = cov[S] | masks[i]
    return cost_arr, cov_arr
