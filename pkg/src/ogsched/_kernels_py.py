"""Pure-Python versions of the compiled subset kernels."""

import math

import numpy as np


def subset_dp(prev, table, mode):
    prev = [float(v) for v in prev]
    table = [float(v) for v in table]
    size = len(prev)
    if len(table) != size:
        raise ValueError("table size mismatch")
    out = np.empty(size, dtype=np.float64)
    choice = np.empty(size, dtype=np.int64)
    inf = math.inf
    for S in range(size):
        best, bt = inf, -1
        T = S
        while True:
            a, b = prev[S ^ T], table[T]
            v = a + b if mode == 0 else (a if a > b else b)
            if v < best:
                best, bt = v, T
            if T == 0:
                break
            T = (T - 1) & S
        out[S] = best
        choice[S] = S if bt < 0 else bt
    return out, choice


def cover_table(masks, costs):
    m = len(masks)
    cost = np.zeros(1 << m, dtype=np.float64)
    cov = np.zeros(1 << m, dtype=np.uint64)
    for i in range(m):
        half = 1 << i
        cost[half:2 * half] = cost[:half] + float(costs[i])
        cov[half:2 * half] = cov[:half] | np.uint64(masks[i])
    return cost, cov
