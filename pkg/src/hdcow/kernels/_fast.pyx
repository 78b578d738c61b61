# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled twin of hdcow.kernels._ref; bit-identical output."""

import numpy as np

BACKEND = "cython"


def dead_time_filter(candidates, long long dead_slots,
                     long long last_click=-(1 << 62)):
    """Sequential dead-time scan over sorted candidate click slots.

    Same contract as the pure-Python reference: keeps a candidate c iff
    c - last_accepted > dead_slots, returns (kept, last_accepted).
    """
    cdef const long long[::1] cand = np.ascontiguousarray(candidates, dtype=np.int64)
    cdef Py_ssize_t n = cand.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i, m = 0
    cdef long long last = last_click
    cdef long long c
    for i in range(n):
        c = cand[i]
        if c - last > dead_slots:
            out[m] = c
            m += 1
            last = c
    return out_arr[:m].copy(), int(last)
