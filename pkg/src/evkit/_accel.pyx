# cython: boundscheck=False, wraparound=False, cdivision=True
"""Single-pass per-pixel accumulation kernel for event statistics.

For every pixel the kernel maintains: event count, polarity sum, last
timestamp, sum of inter-event intervals and sum of squared intervals.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def accumulate(const cnp.int64_t[::1] t, const cnp.int32_t[::1] x,
               const cnp.int32_t[::1] y, const cnp.int8_t[::1] p,
               int width, int height):
    """One pass over time-sorted events; returns flat per-pixel accumulators.

    Returns (count int64, pol_sum int64, dt_sum float64, dt_sq_sum float64),
    each of length width*height.
    """
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t npix = <Py_ssize_t>width * height

    count_arr = np.zeros(npix, dtype=np.int64)
    pol_arr = np.zeros(npix, dtype=np.int64)
    dt_sum_arr = np.zeros(npix, dtype=np.float64)
    dt_sq_arr = np.zeros(npix, dtype=np.float64)
    last_arr = np.zeros(npix, dtype=np.int64)

    cdef cnp.int64_t[::1] count = count_arr
    cdef cnp.int64_t[::1] pol = pol_arr
    cdef double[::1] dt_sum = dt_sum_arr
    cdef double[::1] dt_sq = dt_sq_arr
    cdef cnp.int64_t[::1] last = last_arr

    cdef Py_ssize_t i, q
    cdef double d
    for i in range(n):
        q = <Py_ssize_t>y[i] * width + x[i]
        if count[q] > 0:
            d = <double>(t[i] - last[q])
            dt_sum[q] += d
            dt_sq[q] += d * d
        last[q] = t[i]
        count[q] += 1
        pol[q] += p[i]

    return count_arr, pol_arr, dt_sum_arr, dt_sq_arr
