# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled characteristic-function accumulation."""

import numpy as np

from libc.math cimport isfinite


def char_accumulate(
    const double complex[:, ::1] p0,
    const double complex[:, ::1] p1,
    const double complex[:, ::1] p2,
    const double complex[::1] x,
    const double complex[::1] y,
    Py_ssize_t start,
    Py_ssize_t stop,
):
    """Sum over samples ``start..stop`` of ``prod_i (p0 + p1 x_g + p2 y_g)``
    for every grid point ``g``; samples with a non-finite product are
    skipped and counted."""
    cdef Py_ssize_t G = x.shape[0]
    cdef Py_ssize_t M = p0.shape[1]
    cdef Py_ssize_t e, g, i
    cdef Py_ssize_t rejected = 0
    cdef double complex prod
    cdef bint ok
    out = np.zeros(G, dtype=np.complex128)
    buf = np.empty(G, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex[::1] b = buf
    with nogil:
        for e in range(start, stop):
            ok = True
            for g in range(G):
                prod = 1.0
                for i in range(M):
                    prod = prod * (p0[e, i] + p1[e, i] * x[g] + p2[e, i] * y[g])
                if not (isfinite(prod.real) and isfinite(prod.imag)):
                    ok = False
                    break
                b[g] = prod
            if ok:
                for g in range(G):
                    o[g] = o[g] + b[g]
            else:
                rejected += 1
    return out, rejected
