# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Newton-Raphson kernels for the polar-form AC power-flow equations."""

from libc.math cimport cos, sin, fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()


def injections(const double[:, ::1] G, const double[:, ::1] B,
               const double[::1] vm, const double[::1] va,
               double[::1] P, double[::1] Q):
    """Fill ``P``/``Q`` with the bus injections implied by ``vm``/``va``."""
    cdef Py_ssize_t n = vm.shape[0]
    cdef Py_ssize_t i, j
    cdef double t, c, s, p, q
    for i in range(n):
        p = 0.0
        q = 0.0
        for j in range(n):
            if G[i, j] == 0.0 and B[i, j] == 0.0:
                continue
            t = va[i] - va[j]
            c = cos(t)
            s = sin(t)
            p += vm[j] * (G[i, j] * c + B[i, j] * s)
            q += vm[j] * (G[i, j] * s - B[i, j] * c)
        P[i] = vm[i] * p
        Q[i] = vm[i] * q


def newton_system(const double[:, ::1] G, const double[:, ::1] B,
                  const double[::1] vm, const double[::1] va,
                  const double[::1] p_spec, const double[::1] q_spec,
                  const cnp.intp_t[::1] pq,
                  double[::1] F, double[:, ::1] J):
    """Fill the mismatch vector ``F`` and Jacobian ``J`` over the PQ buses.

    Unknown ordering is ``[theta[pq], V[pq]]``; rows are ``[dP[pq], dQ[pq]]``.
    Returns the max-abs mismatch.
    """
    cdef Py_ssize_t n = vm.shape[0]
    cdef Py_ssize_t m = pq.shape[0]
    cdef Py_ssize_t a, b, i, j
    cdef double t, c, s, gc, gs, worst = 0.0
    cdef cnp.ndarray[double, ndim=1] P = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] Q = np.empty(n)
    injections(G, B, vm, va, P, Q)
    for a in range(m):
        i = pq[a]
        F[a] = P[i] - p_spec[i]
        F[m + a] = Q[i] - q_spec[i]
        if fabs(F[a]) > worst:
            worst = fabs(F[a])
        if fabs(F[m + a]) > worst:
            worst = fabs(F[m + a])
        for b in range(m):
            j = pq[b]
            if i == j:
                J[a, b] = -Q[i] - B[i, i] * vm[i] * vm[i]
                J[a, m + b] = P[i] / vm[i] + G[i, i] * vm[i]
                J[m + a, b] = P[i] - G[i, i] * vm[i] * vm[i]
                J[m + a, m + b] = Q[i] / vm[i] - B[i, i] * vm[i]
            elif G[i, j] == 0.0 and B[i, j] == 0.0:
                J[a, b] = 0.0
                J[a, m + b] = 0.0
                J[m + a, b] = 0.0
                J[m + a, m + b] = 0.0
            else:
                t = va[i] - va[j]
                c = cos(t)
                s = sin(t)
                gc = G[i, j] * c + B[i, j] * s
                gs = G[i, j] * s - B[i, j] * c
                J[a, b] = vm[i] * vm[j] * gs
                J[a, m + b] = vm[i] * gc
                J[m + a, b] = -vm[i] * vm[j] * gc
                J[m + a, m + b] = vm[i] * gs
    return worst
