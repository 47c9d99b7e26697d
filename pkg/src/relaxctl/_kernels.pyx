# cython: language_level=3
"""Compiled numeric kernels; see ``_kernels_py`` for the reference versions."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def adjoint_sweep(a_left, a_mid, a_right, steps, p_terminal):
    cdef const double[:, :, ::1] al = np.ascontiguousarray(a_left, dtype=np.float64)
    cdef const double[:, :, ::1] am = np.ascontiguousarray(a_mid, dtype=np.float64)
    cdef const double[:, :, ::1] ar = np.ascontiguousarray(a_right, dtype=np.float64)
    cdef const double[::1] hs = np.ascontiguousarray(steps, dtype=np.float64)
    pt = np.array(p_terminal, dtype=np.float64, ndmin=2)
    cdef Py_ssize_t m = hs.shape[0]
    cdef Py_ssize_t d = pt.shape[0]
    cdef Py_ssize_t n = pt.shape[1]
    result = np.empty((m + 1, d, n), dtype=np.float64)
    cdef double[:, :, ::1] out = result
    cdef double[:, ::1] p = np.array(pt, copy=True, order="C")
    cdef double[::1] k1 = np.empty(n)
    cdef double[::1] k2 = np.empty(n)
    cdef double[::1] k3 = np.empty(n)
    cdef double[::1] k4 = np.empty(n)
    cdef double[::1] tmp = np.empty(n)
    cdef Py_ssize_t j, b, r, c
    cdef double h, acc
    for b in range(d):
        for c in range(n):
            out[m, b, c] = p[b, c]
    for j in range(m - 1, -1, -1):
        h = hs[j]
        for b in range(d):
            # k1 = p A_right
            for c in range(n):
                acc = 0.0
                for r in range(n):
                    acc = acc + p[b, r] * ar[j, r, c]
                k1[c] = acc
            for r in range(n):
                tmp[r] = p[b, r] + 0.5 * h * k1[r]
            for c in range(n):
                acc = 0.0
                for r in range(n):
                    acc = acc + tmp[r] * am[j, r, c]
                k2[c] = acc
            for r in range(n):
                tmp[r] = p[b, r] + 0.5 * h * k2[r]
            for c in range(n):
                acc = 0.0
                for r in range(n):
                    acc = acc + tmp[r] * am[j, r, c]
                k3[c] = acc
            for r in range(n):
                tmp[r] = p[b, r] + h * k3[r]
            for c in range(n):
                acc = 0.0
                for r in range(n):
                    acc = acc + tmp[r] * al[j, r, c]
                k4[c] = acc
            for c in range(n):
                p[b, c] = p[b, c] + (h / 6.0) * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c])
                out[j, b, c] = p[b, c]
    return result


def hamiltonian_argmax(p, phi):
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[:, :, ::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t nb = ph.shape[0]
    cdef Py_ssize_t ng = ph.shape[1]
    cdef Py_ssize_t n = ph.shape[2]
    values = np.empty(nb, dtype=np.float64)
    index = np.empty(nb, dtype=np.intp)
    cdef double[::1] vals = values
    cdef Py_ssize_t[::1] idx = index
    cdef Py_ssize_t b, g, c, best_g
    cdef double acc, best
    for b in range(nb):
        best = -np.inf
        best_g = 0
        for g in range(ng):
            acc = 0.0
            for c in range(n):
                acc = acc + pv[b, c] * ph[b, g, c]
            # strict '>' keeps the first maximiser, matching numpy.argmax
            if acc > best or g == 0:
                best = acc
                best_g = g
        vals[b] = best
        idx[b] = best_g
    return values, index
