# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Keep in lockstep with ``_kernels_py.py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF MH = 0
DEF ALWAYS = 1
DEF NEVER = 2


cdef inline Py_ssize_t _inverse_cdf(const double[:] row, double u) noexcept nogil:
    cdef Py_ssize_t m = row.shape[0]
    cdef double target = u * row[m - 1]
    cdef Py_ssize_t j
    for j in range(m):
        if target < row[j]:
            return j
    for j in range(m - 1, 0, -1):
        if row[j] > row[j - 1]:
            return j
    return 0


def sample_rows(const double[:, ::1] cdf, const double[::1] u):
    cdef Py_ssize_t n = cdf.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _inverse_cdf(cdf[i], u[i])
    return out


def naming_sweep(const double[:, ::1] cdf, const double[:, :, ::1] acc,
                 signs, const double[:, ::1] u, int variant):
    cdef Py_ssize_t d = cdf.shape[0]
    new_signs = np.array(signs, dtype=np.int64)
    proposals = np.empty(d, dtype=np.int64)
    accepted = np.zeros(d, dtype=np.uint8)
    cdef cnp.int64_t[::1] s = new_signs
    cdef cnp.int64_t[::1] p = proposals
    cdef cnp.uint8_t[::1] a = accepted
    cdef Py_ssize_t j, prop
    cdef bint ok
    with nogil:
        for j in range(d):
            prop = _inverse_cdf(cdf[j], u[j, 0])
            p[j] = prop
            if variant == MH:
                ok = u[j, 1] < acc[j, prop, s[j]]
            elif variant == ALWAYS:
                ok = True
            else:
                ok = False
            if ok:
                s[j] = prop
                a[j] = 1
    return new_signs, proposals, accepted


def mh_chain(const double[:, :, ::1] cdf, const double[:, :, :, ::1] acc,
             signs0, const double[:, :, ::1] u,
             const cnp.int64_t[::1] speakers, const cnp.int64_t[::1] listeners):
    cdef Py_ssize_t rounds = u.shape[0]
    cdef Py_ssize_t d = u.shape[1]
    chain = np.empty((rounds, d), dtype=np.int64)
    cur = np.array(signs0, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] c = chain
    cdef cnp.int64_t[::1] s = cur
    cdef Py_ssize_t r, j, prop, sp, li
    cdef long long n_accepted = 0
    with nogil:
        for r in range(rounds):
            sp = speakers[r]
            li = listeners[r]
            for j in range(d):
                prop = _inverse_cdf(cdf[sp, j], u[r, j, 0])
                if u[r, j, 1] < acc[li, j, prop, s[j]]:
                    s[j] = prop
                    n_accepted += 1
                c[r, j] = s[j]
    return chain, n_accepted
