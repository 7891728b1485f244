# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 tracing through a trigonometric drift."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos

cnp.import_array()


cdef inline void _velocity(double x1, double x2, const double* modes, const double* c,
                           Py_ssize_t nmodes, double* v1, double* v2) noexcept nogil:
    # modes and c are row-major (nmodes, 2) blocks
    cdef Py_ssize_t m
    cdef double ph, amp
    v1[0] = 0.0
    v2[0] = 0.0
    for m in range(nmodes):
        ph = modes[2 * m] * x1 + modes[2 * m + 1] * x2
        amp = c[2 * m] * sin(ph) + c[2 * m + 1] * cos(ph)
        v1[0] -= amp * modes[2 * m + 1]
        v2[0] += amp * modes[2 * m]


def rk4_trig_flow(points, modes, coefs, steps, record):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] md = np.ascontiguousarray(modes, dtype=np.float64)
    cdef const double[:, :, :, ::1] cf = np.ascontiguousarray(coefs, dtype=np.float64)
    cdef const double[::1] hs = np.ascontiguousarray(steps, dtype=np.float64)
    cdef const cnp.int64_t[::1] rec = np.ascontiguousarray(record, dtype=np.int64)
    cdef Py_ssize_t npts = pts.shape[0], nsteps = cf.shape[0], nrec = rec.shape[0]
    result = np.empty((nrec, npts, 2), dtype=np.float64)
    cdef double[:, :, ::1] out = result
    cdef Py_ssize_t p, k, r, nm = md.shape[0]
    cdef double h, x1, x2, a1, a2, b1, b2, c1, c2, d1, d2
    cdef const double* mp = &md[0, 0]
    cdef const double* c0
    cdef Py_ssize_t block = 2 * nm
    if npts == 0 or nm == 0:
        result[...] = np.asarray(points, dtype=np.float64)[None]
        return result
    with nogil:
        for p in range(npts):
            x1 = pts[p, 0]
            x2 = pts[p, 1]
            r = 0
            while r < nrec and rec[r] == 0:
                out[r, p, 0] = x1
                out[r, p, 1] = x2
                r += 1
            for k in range(nsteps):
                h = hs[k]
                c0 = &cf[k, 0, 0, 0]
                _velocity(x1, x2, mp, c0, nm, &a1, &a2)
                _velocity(x1 + 0.5 * h * a1, x2 + 0.5 * h * a2, mp, c0 + block, nm, &b1, &b2)
                _velocity(x1 + 0.5 * h * b1, x2 + 0.5 * h * b2, mp, c0 + block, nm, &c1, &c2)
                _velocity(x1 + h * c1, x2 + h * c2, mp, c0 + 2 * block, nm, &d1, &d2)
                x1 = x1 + (h / 6.0) * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
                x2 = x2 + (h / 6.0) * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
                while r < nrec and rec[r] == k + 1:
                    out[r, p, 0] = x1
                    out[r, p, 1] = x2
                    r += 1
    return result
