"""Compiled cyclic Jacobi eigensolver for dense complex Hermitian matrices.

Mirrors ``mcx._pyjacobi`` operation for operation; the two must agree to
rounding. All loops run without the GIL so batched calls can be spread
over threads.
"""

import numpy as np

from libc.math cimport sqrt, fabs

cdef int MAX_SWEEPS = 50
cdef double OFF_TOL = 1e-14


cdef inline double cabs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double complex cconj(double complex z) noexcept nogil:
    return z.real - 1j * z.imag


cdef int _jacobi(double complex[:, ::1] a, double complex[:, ::1] v,
                 double[::1] w, bint vectors) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k, p, q, sweep
    cdef double frob2 = 0.0, off2, tol, g, app, aqq, theta, t, c, s, tmp
    cdef double complex ph, phc, x, y

    for i in range(n):
        for j in range(n):
            frob2 += cabs2(a[i, j])
            if vectors:
                v[i, j] = 1.0 if i == j else 0.0
    tol = OFF_TOL * sqrt(frob2)

    for sweep in range(MAX_SWEEPS):
        off2 = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off2 += 2.0 * cabs2(a[i, j])
        if sqrt(off2) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = sqrt(cabs2(a[p, q]))
                if g == 0.0:
                    continue
                app = a[p, p].real
                aqq = a[q, q].real
                if (sweep > 3 and fabs(app) + 100.0 * g == fabs(app)
                        and fabs(aqq) + 100.0 * g == fabs(aqq)):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * g)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                ph = a[p, q] / g
                phc = cconj(ph)
                # A <- A U with U = [[c, s], [-s conj(ph), c conj(ph)]]
                for k in range(n):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * phc * y
                    a[k, q] = s * x + c * phc * y
                # A <- U* A
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * ph * y
                    a[q, k] = s * x + c * ph * y
                a[p, p] = app - t * g
                a[q, q] = aqq + t * g
                a[p, q] = 0.0
                a[q, p] = 0.0
                if vectors:
                    for k in range(n):
                        x = v[k, p]
                        y = v[k, q]
                        v[k, p] = c * x - s * phc * y
                        v[k, q] = s * x + c * phc * y

    for i in range(n):
        w[i] = a[i, i].real
    # insertion sort, ascending, carrying eigenvector columns
    for i in range(1, n):
        j = i
        while j > 0 and w[j - 1] > w[j]:
            tmp = w[j - 1]
            w[j - 1] = w[j]
            w[j] = tmp
            if vectors:
                for k in range(n):
                    x = v[k, j - 1]
                    v[k, j - 1] = v[k, j]
                    v[k, j] = x
            j -= 1
    return 0


def eigh(a):
    """Eigenvalues (ascending) and unitary eigenvector matrix of one matrix."""
    cdef double complex[:, ::1] work = np.array(a, dtype=np.complex128, order="C", copy=True)
    n = work.shape[0]
    w = np.empty(n, dtype=np.float64)
    v = np.empty((n, n), dtype=np.complex128)
    cdef double[::1] wv = w
    cdef double complex[:, ::1] vv = v
    with nogil:
        _jacobi(work, vv, wv, True)
    return w, v


def eigh_batch(a):
    """Batched ``eigh`` over the leading axis of an ``(m, d, d)`` array."""
    cdef double complex[:, :, ::1] work = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t m = work.shape[0], n = work.shape[1], i
    w = np.empty((m, n), dtype=np.float64)
    v = np.empty((m, n, n), dtype=np.complex128)
    cdef double[:, ::1] wv = w
    cdef double complex[:, :, ::1] vv = v
    with nogil:
        for i in range(m):
            _jacobi(work[i], vv[i], wv[i], True)
    return w, v


def eigvalsh_batch(a):
    """Batched eigenvalues only; skips eigenvector accumulation."""
    cdef double complex[:, :, ::1] work = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t m = work.shape[0], n = work.shape[1], i
    w = np.empty((m, n), dtype=np.float64)
    cdef double complex[:, ::1] dummy = np.empty((1, 1), dtype=np.complex128)
    cdef double[:, ::1] wv = w
    with nogil:
        for i in range(m):
            _jacobi(work[i], dummy, wv[i], False)
    return w
