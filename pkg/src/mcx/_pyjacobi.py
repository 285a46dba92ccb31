"""Pure-Python cyclic Jacobi eigensolver, used when the compiled kernel is absent.

Same rotation sequence and stopping rule as ``_jacobi.pyx``. Works on
nested lists of Python complex numbers, which is faster than numpy slicing
at the small dimensions this package targets.
"""

import math

import numpy as np

MAX_SWEEPS = 50
OFF_TOL = 1e-14


def _jacobi(a, vectors):
    n = len(a)
    frob2 = sum(z.real * z.real + z.imag * z.imag for row in a for z in row)
    v = [[1.0 + 0j if i == j else 0j for j in range(n)] for i in range(n)] if vectors else None
    tol = OFF_TOL * math.sqrt(frob2)

    for sweep in range(MAX_SWEEPS):
        off2 = 0.0
        for i in range(n):
            row = a[i]
            for j in range(i + 1, n):
                z = row[j]
                off2 += 2.0 * (z.real * z.real + z.imag * z.imag)
        if math.sqrt(off2) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                g = abs(apq)
                if g == 0.0:
                    continue
                app = a[p][p].real
                aqq = a[q][q].real
                if (sweep > 3 and abs(app) + 100.0 * g == abs(app)
                        and abs(aqq) + 100.0 * g == abs(aqq)):
                    a[p][q] = 0j
                    a[q][p] = 0j
                    continue
                theta = (aqq - app) / (2.0 * g)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ph = apq / g
                phc = ph.conjugate()
                for row in a:
                    x = row[p]
                    y = row[q]
                    row[p] = c * x - s * phc * y
                    row[q] = s * x + c * phc * y
                rp = a[p]
                rq = a[q]
                for k in range(n):
                    x = rp[k]
                    y = rq[k]
                    rp[k] = c * x - s * ph * y
                    rq[k] = s * x + c * ph * y
                rp[p] = complex(app - t * g)
                rq[q] = complex(aqq + t * g)
                rp[q] = 0j
                rq[p] = 0j
                if vectors:
                    for row in v:
                        x = row[p]
                        y = row[q]
                        row[p] = c * x - s * phc * y
                        row[q] = s * x + c * phc * y

    w = [a[i][i].real for i in range(n)]
    for i in range(1, n):
        j = i
        while j > 0 and w[j - 1] > w[j]:
            w[j - 1], w[j] = w[j], w[j - 1]
            if vectors:
                for row in v:
                    row[j - 1], row[j] = row[j], row[j - 1]
            j -= 1
    return w, v


def eigh(a):
    w, v = _jacobi(np.asarray(a, dtype=np.complex128).tolist(), True)
    return np.array(w, dtype=np.float64), np.array(v, dtype=np.complex128)


def eigh_batch(a):
    a = np.asarray(a, dtype=np.complex128)
    m, n = a.shape[0], a.shape[1]
    w = np.empty((m, n), dtype=np.float64)
    v = np.empty((m, n, n), dtype=np.complex128)
    for i, mat in enumerate(a.tolist()):
        wi, vi = _jacobi(mat, True)
        w[i] = wi
        v[i] = vi
    return w, v


def eigvalsh_batch(a):
    a = np.asarray(a, dtype=np.complex128)
    w = np.empty(a.shape[:2], dtype=np.float64)
    for i, mat in enumerate(a.tolist()):
        w[i] = _jacobi(mat, False)[0]
    return w
