# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: banded complex solve, QL eigensolver, compensated sums.

Every function here has a line-for-line twin in ``_kernels_py``; the two are
kept algorithmically identical so results agree to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, hypot, copysign

cnp.import_array()


cdef inline double cabs1(double complex z) nogil:
    return fabs(z.real) + fabs(z.imag)


def gt_factor(dl_in, d_in, du_in):
    """LU factorization of a complex tridiagonal matrix with partial pivoting.

    Returns ``(dl, d, du, du2, ipiv)`` in the LAPACK ``gttrf`` layout.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] dl_a = np.array(dl_in, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] d_a = np.array(d_in, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] du_a = np.array(du_in, dtype=np.complex128)
    cdef Py_ssize_t n = d_a.shape[0]
    if dl_a.shape[0] != n - 1 or du_a.shape[0] != n - 1:
        raise ValueError("off-diagonals must have length n-1")
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] du2_a = np.zeros(max(n - 2, 0), dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ipiv_a = np.arange(n, dtype=np.int64)
    cdef double complex[::1] dl = dl_a
    cdef double complex[::1] d = d_a
    cdef double complex[::1] du = du_a
    cdef double complex[::1] du2 = du2_a
    cdef cnp.int64_t[::1] ipiv = ipiv_a
    cdef Py_ssize_t i
    cdef double complex fact, temp
    cdef int singular = -1
    with nogil:
        for i in range(n - 1):
            if cabs1(d[i]) >= cabs1(dl[i]):
                if cabs1(d[i]) != 0.0:
                    fact = dl[i] / d[i]
                    dl[i] = fact
                    d[i + 1] = d[i + 1] - fact * du[i]
            else:
                fact = d[i] / dl[i]
                d[i] = dl[i]
                dl[i] = fact
                temp = du[i]
                du[i] = d[i + 1]
                d[i + 1] = temp - fact * d[i + 1]
                if i < n - 2:
                    du2[i] = du[i + 1]
                    du[i + 1] = -fact * du[i + 1]
                ipiv[i] = i + 1
        for i in range(n):
            if cabs1(d[i]) == 0.0:
                singular = <int>i
                break
    if singular >= 0:
        raise ZeroDivisionError(f"exactly singular pivot at row {singular}")
    return dl_a, d_a, du_a, du2_a, ipiv_a


def gt_solve(dl_in, d_in, du_in, du2_in, ipiv_in, b_in):
    """Solve with the factors from :func:`gt_factor`; ``b`` is ``(n,)`` or ``(n, k)``."""
    cdef double complex[::1] dl = np.ascontiguousarray(dl_in, dtype=np.complex128)
    cdef double complex[::1] d = np.ascontiguousarray(d_in, dtype=np.complex128)
    cdef double complex[::1] du = np.ascontiguousarray(du_in, dtype=np.complex128)
    cdef double complex[::1] du2 = np.ascontiguousarray(du2_in, dtype=np.complex128)
    cdef cnp.int64_t[::1] ipiv = np.ascontiguousarray(ipiv_in, dtype=np.int64)
    b_arr = np.array(b_in, dtype=np.complex128)
    vector = b_arr.ndim == 1
    if vector:
        b_arr = b_arr[:, None]
    # column-major copy so each right-hand side is contiguous
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] bt_a = np.ascontiguousarray(b_arr.T)
    cdef double complex[:, ::1] bt = bt_a
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t k = bt.shape[0]
    cdef Py_ssize_t i, j
    cdef double complex temp
    if bt.shape[1] != n:
        raise ValueError("right-hand side has wrong length")
    with nogil:
        for j in range(k):
            for i in range(n - 1):
                if ipiv[i] == i:
                    bt[j, i + 1] = bt[j, i + 1] - dl[i] * bt[j, i]
                else:
                    temp = bt[j, i]
                    bt[j, i] = bt[j, i + 1]
                    bt[j, i + 1] = temp - dl[i] * bt[j, i]
            bt[j, n - 1] = bt[j, n - 1] / d[n - 1]
            if n > 1:
                bt[j, n - 2] = (bt[j, n - 2] - du[n - 2] * bt[j, n - 1]) / d[n - 2]
            for i in range(n - 3, -1, -1):
                bt[j, i] = (bt[j, i] - du[i] * bt[j, i + 1] - du2[i] * bt[j, i + 2]) / d[i]
    out = bt_a.T
    return np.ascontiguousarray(out[:, 0]) if vector else np.ascontiguousarray(out)


def neumaier_sum(x_in):
    """Compensated (Neumaier) sum of a float64 vector."""
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double s = 0.0, c = 0.0, t, xi
    with nogil:
        for i in range(n):
            xi = x[i]
            t = s + xi
            if fabs(s) >= fabs(xi):
                c += (s - t) + xi
            else:
                c += (xi - t) + s
            s = t
    return s + c


def neumaier_cumsum(x_in):
    """Running compensated sums; entry ``i`` is the sum of ``x[:i+1]``."""
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t i, n = x.shape[0]
    out_a = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_a
    cdef double s = 0.0, c = 0.0, t, xi
    with nogil:
        for i in range(n):
            xi = x[i]
            t = s + xi
            if fabs(s) >= fabs(xi):
                c += (s - t) + xi
            else:
                c += (xi - t) + s
            s = t
            out[i] = s + c
    return out_a


def tridiag_eigh(diag_in, off_in, int max_iter=60, bint vectors=True):
    """Implicit-shift QL eigensolver for a real symmetric tridiagonal matrix.

    Returns ``(w, Z)`` unsorted; row ``Z[k]`` is the eigenvector of ``w[k]``.
    With ``vectors=False`` no rotations are accumulated and ``Z`` is None.
    """
    d_a = np.array(diag_in, dtype=np.float64)
    cdef Py_ssize_t n = d_a.shape[0]
    e_a = np.zeros(n, dtype=np.float64)
    e_a[: n - 1] = np.asarray(off_in, dtype=np.float64)
    z_a = np.eye(n if vectors else 1, dtype=np.float64)
    cdef double[::1] d = d_a
    cdef double[::1] e = e_a
    cdef double[:, ::1] z = z_a
    cdef Py_ssize_t l, m, i, k
    cdef int it
    cdef double dd, g, r, s, c, p, f, b, zi, zi1
    cdef bint underflow
    cdef int failed = -1
    with nogil:
        for l in range(n):
            it = 0
            while True:
                m = l
                while m < n - 1:
                    dd = fabs(d[m]) + fabs(d[m + 1])
                    if fabs(e[m]) + dd == dd:
                        break
                    m += 1
                if m == l:
                    break
                it += 1
                if it > max_iter:
                    failed = <int>l
                    break
                g = (d[l + 1] - d[l]) / (2.0 * e[l])
                r = hypot(g, 1.0)
                g = d[m] - d[l] + e[l] / (g + copysign(r, g))
                s = 1.0
                c = 1.0
                p = 0.0
                underflow = False
                i = m - 1
                while i >= l:
                    f = s * e[i]
                    b = c * e[i]
                    r = hypot(f, g)
                    e[i + 1] = r
                    if r == 0.0:
                        d[i + 1] -= p
                        e[m] = 0.0
                        underflow = True
                        break
                    s = f / r
                    c = g / r
                    g = d[i + 1] - p
                    r = (d[i] - g) * s + 2.0 * c * b
                    p = s * r
                    d[i + 1] = g + p
                    g = c * r - b
                    for k in range(n if vectors else 0):
                        zi1 = z[i + 1, k]
                        zi = z[i, k]
                        z[i + 1, k] = s * zi + c * zi1
                        z[i, k] = c * zi - s * zi1
                    i -= 1
                if underflow:
                    continue
                d[l] -= p
                e[l] = g
                e[m] = 0.0
            if failed >= 0:
                break
    if failed >= 0:
        raise RuntimeError(f"QL iteration did not converge for eigenvalue {failed}")
    return d_a, (z_a if vectors else None)
