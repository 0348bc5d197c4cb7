"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Selected automatically when the extension is not built, or forced with
``RESOLVENTLAB_PURE=1``.  Loops are kept in the same order as the compiled
versions so both backends round identically wherever Python floats allow.
"""
import math

import numpy as np


def _cabs1(z):
    return abs(z.real) + abs(z.imag)


def gt_factor(dl_in, d_in, du_in):
    dl = [complex(v) for v in np.asarray(dl_in, dtype=np.complex128)]
    d = [complex(v) for v in np.asarray(d_in, dtype=np.complex128)]
    du = [complex(v) for v in np.asarray(du_in, dtype=np.complex128)]
    n = len(d)
    if len(dl) != n - 1 or len(du) != n - 1:
        raise ValueError("off-diagonals must have length n-1")
    du2 = [0j] * max(n - 2, 0)
    ipiv = list(range(n))
    for i in range(n - 1):
        if _cabs1(d[i]) >= _cabs1(dl[i]):
            if _cabs1(d[i]) != 0.0:
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
        if _cabs1(d[i]) == 0.0:
            raise ZeroDivisionError(f"exactly singular pivot at row {i}")
    return (
        np.array(dl, dtype=np.complex128),
        np.array(d, dtype=np.complex128),
        np.array(du, dtype=np.complex128),
        np.array(du2, dtype=np.complex128),
        np.array(ipiv, dtype=np.int64),
    )


def gt_solve(dl, d, du, du2, ipiv, b_in):
    b_arr = np.array(b_in, dtype=np.complex128)
    vector = b_arr.ndim == 1
    if vector:
        b_arr = b_arr[:, None]
    n = len(d)
    if b_arr.shape[0] != n:
        raise ValueError("right-hand side has wrong length")
    dl = [complex(v) for v in dl]
    d = [complex(v) for v in d]
    du = [complex(v) for v in du]
    du2 = [complex(v) for v in du2]
    ipiv = [int(v) for v in ipiv]
    out = np.empty_like(b_arr)
    for j in range(b_arr.shape[1]):
        b = [complex(v) for v in b_arr[:, j]]
        for i in range(n - 1):
            if ipiv[i] == i:
                b[i + 1] = b[i + 1] - dl[i] * b[i]
            else:
                temp = b[i]
                b[i] = b[i + 1]
                b[i + 1] = temp - dl[i] * b[i]
        b[n - 1] = b[n - 1] / d[n - 1]
        if n > 1:
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2]
        for i in range(n - 3, -1, -1):
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i]
        out[:, j] = b
    return out[:, 0].copy() if vector else out


def neumaier_sum(x_in):
    s = 0.0
    c = 0.0
    for xi in np.asarray(x_in, dtype=np.float64).tolist():
        t = s + xi
        if abs(s) >= abs(xi):
            c += (s - t) + xi
        else:
            c += (xi - t) + s
        s = t
    return s + c


def neumaier_cumsum(x_in):
    vals = np.asarray(x_in, dtype=np.float64).tolist()
    out = np.empty(len(vals), dtype=np.float64)
    s = 0.0
    c = 0.0
    for i, xi in enumerate(vals):
        t = s + xi
        if abs(s) >= abs(xi):
            c += (s - t) + xi
        else:
            c += (xi - t) + s
        s = t
        out[i] = s + c
    return out


def tridiag_eigh(diag_in, off_in, max_iter=60, vectors=True):
    d = [float(v) for v in np.asarray(diag_in, dtype=np.float64)]
    n = len(d)
    e = [float(v) for v in np.asarray(off_in, dtype=np.float64)] + [0.0]
    z = np.eye(n, dtype=np.float64) if vectors else None
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise RuntimeError(f"QL iteration did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
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
                if vectors:
                    zi1 = z[i + 1].copy()
                    zi = z[i].copy()
                    z[i + 1] = s * zi + c * zi1
                    z[i] = c * zi - s * zi1
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d, dtype=np.float64), z
