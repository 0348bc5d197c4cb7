"""Backend selection for the numerical kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over.  Set ``RESOLVENTLAB_PURE=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("RESOLVENTLAB_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"compiled"`` or ``"python"``)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


class TridiagonalLU:
    """Pivoted LU factors of a complex tridiagonal matrix.

    Parameters
    ----------
    lower, diag, upper : array_like
        Sub-, main and super-diagonal. Off-diagonals have length ``n - 1``.
    backend : str, optional
        Force a backend; defaults to the one selected at import.
    """

    def __init__(self, lower, diag, upper, backend=None):
        self._k = get_backend(backend)
        self.n = len(diag)
        self._factors = self._k.gt_factor(lower, diag, upper)

    def solve(self, b):
        """Solve ``A x = b`` for one or several right-hand sides (columns)."""
        return self._k.gt_solve(*self._factors, b)


def tridiag_solve(lower, diag, upper, b, backend=None):
    """One-shot complex tridiagonal solve."""
    return TridiagonalLU(lower, diag, upper, backend=backend).solve(b)


def tridiag_matvec(lower, diag, upper, x):
    """Product of a tridiagonal matrix with a vector (numpy, for residuals)."""
    x = np.asarray(x)
    y = np.asarray(diag) * x
    y[1:] += np.asarray(lower) * x[:-1]
    y[:-1] += np.asarray(upper) * x[1:]
    return y


def _fix_signs(vecs):
    piv = np.argmax(np.abs(vecs), axis=0)
    sgn = np.sign(vecs[piv, np.arange(vecs.shape[1])])
    sgn[sgn == 0] = 1.0
    return vecs * sgn


def eigh_tridiagonal(diag, off, backend=None, select=None):
    """Eigenpairs of a real symmetric tridiagonal matrix.

    Parameters
    ----------
    diag, off : array_like
    backend : str, optional
    select : (lo, hi), optional
        Only eigenpairs with ``lo <= w <= hi``.  Eigenvalues still come from
        the QL sweep (without accumulating rotations); the vectors are then
        found by inverse iteration, which is much cheaper when few are wanted.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    vecs : ndarray
        ``vecs[:, k]`` is the unit eigenvector for ``w[k]``, sign-fixed so its
        largest-magnitude entry is positive.
    """
    k = get_backend(backend)
    if select is None:
        w, zt = k.tridiag_eigh(diag, off)
        order = np.argsort(w, kind="stable")
        return w[order], _fix_signs(zt[order].T.copy())
    w, _ = k.tridiag_eigh(diag, off, vectors=False)
    w = np.sort(w)
    lo, hi = select
    w = w[(w >= lo) & (w <= hi)]
    return w, _fix_signs(inverse_iteration(diag, off, w, backend=backend))


def inverse_iteration(diag, off, w, iters=3, backend=None):
    """Eigenvectors for known eigenvalues ``w`` of a symmetric tridiagonal.

    Deterministic start vector; vectors whose eigenvalues sit closer than
    ``1e-8`` of the spectral radius are orthogonalized against each other.
    """
    diag = np.asarray(diag, dtype=np.float64)
    off = np.asarray(off, dtype=np.float64)
    n = diag.shape[0]
    scale = float(np.max(np.abs(diag)) + 2.0 * np.max(np.abs(off), initial=0.0))
    tiny = 64.0 * np.finfo(float).eps * scale
    start = 1.0 + 0.5 * np.sin(np.arange(1, n + 1) * 0.7)
    out = np.zeros((n, len(w)))
    cluster_start = 0
    for j, lam in enumerate(w):
        if j > 0 and lam - w[j - 1] > 1e-8 * scale:
            cluster_start = j
        # perturb the shift so the factorization is never exactly singular
        lu = TridiagonalLU(off, diag - (lam + tiny), off, backend=backend)
        x = start / np.linalg.norm(start)
        for _ in range(iters):
            x = lu.solve(x.astype(np.complex128)).real
            for i in range(cluster_start, j):
                x -= (out[:, i] @ x) * out[:, i]
            x /= np.linalg.norm(x)
        out[:, j] = x
    return out


def compensated_sum(x, backend=None):
    return get_backend(backend).neumaier_sum(x)


def compensated_cumsum(x, backend=None):
    return get_backend(backend).neumaier_cumsum(x)
