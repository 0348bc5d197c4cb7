"""Discrete spectral calculus for ``H = -Delta + V`` on one mode.

The Dirichlet operator in Liouville form is a real symmetric tridiagonal
matrix ``T`` acting on ``v = r^{(d-1)/2} u`` at the interior nodes.  With the
scaling ``vhat = sqrt(omega h) v`` the discrete ``L^2(R^d)`` inner product
``omega sum h r^{d-1} u w*`` becomes the Euclidean one, so the eigenvectors
of ``T`` are an orthonormal basis of mode functions.  Projections, powers
and the propagator are all diagonal in that basis.
"""
import math
from dataclasses import dataclass, field
import numpy as np

from .grids import ModeFunction, RadialGrid, Weight
from .helmholtz import ResolventProblem, Sponge, effective_potential
from .kernels import eigh_tridiagonal, tridiag_matvec

CAP_MAX_NODES = 2000


class GuardError(ValueError):
    """Time window or step would let the finite domain contaminate the value."""


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of the discrete mode operator.

    Attributes
    ----------
    grid : RadialGrid
    eigenvalues : ndarray
        Ascending (by real part in the absorbing case).
    vectors : ndarray
        ``vectors[:, k]`` in scaled Liouville coordinates; orthonormal unless
        ``hermitian`` is False.
    diag, off : ndarray
        The tridiagonal matrix that was diagonalized (``off`` real, ``diag``
        complex when an absorbing layer is present).
    complete : bool
        False when only a window of eigenpairs was computed.
    """

    grid: RadialGrid
    eigenvalues: np.ndarray
    vectors: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    hermitian: bool = True
    complete: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def scale(self):
        """``sqrt(omega h) r^{(d-1)/2}`` at the interior nodes."""
        g = self.grid
        return math.sqrt(g.omega * g.h) * g.r[:-1] ** ((g.d - 1) / 2.0)

    def to_coords(self, u):
        vals = u.values if isinstance(u, ModeFunction) else np.asarray(u)
        return self.scale * vals[:-1]

    def from_coords(self, x):
        vals = np.zeros(self.grid.n, dtype=np.complex128)
        vals[:-1] = x / self.scale
        return ModeFunction(self.grid, vals)

    def coefficients(self, u):
        """``<phi_k, u>`` for every stored eigenvector."""
        x = self.to_coords(u)
        if self.hermitian:
            return self.vectors.T.conj() @ x
        return np.linalg.solve(self.vectors, x)

    def synthesize(self, c):
        return self.from_coords(self.vectors @ c)

    def inner(self, u, w):
        """Discrete ``int u w* dx`` matching the eigenbasis normalization."""
        return complex(np.vdot(self.to_coords(w), self.to_coords(u)))

    def norm(self, u):
        return float(np.linalg.norm(self.to_coords(u)))

    def apply(self, u):
        """``H u`` with the discrete operator."""
        x = self.to_coords(u)
        return self.from_coords(tridiag_matvec(self.off, self.diag, self.off, x))

    def orthonormality_error(self):
        Z = self.vectors
        return float(np.max(np.abs(Z.conj().T @ Z - np.eye(Z.shape[1])))) if Z.size else 0.0

    def eigen_residual(self):
        """``max_k ||T z_k - lambda_k z_k||_2``."""
        Z = self.vectors
        if not Z.size:
            return 0.0
        TZ = self.diag[:, None] * Z
        TZ[1:] += self.off[:, None] * Z[:-1]
        TZ[:-1] += self.off[:, None] * Z[1:]
        return float(np.max(np.linalg.norm(TZ - Z * self.eigenvalues, axis=0)))


def _unpack(source, potentials, boundary):
    if isinstance(source, ResolventProblem):
        return source.grid, source.potentials, source.boundary
    return source, tuple(potentials), boundary


def diagonalize(source, potentials=(), boundary="dirichlet", select=None, backend=None):
    """Eigenpairs of ``-Delta + V`` for one mode (no absorption, no ``tau``).

    Parameters
    ----------
    source : RadialGrid or ResolventProblem
        A problem contributes its grid, potentials and boundary; its ``eps``,
        ``tau`` and right-hand side are ignored.
    potentials : sequence of PotentialSpec
    boundary : "dirichlet" or Sponge
        A sponge turns into the absorbing potential ``-i Gamma`` and a dense
        complex eigen-decomposition (at most ``CAP_MAX_NODES`` nodes).
    select : (lo, hi), optional
        Real case only: keep eigenpairs with ``lo <= lambda <= hi``.
    """
    grid, pots, boundary = _unpack(source, potentials, boundary)
    V = np.zeros(grid.n)
    for p in pots:
        V = V + p.value(grid.r)
    q = effective_potential(grid, V)[:-1]
    h = grid.h
    diag = 2.0 / h**2 + q
    off = np.full(grid.n - 2, -1.0 / h**2)
    if isinstance(boundary, Sponge):
        if grid.n > CAP_MAX_NODES:
            raise ValueError(f"absorbing-layer spectra need n <= {CAP_MAX_NODES}, got {grid.n}")
        cdiag = diag - 1j * boundary.profile(grid)[:-1]
        m = cdiag.shape[0]
        A = np.diag(cdiag) + np.diag(off, 1) + np.diag(off, -1)
        w, Z = np.linalg.eig(A)
        order = np.lexsort((w.imag, w.real))
        w, Z = w[order], Z[:, order]
        Z = Z / np.linalg.norm(Z, axis=0)
        return Spectrum(grid, w, Z, cdiag, off, hermitian=False, meta={"boundary": "cap", "size": m})
    if boundary != "dirichlet":
        raise ValueError("boundary must be 'dirichlet' or a Sponge")
    w, Z = eigh_tridiagonal(diag, off, backend=backend, select=select)
    return Spectrum(grid, w, Z, diag.astype(np.complex128), off, complete=select is None,
                    meta={"boundary": "dirichlet", "select": select})


def _in_interval(w, lo, hi, closed):
    left = w >= lo if closed in ("both", "left") else w > lo
    right = w <= hi if closed in ("both", "right") else w < hi
    return left & right


@dataclass(frozen=True)
class Projection:
    u: ModeFunction
    count: int
    empty: bool


def spectral_project(spectrum, u0, lo, hi=math.inf, closed="both"):
    """Orthogonal projection of ``u0`` onto eigenvectors with eigenvalue in the interval.

    ``closed`` picks which endpoints belong to it (``"both"``, ``"left"``,
    ``"right"`` or ``"neither"``): ``[tau, inf)`` is the default form and
    ``(0, delta]`` is ``closed="right"``.
    """
    if not spectrum.hermitian:
        raise ValueError("spectral projections need a real spectrum")
    mask = _in_interval(spectrum.eigenvalues, lo, hi, closed)
    c = spectrum.coefficients(u0) * mask
    return Projection(spectrum.synthesize(c), int(mask.sum()), not mask.any())


def spectral_function(spectrum, u0, fn):
    """``sum_k fn(lambda_k) <phi_k, u0> phi_k``."""
    c = spectrum.coefficients(u0)
    return spectrum.synthesize(fn(spectrum.eigenvalues) * c)


def fractional_derivative(u0, free_spectrum, alpha=0.5):
    """``D^alpha u0`` as ``(-Delta_0)^{alpha/2}`` through the free spectrum."""
    lam = free_spectrum.eigenvalues
    if not free_spectrum.hermitian:
        raise ValueError("fractional derivatives need a real spectrum")
    tol = 1e-10 * max(float(np.max(np.abs(lam), initial=0.0)), 1.0)
    if np.any(lam < -tol):
        raise RuntimeError(f"free spectrum has a negative eigenvalue {lam.min():.3e}")
    if not u0.grid.same_as(free_spectrum.grid):
        raise ValueError("data and spectrum live on different grids")
    return spectral_function(free_spectrum, u0, lambda w: np.maximum(w, 0.0) ** (alpha / 2.0))


def half_derivative(u0, free_spectrum):
    """``D^{1/2} u0``: multiply the free coefficients by ``lambda^{1/4}``."""
    return fractional_derivative(u0, free_spectrum, 0.5)


def propagate(spectrum, u0, t):
    """``e^{itH} u0``."""
    return spectral_function(spectrum, u0, lambda w: np.exp(1j * t * w))


# ------------------------------------------------------- time functionals


@dataclass
class SmoothingResult:
    value: float
    T: float
    T_guard: float
    dt: float
    modes: int
    lam_max: float


def time_guard(grid, lam_max):
    """``T* = r_max / (4 sqrt(lambda_max))``."""
    return grid.rmax / (4.0 * math.sqrt(max(lam_max, 1e-300)))


def _gram(spectrum, cols, weight_vals, free):
    """``B^H diag(w) B`` with ``B`` the retained eigenvectors, optionally
    passed through ``D^{1/2}`` in the free basis."""
    B = spectrum.vectors[:, cols]
    if free is not None:
        if free is spectrum:
            B = B * np.maximum(spectrum.eigenvalues[cols].real, 0.0) ** 0.25
        else:
            Z0 = free.vectors
            lam0 = np.maximum(free.eigenvalues, 0.0)
            B = Z0 @ ((lam0**0.25)[:, None] * (Z0.T @ B))
    Bw = B * np.sqrt(weight_vals)[:, None]
    return Bw.conj().T @ Bw


def smoothing_functional(spectrum, u0, weight, T, dt=None, free=None, project=None,
                         method="trapezoid", tol=1e-12):
    """``int_{-T}^{T} int w(x) |A e^{itH} P u0|^2 dx dt``.

    Parameters
    ----------
    spectrum : Spectrum
    u0 : ModeFunction
    weight : Weight
        Spatial weight, e.g. ``Weight.ball(R)`` for ``(1/R) chi_{B(0,R)}``.
        The integral runs over the interior nodes, so weights that are
        singular like ``r^{1-d}`` or worse are rejected.
    T : float
        Half window.  In the Dirichlet case ``T`` must stay below
        :func:`time_guard` of the largest retained eigenvalue.
    dt : float, optional
        Time step; defaults to and may not exceed ``pi / (4 lambda_max)``.
    free : Spectrum, optional
        Apply ``D^{1/2}`` through this (free) spectrum.  Passing ``spectrum``
        itself gives the ``H``-adapted power instead.
    project : (lo, hi) or (lo, hi, closed), optional
        Spectral window applied to ``u0`` first.
    method : {"trapezoid", "exact"}
        ``"exact"`` integrates the phases in closed form (real spectra only).
    tol : float
        Coefficients below ``tol * max|c|`` are dropped.

    Notes
    -----
    With an absorbing layer the eigenvalues have ``Im lambda <= 0`` so
    ``e^{itH}`` decays for ``t < 0``.  For real data the two half windows
    carry the same mass in the underlying self-adjoint problem, so the value
    is taken as twice the integral over ``[-T, 0]`` and no guard applies.
    """
    grid = spectrum.grid
    if weight.origin_power >= grid.d - 1:
        raise ValueError("weight too singular at the origin for the node sum")
    c = spectrum.coefficients(u0)
    lam = spectrum.eigenvalues
    if project is not None:
        lo, hi, *rest = project
        c = c * _in_interval(lam.real, lo, hi, rest[0] if rest else "both")
    cmax = float(np.max(np.abs(c), initial=0.0))
    if cmax == 0.0:
        return SmoothingResult(0.0, T, math.inf, 0.0, 0, 0.0)
    cols = np.nonzero(np.abs(c) > tol * cmax)[0]
    lam_k = lam[cols]
    c_k = c[cols]
    lam_max = float(np.max(np.abs(lam_k)))
    guard = time_guard(grid, lam_max)
    cap = not spectrum.hermitian
    if not cap and T > guard:
        raise GuardError(
            f"T = {T:g} exceeds the traversal guard {guard:.4g} for this data; "
            "enlarge r_max, smooth the data, or shorten the window"
        )
    dt_max = math.pi / (4.0 * max(lam_max, 1e-300))
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise GuardError(f"time step {dt:g} does not resolve the fastest phase (need <= {dt_max:.4g})")
    w = weight(grid)[:-1]
    G = _gram(spectrum, cols, w, free)

    if method == "exact":
        if cap:
            raise ValueError("closed-form time integral needs a real spectrum")
        diff = lam_k[None, :].real - lam_k[:, None].real
        K = 2.0 * T * np.sinc(diff * T / math.pi)
        val = float(np.real(np.conj(c_k) @ ((G * K) @ c_k)))
        return SmoothingResult(val, T, guard, 0.0, len(cols), lam_max)
    if method != "trapezoid":
        raise ValueError(f"unknown method {method!r}")

    t_lo = -T
    t_hi = 0.0 if cap else T
    steps = max(1, math.ceil((t_hi - t_lo) / dt))
    t = np.linspace(t_lo, t_hi, steps + 1)
    tw = np.full(t.shape, (t_hi - t_lo) / steps)
    tw[[0, -1]] *= 0.5
    total = 0.0
    for s in range(0, t.shape[0], 512):
        A = c_k[None, :] * np.exp(1j * t[s:s + 512, None] * lam_k[None, :])
        dens = np.real(np.einsum("tk,kl,tl->t", A.conj(), G, A))
        total += float(tw[s:s + 512] @ dens)
    if cap:
        total *= 2.0
    return SmoothingResult(total, T, guard, (t_hi - t_lo) / steps, len(cols), lam_max)


def projection_sup(spectrum, lo, hi, weights, closed="right"):
    """``sup_w sup_{||f||=1} int w |P f|^2`` for a list of weights.

    The inner supremum is the top eigenvalue of the Gram matrix of the
    weighted eigenvectors in the window.  Returns ``(value, per_weight,
    count)``.
    """
    mask = _in_interval(spectrum.eigenvalues, lo, hi, closed)
    Z = spectrum.vectors[:, mask]
    if Z.shape[1] == 0:
        return 0.0, [0.0] * len(weights), 0
    vals = []
    for wt in weights:
        wv = wt(spectrum.grid)[:-1] if isinstance(wt, Weight) else np.asarray(wt)[:-1]
        Zw = Z * np.sqrt(wv)[:, None]
        vals.append(float(np.linalg.eigvalsh(Zw.T @ Zw)[-1]))
    return max(vals), vals, int(mask.sum())


def projection_probe(spectrum, delta, R_list, alpha):
    """``sup_R sup_f (1/R) int_{B(0,R)} |P_{(0,delta]} f|^2 |x|^{-alpha/2}``."""
    weights = [Weight(lambda r, R=R: (r <= R) * r ** (-alpha / 2.0) / R, alpha / 2.0, f"probe_{R:g}")
               for R in R_list]
    return projection_sup(spectrum, 0.0, delta, weights, closed="right")


def zero_resonance_check(grid, lam=-2.0, potential=None, window=1.0):
    """Apply the discrete ``H`` with ``V = Delta u*/u*`` to ``u* = (1+r^2)^lam``.

    Returns the max interior residual of ``H u*`` relative to ``max |V u*|``
    and the eigenvalue closest to zero (searched in ``[-window, window]``).
    """
    from .potentials import zero_resonance_potential

    V = zero_resonance_potential(grid.d, lam) if potential is None else potential
    spec = diagonalize(grid, (V,), select=(-window, window))
    r = grid.r
    ustar = (1.0 + r**2) ** lam
    # stencil on the samples themselves, including the (tiny) value at r_max
    v = r ** ((grid.d - 1) / 2.0) * ustar
    q = effective_potential(grid, V.value(r))
    vpad = np.concatenate(([0.0], v))
    Hv = (-vpad[:-2] + 2.0 * vpad[1:-1] - vpad[2:]) / grid.h**2 + q[:-1] * v[:-1]
    Hu = Hv / r[:-1] ** ((grid.d - 1) / 2.0)
    ref = float(np.max(np.abs(V.value(r) * ustar)))
    lamk = spec.eigenvalues
    near = float(lamk[np.argmin(np.abs(lamk))]) if lamk.size else math.nan
    return {"residual": float(np.max(np.abs(Hu)) / ref), "nearest": near, "spectrum": spec}
