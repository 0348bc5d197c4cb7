"""Per-mode stationary resolvent solver.

Solves ``-Delta u + V u +/- i eps u -/+ tau u = f`` for one spherical-harmonic
mode.  With ``v = r^{(d-1)/2} u`` the radial operator becomes
``-v'' + q(r) v`` where ``q = V + (l(l+d-2) + (d-1)(d-3)/4)/r^2``, which is
discretized with second-order central differences and ``v(0) = 0``.  The
outer node ``r_max`` carries a homogeneous Dirichlet condition; an optional
sponge adds ``+/- i Gamma(r)`` over an outer layer.
"""
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grids import ModeFunction, RadialGrid, fd_derivative
from .kernels import TridiagonalLU, tridiag_matvec
from .potentials import PotentialSpec


class TruncationWarning(UserWarning):
    """Solution has not decayed at the outer boundary."""


LEAK_LIMIT = 1e-3


@dataclass(frozen=True)
class Sponge:
    """Absorbing layer on the outer ``width`` fraction of the domain.

    ``Gamma(r) = strength * ((r - r0) / (r_max - r0))^3`` for ``r > r0``.
    """

    width: float = 0.25
    strength: float = 1.0

    def profile(self, grid):
        r0 = grid.rmax * (1.0 - self.width)
        x = np.clip((grid.r - r0) / (grid.rmax - r0), 0.0, None)
        return self.strength * x**3


@dataclass(frozen=True)
class ResolventProblem:
    """One instance of the resolvent equation for a single mode.

    Parameters
    ----------
    grid : RadialGrid
    potentials : tuple of PotentialSpec
        Summed into ``V``.
    eps : float
        Absorption, strictly positive.
    tau : float
    rhs : ModeFunction
    sign : {"plus", "minus"}
        Sign in front of ``i eps u``.
    tau_sign : {"minus", "plus"}
        ``"minus"`` gives ``- tau u``, ``"plus"`` gives ``+ tau u``.
    boundary : "dirichlet" or Sponge
    """

    grid: RadialGrid
    potentials: tuple
    eps: float
    tau: float
    rhs: ModeFunction
    sign: str = "plus"
    tau_sign: str = "minus"
    boundary: object = "dirichlet"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be strictly positive")
        if self.sign not in ("plus", "minus"):
            raise ValueError("sign must be 'plus' or 'minus'")
        if self.tau_sign not in ("plus", "minus"):
            raise ValueError("tau_sign must be 'plus' or 'minus'")
        if not (self.boundary == "dirichlet" or isinstance(self.boundary, Sponge)):
            raise ValueError("boundary must be 'dirichlet' or a Sponge")
        pots = tuple(self.potentials) if self.potentials is not None else ()
        for p in pots:
            if not isinstance(p, PotentialSpec):
                raise TypeError("potentials must be PotentialSpec instances")
        object.__setattr__(self, "potentials", pots)
        if not self.rhs.grid.same_as(self.grid):
            raise ValueError("rhs lives on a different grid")

    @property
    def sigma(self):
        return 1.0 if self.sign == "plus" else -1.0

    @property
    def tau_shift(self):
        """Coefficient ``c`` of the ``c u`` term coming from ``tau``."""
        return -self.tau if self.tau_sign == "minus" else self.tau

    def potential(self, r=None):
        r = self.grid.r if r is None else r
        V = np.zeros_like(r)
        for p in self.potentials:
            V = V + p.value(r)
        return V

    def potential_derivative(self, r=None):
        r = self.grid.r if r is None else r
        dV = np.zeros_like(r)
        for p in self.potentials:
            dV = dV + p.derivative(r)
        return dV

    def absorption(self):
        """``eps + Gamma(r)`` at the nodes."""
        gam = self.boundary.profile(self.grid) if isinstance(self.boundary, Sponge) else 0.0
        return self.eps + np.zeros(self.grid.n) + gam

    def replace(self, **kw):
        fields = dict(grid=self.grid, potentials=self.potentials, eps=self.eps, tau=self.tau,
                      rhs=self.rhs, sign=self.sign, tau_sign=self.tau_sign, boundary=self.boundary)
        fields.update(kw)
        return ResolventProblem(**fields)


def effective_potential(grid, V):
    """``q = V + (l(l+d-2) + (d-1)(d-3)/4) / r^2``."""
    d = grid.d
    return V + (grid.angular + (d - 1) * (d - 3) / 4.0) / grid.r**2


@dataclass
class TridiagonalOperator:
    """Complex tridiagonal operator acting on ``v`` at the interior nodes."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    scale: np.ndarray  # r^{(d-1)/2} at the interior nodes
    grid: RadialGrid
    _lu: Optional[TridiagonalLU] = field(default=None, repr=False)

    def dense(self):
        m = self.diag.shape[0]
        A = np.zeros((m, m), dtype=np.complex128)
        idx = np.arange(m)
        A[idx, idx] = self.diag
        A[idx[1:], idx[:-1]] = self.lower
        A[idx[:-1], idx[1:]] = self.upper
        return A

    def factor(self):
        if self._lu is None:
            self._lu = TridiagonalLU(self.lower, self.diag, self.upper)
        return self._lu

    def solve_v(self, b):
        return self.factor().solve(b)

    def apply_v(self, v):
        return tridiag_matvec(self.lower, self.diag, self.upper, v)

    def cond_estimate(self, eps):
        h = self.grid.h
        return (4.0 / h**2 + float(np.max(np.abs(self.diag.real - 2.0 / h**2)))) / eps


def assemble_operator(problem):
    """Tridiagonal system for ``v = r^{(d-1)/2} u`` at nodes ``r_1 .. r_{n-1}``."""
    grid = problem.grid
    h = grid.h
    r = grid.r[:-1]
    q = effective_potential(grid, problem.potential())[:-1]
    gam = problem.absorption()[:-1]
    diag = 2.0 / h**2 + q + problem.tau_shift + 1j * problem.sigma * gam
    off = np.full(r.shape[0] - 1, -1.0 / h**2, dtype=np.complex128)
    return TridiagonalOperator(off, diag.astype(np.complex128), off.copy(), r ** ((grid.d - 1) / 2.0), grid)


@dataclass
class ResolventSolution:
    u: ModeFunction
    residual: float
    boundary_leak: float
    cond_estimate: float
    backward_ok: bool
    meta: dict = field(default_factory=dict)


def boundary_leak(grid, values):
    """Largest Liouville amplitude ``|r^{(d-1)/2} u|`` over the outer 1% of
    nodes (at least four) relative to its overall maximum.
    """
    v = np.abs(values) * grid.r ** ((grid.d - 1) / 2.0)
    top = float(np.max(v))
    if top == 0.0:
        return 0.0
    k = max(4, grid.n // 100)
    return float(np.max(v[-k - 1:-1]) / top)


def _residual(op, u_vals, f_vals):
    s = op.scale
    Av = op.apply_v(s * u_vals[:-1])
    res = np.abs(Av / s - f_vals[:-1])
    return float(np.max(res) / (np.max(np.abs(f_vals)) + 1e-300)) if np.any(f_vals) else float(np.max(res))


def residual_check(problem, u, floor=1e-300):
    """Max over interior nodes of ``|A u - f| / (max|f| + floor)``."""
    op = assemble_operator(problem)
    s = op.scale
    Av = op.apply_v(s * u.values[:-1])
    res = np.abs(Av / s - problem.rhs.values[:-1])
    return float(np.max(res) / (np.max(np.abs(problem.rhs.values)) + floor))


def _finish(problem, op, v, f_vals, warn=True):
    grid = problem.grid
    u_vals = np.zeros(grid.n, dtype=np.complex128)
    u_vals[:-1] = v / op.scale
    u = ModeFunction(grid, u_vals, fd_derivative(u_vals, grid.h))
    res = _residual(op, u_vals, f_vals)
    leak = boundary_leak(grid, u_vals)
    cond = op.cond_estimate(problem.eps)
    if warn and leak > LEAK_LIMIT:
        warnings.warn(f"boundary leak {leak:.2e} exceeds {LEAK_LIMIT:g}; enlarge r_max", TruncationWarning,
                      stacklevel=3)
    return ResolventSolution(u=u, residual=res, boundary_leak=leak, cond_estimate=cond,
                             backward_ok=res <= 10.0 * np.finfo(float).eps * cond)


def solve_resolvent(problem, warn=True):
    """Direct pivoted tridiagonal solve of one resolvent problem."""
    op = assemble_operator(problem)
    f = problem.rhs.values
    v = op.solve_v(op.scale * f[:-1])
    return _finish(problem, op, v, f, warn)


def solve_many(problem, rhs_list, warn=False):
    """Solve for several right-hand sides with one factorization.

    ``problem.rhs`` only fixes the grid; ``rhs_list`` holds ModeFunctions.
    """
    op = assemble_operator(problem)
    if not rhs_list:
        return []
    F = np.stack([f.values for f in rhs_list], axis=1)
    V = op.solve_v(op.scale[:, None] * F[:-1])
    return [_finish(problem, op, V[:, k], F[:, k], warn) for k in range(F.shape[1])]


def continuous_operator(problem, r, u, du, d2u):
    """Apply ``-Delta + V +/- i eps -/+ tau`` to a mode given ``u, u', u''`` at ``r``
    (used to manufacture right-hand sides).
    """
    grid = problem.grid
    d = grid.d
    V = problem.potential(r)
    lap = d2u + (d - 1) * du / r - grid.angular * u / r**2
    gam = problem.eps  # sponge is a discretization device, not part of the model
    return -lap + V * u + 1j * problem.sigma * gam * u + problem.tau_shift * u
