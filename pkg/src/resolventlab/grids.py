"""Radial meshes, quadrature and Morrey-Campanato type norms for one angular mode.

A mode function stores the radial profile ``u(r)`` of ``u(x) = u(r) Y(x/|x|)``
where ``Y`` has unit mean square over the sphere.  With that normalization
every ``d``-dimensional integral of a radial weight against ``|u|^2`` is
``omega_{d-1}`` times a one-dimensional integral in ``r^{d-1} dr``.
"""
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .kernels import compensated_cumsum, compensated_sum


class SingularWeightWarning(UserWarning):
    """A weight blows up faster than the volume element vanishes at the origin."""


def sphere_area(d):
    """Surface area of the unit sphere in ``R^d``."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def ball_volume(d, R):
    return sphere_area(d) * R**d / d


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial mesh ``r_i = i h``, ``i = 1..n`` (origin excluded).

    Parameters
    ----------
    d : int
        Space dimension, at least 2.
    ell : int
        Spherical-harmonic degree of the mode.
    n : int
        Number of nodes; the last node sits at ``r_max = n h``.
    h : float
        Mesh spacing.
    """

    d: int
    ell: int
    n: int
    h: float

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if self.ell < 0:
            raise ValueError("mode index must be nonnegative")
        if self.n < 5:
            raise ValueError("need at least 5 nodes")
        if not self.h > 0:
            raise ValueError("spacing must be positive")

    @classmethod
    def from_rmax(cls, d, ell, n, rmax):
        return cls(int(d), int(ell), int(n), float(rmax) / int(n))

    @cached_property
    def r(self):
        return np.arange(1, self.n + 1, dtype=np.float64) * self.h

    @property
    def rmax(self):
        return self.n * self.h

    @cached_property
    def omega(self):
        return sphere_area(self.d)

    @property
    def angular(self):
        """Eigenvalue ``l(l+d-2)`` of the spherical Laplacian for this mode."""
        return self.ell * (self.ell + self.d - 2)

    @cached_property
    def weights(self):
        """Trapezoid volume weights; the outer node gets half weight."""
        w = self.omega * self.r ** (self.d - 1) * self.h
        w[-1] *= 0.5
        return w

    def refine(self, factor=2):
        return RadialGrid(self.d, self.ell, self.n * factor, self.h / factor)

    def with_mode(self, ell):
        return RadialGrid(self.d, ell, self.n, self.h)

    def node_index(self, R):
        """Index of the node nearest to ``R``."""
        return int(np.clip(round(R / self.h) - 1, 0, self.n - 1))

    def same_as(self, other):
        return (self.d, self.ell, self.n, self.h) == (other.d, other.ell, other.n, other.h)


@dataclass(frozen=True)
class ModeFunction:
    """Complex samples of one mode profile on a grid, optionally with ``u'``."""

    grid: RadialGrid
    values: np.ndarray
    deriv: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("mode samples must be finite")
        object.__setattr__(self, "values", vals.astype(np.complex128))
        if self.deriv is not None:
            dv = np.asarray(self.deriv, dtype=np.complex128)
            if dv.shape != vals.shape:
                raise ValueError("derivative samples must match values")
            object.__setattr__(self, "deriv", dv)

    @classmethod
    def from_callable(cls, grid, fn, dfn=None):
        r = grid.r
        return cls(grid, fn(r), None if dfn is None else dfn(r))

    def derivative(self):
        """``u'`` samples, from storage or fourth-order differences."""
        if self.deriv is not None:
            return self.deriv
        return fd_derivative(self.values, self.grid.h)

    def __mul__(self, c):
        return ModeFunction(self.grid, self.values * c,
                            None if self.deriv is None else self.deriv * c)

    __rmul__ = __mul__


def indicator(grid, a, b, balanced=False):
    """Samples of the indicator of ``a < r <= b``.

    With ``balanced=True`` a node sitting exactly on a jump gets ``sqrt(1/2)``,
    so that ``|u|^2`` takes the mean of the one-sided values there and full
    trapezoid integrals stay second order.
    """
    r = grid.r
    tol = 1e-9 * grid.h
    vals = ((r > a + tol) & (r <= b + tol)).astype(np.float64)
    if balanced:
        half = math.sqrt(0.5)
        vals[np.abs(r - a) <= tol] = half
        vals[np.abs(r - b) <= tol] = half
    return ModeFunction(grid, vals)


def fd_derivative(values, h):
    """Fourth-order first derivative with one-sided closures at both ends."""
    u = np.asarray(values)
    n = u.shape[0]
    if n < 5:
        raise ValueError("need at least 5 samples")
    du = np.empty_like(u)
    du[2:-2] = (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * h)
    du[0] = (-25.0 * u[0] + 48.0 * u[1] - 36.0 * u[2] + 16.0 * u[3] - 3.0 * u[4]) / (12.0 * h)
    du[1] = (-3.0 * u[0] - 10.0 * u[1] + 18.0 * u[2] - 6.0 * u[3] + u[4]) / (12.0 * h)
    du[-1] = (25.0 * u[-1] - 48.0 * u[-2] + 36.0 * u[-3] - 16.0 * u[-4] + 3.0 * u[-5]) / (12.0 * h)
    du[-2] = (3.0 * u[-1] + 10.0 * u[-2] - 18.0 * u[-3] + 6.0 * u[-4] - u[-5]) / (12.0 * h)
    return du


# ---------------------------------------------------------------- weights


@dataclass(frozen=True)
class Weight:
    """Radial weight ``w(r)`` together with its growth ``r^{-p}`` at the origin.

    ``origin_power`` decides how the quadrature treats ``r -> 0``: the
    integrand ``r^{d-1} w |u|^2`` either vanishes there, tends to a finite
    limit (added by extrapolation), or is singular (warned about).
    """

    fn: Callable = field(repr=False)
    origin_power: float = 0.0
    label: str = "custom"

    def __call__(self, grid):
        vals = np.asarray(self.fn(grid.r), dtype=np.float64)
        return np.broadcast_to(vals, (grid.n,))

    @classmethod
    def one(cls):
        return cls(lambda r: np.ones_like(r), 0.0, "one")

    @classmethod
    def inverse_power(cls, p):
        return cls(lambda r: r ** (-float(p)), float(p), f"r^-{p}")

    @classmethod
    def potential_over_r(cls, spec):
        """``V(r)/r`` for a potential spec (negative parts kept as they are)."""
        return cls(lambda r: spec.value(r) / r, spec.origin_power + 1.0, f"{spec.kind}/r")

    @classmethod
    def japanese(cls, alpha, sign=-1):
        """``(1+r)^{sign (1+alpha)}``."""
        e = sign * (1.0 + alpha)
        return cls(lambda r: (1.0 + r) ** e, 0.0, f"(1+r)^{e:g}")

    @classmethod
    def psi(cls, R):
        return cls(lambda r: 1.0 / (R * (1.0 + (r / R) ** 2)), 0.0, f"psi_{R:g}")

    @classmethod
    def sqrt_potential_ball(cls, spec, R):
        """``V^{1/2}`` restricted to ``r <= R``; needs ``V >= 0``."""
        def fn(r):
            v = spec.value(r)
            return np.sqrt(np.maximum(v, 0.0)) * (r <= R)
        return cls(fn, 0.5 * spec.origin_power, f"sqrtV_ball_{R:g}")

    @classmethod
    def ball(cls, R):
        """``(1/R) chi_{r <= R}``."""
        return cls(lambda r: (r <= R) / R, 0.0, f"ball_{R:g}")

    @classmethod
    def sampled(cls, values, origin_power=0.0):
        vals = np.asarray(values, dtype=np.float64)
        return cls(lambda r: vals, origin_power, "sampled")


@dataclass(frozen=True)
class IntegralResult:
    value: float
    first_node: float
    singular: bool


def _integrand(u, weight, density=None):
    grid = u.grid if isinstance(u, ModeFunction) else u
    dens = np.abs(u.values) ** 2 if density is None else np.asarray(density, dtype=np.float64)
    w = np.ones(grid.n) if weight is None else weight(grid)
    p = 0.0 if weight is None else weight.origin_power
    F = grid.omega * grid.r ** (grid.d - 1) * w * dens
    return grid, F, p


def _origin_value(grid, F, p):
    q = grid.d - 1 - p
    if abs(q) < 1e-12:
        # finite nonzero limit at r = 0: linear extrapolation
        return 2.0 * F[0] - F[1], False
    return 0.0, q < 0


def cumulative_integral(u, weight=None, density=None):
    """Trapezoid ``int_{B(0, r_i)} w |u|^2 dx`` at every node ``r_i``."""
    grid, F, p = _integrand(u, weight, density)
    F0, _ = _origin_value(grid, F, p)
    h = grid.h
    c = compensated_cumsum(F * h)
    return c - 0.5 * h * F + 0.5 * h * F0


def integrate_radial_detail(u, weight=None, density=None):
    """Full-domain quadrature with the first-node contribution split out.

    ``density`` replaces ``|u|^2`` (e.g. a gradient density) when given.
    """
    grid, F, p = _integrand(u, weight, density)
    F0, singular = _origin_value(grid, F, p)
    h = grid.h
    g = F * h
    g[-1] *= 0.5
    total = compensated_sum(np.concatenate(([0.5 * h * F0], g)))
    first = float(g[0])
    if singular:
        label = "weight" if weight is None else weight.label
        warnings.warn(
            f"weight {label} is singular at the origin in d={grid.d}; "
            f"first-node contribution {first:.3e} of total {total:.3e}",
            SingularWeightWarning,
            stacklevel=3,
        )
    return IntegralResult(float(total), first, singular)


def integrate_radial(u, weight=None, density=None):
    """``int w(|x|) |u(x)|^2 dx`` by trapezoid quadrature in ``r``."""
    return integrate_radial_detail(u, weight, density).value


def ball_integral(u, R, weight=None, density=None):
    """``int_{B(0,R)} w |u|^2 dx``, linear in ``R`` between nodes."""
    grid = u.grid if isinstance(u, ModeFunction) else u
    c = cumulative_integral(u, weight, density)
    return float(np.interp(R, np.concatenate(([0.0], grid.r)), np.concatenate(([0.0], c))))


def integrate_sphere(u, R):
    """``int_{|x|=R} |u|^2 d sigma`` with ``u(R)`` interpolated linearly."""
    grid = u.grid
    if not (grid.h <= R <= grid.rmax):
        raise ValueError(f"sphere radius {R} outside [{grid.h}, {grid.rmax}]")
    re = np.interp(R, grid.r, u.values.real)
    im = np.interp(R, grid.r, u.values.imag)
    return grid.omega * R ** (grid.d - 1) * (re * re + im * im)


def dyadic_radii(grid, rho=0.0):
    """Dyadic ``R`` in ``[max(rho, h), r_max]`` plus ``r_max`` itself."""
    lo = max(rho, grid.h)
    kmin = math.ceil(math.log2(lo) - 1e-12)
    kmax = math.floor(math.log2(grid.rmax) + 1e-12)
    radii = [2.0**k for k in range(kmin, kmax + 1) if lo <= 2.0**k <= grid.rmax]
    if not radii or radii[-1] < grid.rmax:
        radii.append(grid.rmax)
    return np.array(radii)


def morrey_sup(u, rho=0.0, power=1.0, weight=None, density=None):
    """``sup_R R^{-power} int_{B(0,R)} w |u|^2`` over :func:`dyadic_radii`."""
    grid = u.grid if isinstance(u, ModeFunction) else u
    radii = dyadic_radii(grid, rho)
    c = cumulative_integral(u, weight, density)
    vals = np.interp(radii, np.concatenate(([0.0], grid.r)), np.concatenate(([0.0], c)))
    return float(np.max(vals / radii**power))


def sphere_sup(u, rho=0.0, power=2.0):
    """``sup_{R >= rho} R^{-power} int_{|x|=R} |u|^2`` over grid nodes."""
    grid = u.grid
    mask = grid.r >= max(rho, grid.h) - 1e-12 * grid.h
    r = grid.r[mask]
    vals = grid.omega * r ** (grid.d - 1 - power) * np.abs(u.values[mask]) ** 2
    return float(np.max(vals)) if vals.size else 0.0


def norm_X(u, rho=0.0, weight=None, density=None):
    """Morrey norm ``(sup_R R^{-1} int_{B(0,R)} |u|^2)^{1/2}``; ``rho > 0`` gives ``X_rho``."""
    return math.sqrt(max(morrey_sup(u, rho, 1.0, weight, density), 0.0))


def shell_index_range(grid):
    return math.floor(math.log2(grid.h)), math.ceil(math.log2(grid.rmax))


def j0_for(rho):
    """The ``j`` with ``2^j < rho <= 2^{j+1}``."""
    j = math.ceil(math.log2(rho)) - 1
    if not 2.0**j < rho:  # guard rounding at exact powers of two
        j -= 1
    return j


def shell_integrals(u, weight=None, density=None):
    """Map ``j -> int_{C_j} w |u|^2`` over dyadic shells, by node membership."""
    grid, F, p = _integrand(u, weight, density)
    g = F * grid.h
    g[-1] *= 0.5
    jlo, jhi = shell_index_range(grid)
    out = {}
    for j in range(jlo, jhi + 1):
        lo, hi = 2.0**j, 2.0 ** (j + 1)
        mask = (grid.r > lo) & (grid.r <= hi)
        if mask.any():
            out[j] = compensated_sum(g[mask])
    return out


def norm_Xstar(f, rho=0.0, weight=None):
    """Dyadic-shell norm ``sum_j (2^{j+1} int_{C_j} |f|^2)^{1/2}``.

    For ``rho > 0`` only shells with ``j >= j0`` count and the ball term
    ``(rho int_{B(0,rho)} |f|^2)^{1/2}`` is added.
    """
    shells = shell_integrals(f, weight)
    if rho > 0:
        j0 = j0_for(rho)
        shells = {j: s for j, s in shells.items() if j >= j0}
    total = compensated_sum(np.array([math.sqrt(2.0 ** (j + 1) * max(s, 0.0)) for j, s in sorted(shells.items())] or [0.0]))
    if rho > 0:
        total += math.sqrt(max(rho * ball_integral(f, rho, weight), 0.0))
    return float(total)


def grad_density(u):
    """Pointwise ``|grad u|^2`` for the mode: ``|u'|^2 + l(l+d-2)|u|^2/r^2``."""
    grid = u.grid
    du = u.derivative()
    return np.abs(du) ** 2 + grid.angular * np.abs(u.values) ** 2 / grid.r**2


def check_discrete_hardy(grid, trials):
    """Worst ratio ``int |u|^2/r^2 / int |grad u|^2`` over trial profiles.

    Parameters
    ----------
    grid : RadialGrid
        Needs ``d >= 3``.
    trials : int or sequence of callables
        An integer selects that many members of the family
        ``r^{(2-d)/2 + delta} e^{-r}`` with ``delta`` decreasing toward 0;
        callables are sampled directly (and cut off smoothly at ``r_max``).
    """
    if grid.d < 3:
        raise ValueError("Hardy inequality needs d >= 3")
    r = grid.r
    taper = np.where(r < 0.9 * grid.rmax, 1.0, np.cos(0.5 * np.pi * (r - 0.9 * grid.rmax) / (0.1 * grid.rmax)) ** 2)
    if isinstance(trials, int):
        deltas = np.geomspace(1.0, 0.05, max(trials, 1))
        fns = [lambda rr, dl=dl: rr ** ((2.0 - grid.d) / 2.0 + dl) * np.exp(-rr) for dl in deltas]
    else:
        fns = list(trials)
    worst = 0.0
    inv2 = Weight.inverse_power(2)
    for fn in fns:
        vals = fn(r) * taper
        # both ends pinned to zero so the trial vanishes at the mesh ends
        vals[0] = 0.0
        vals[-1] = 0.0
        u = ModeFunction(grid, vals)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SingularWeightWarning)
            num = integrate_radial(u, inv2)
        den = integrate_radial(u, density=grad_density(u))
        if den > 0:
            worst = max(worst, num / den)
    return worst
