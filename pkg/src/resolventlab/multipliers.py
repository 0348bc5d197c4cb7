"""Radial multipliers and weights: the smooth Morawetz-type multiplier, the
piecewise ball/cone family, the bounded weight ``psi_R``, and the
quadrature construction of a multiplier with prescribed bilaplacian in 3-D.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .grids import RadialGrid


@dataclass(frozen=True)
class Atom:
    """Singular measure: point mass at the origin (``r == 0``) or a uniform
    surface layer on ``|x| = r``, with total density ``mass`` per unit area
    (or per point).
    """

    r: float
    mass: float


@dataclass
class MultiplierProfile:
    """Sampled radial multiplier ``Phi`` and companions.

    ``bilap_atoms`` carries singular parts of ``Delta^2 Phi``.  For the
    piecewise family ``paired_lap`` holds ``Delta(2 phi_R - Delta Phi_R)``
    samples and ``paired_atoms`` its surface layer.
    """

    grid: RadialGrid
    kind: str
    dphi: Optional[np.ndarray] = None
    d2phi: Optional[np.ndarray] = None
    lap: Optional[np.ndarray] = None
    bilap: Optional[np.ndarray] = None
    bilap_atoms: list = field(default_factory=list)
    aux: dict = field(default_factory=dict)
    paired_lap: Optional[np.ndarray] = None
    paired_atoms: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------- Morawetz


def morawetz_phi(r):
    """``Phi(r) = sqrt(1 + r^2) + r``."""
    return np.sqrt(1.0 + r * r) + r


def morawetz_derivatives(s, d):
    """``Phi'``, ``Phi''``, ``Delta Phi`` and the regular part of ``Delta^2 Phi`` at ``s``."""
    q = 1.0 + s * s
    d1 = s / np.sqrt(q) + 1.0
    d2 = q**-1.5
    lap = d2 + (d - 1) * d1 / s
    bilap = (
        -(d - 1) * (d - 3) * q**-1.5
        - 6.0 * (d - 3) * q**-2.5
        - 15.0 * q**-3.5
        - (d - 1) * (d - 3) / s**3
    )
    return d1, d2, lap, bilap


def morawetz_profile(R, grid):
    """Samples of ``Phi_R(x) = R Phi(x/R)`` and its radial calculus.

    In ``d = 3`` the cone ``|x|`` inside ``Phi_R`` puts a point mass
    ``-8 pi`` into ``Delta^2 Phi_R`` at the origin; it is recorded as an atom.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    d = grid.d
    s = grid.r / R
    d1, d2, lap, bilap = morawetz_derivatives(s, d)
    atoms = [Atom(0.0, -8.0 * math.pi)] if d == 3 else []
    return MultiplierProfile(
        grid=grid, kind="morawetz", dphi=d1, d2phi=d2 / R, lap=lap / R, bilap=bilap / R**3,
        bilap_atoms=atoms, meta={"R": R, "lap_singular": (d - 1) * 1.0},
    )


# ---------------------------------------------------------------- piecewise


def _snap(R, grid):
    if R < grid.h:
        raise ValueError(f"radius {R} below the mesh spacing {grid.h}")
    i = grid.node_index(R)
    return i, float(grid.r[i])


def piecewise_profile(R, grid):
    """``Phi_R`` with ``grad Phi_R = (x/R)`` inside ``B(0,R)`` and ``x/|x|`` outside.

    ``R`` is snapped to the nearest node; that node carries the mean of the
    one-sided values of every discontinuous sample.  ``phi_R = chi/(2R)`` is
    stored in ``aux``.  ``Delta(2 phi_R - Delta Phi_R)`` equals
    ``(d-1)(d-3)/r^3`` outside the ball plus a surface layer of density
    ``(d-1)/R^2`` on ``|x| = R``.
    """
    i, Rs = _snap(R, grid)
    d = grid.d
    r = grid.r
    inside = r < Rs
    at = np.zeros(grid.n, dtype=bool)
    at[i] = True

    def blend(a_in, a_out):
        out = np.where(inside, a_in, a_out).astype(float)
        out[at] = 0.5 * (np.broadcast_to(a_in, r.shape)[at] + np.broadcast_to(a_out, r.shape)[at])
        return out

    dphi = np.where(r <= Rs, r / Rs, 1.0)
    d2phi = blend(1.0 / Rs, 0.0)
    lap = blend(d / Rs, (d - 1) / r)
    phi_R = blend(1.0 / (2.0 * Rs), 0.0)
    paired = blend(0.0, (d - 1) * (d - 3) / r**3)
    return MultiplierProfile(
        grid=grid, kind="piecewise", dphi=dphi, d2phi=d2phi, lap=lap,
        aux={"phi_R": phi_R}, paired_lap=paired,
        paired_atoms=[Atom(Rs, (d - 1) / Rs**2)],
        meta={"R": Rs, "R_requested": R, "snap": abs(Rs - R), "index": i},
    )


# ---------------------------------------------------------------- psi_R


def psi_R(r, R):
    return 1.0 / (R * (1.0 + (r / R) ** 2))


def psi_weight(R, grid):
    """``psi_R = 1/(R (1 + r^2/R^2))`` with its reciprocal and bracketing flags."""
    if not R > 0:
        raise ValueError("R must be positive")
    r = grid.r
    psi = psi_R(r, R)
    flags = {
        "le_inv_R": bool(np.all(psi <= 1.0 / R)),
        "le_R_over_r2": bool(np.all(psi <= R / r**2)),
        "le_inv_r": bool(np.all(psi <= 1.0 / r)),
        "gt_half_ball": bool(np.all(psi[r < R] > 0.5 / R)),
    }
    return MultiplierProfile(grid=grid, kind="psi", aux={"psi": psi, "inv_psi": 1.0 / psi},
                             meta={"R": R, "flags": flags})


def a2_interval_family(count, seed, lo=1e-3, hi=1e5):
    """Seeded intervals ``(center, halfwidth)`` with log-uniform centers.

    Half-widths are a uniform fraction of the center, so the family is close
    to invariant under dilation.
    """
    rng = np.random.default_rng(seed)
    centers = np.exp(rng.uniform(math.log(lo), math.log(hi), count))
    frac = rng.uniform(0.01, 0.999, count)
    return [(float(c), float(c * f)) for c, f in zip(centers, frac)]


def check_A2(R_list, intervals, d=3, weight=None):
    """Radial ``A_2`` products ``avg_Q w * avg_Q (1/w)`` for each ``R``.

    Averages are taken over annuli ``Q = (c - a, c + a)`` with the volume
    measure ``r^{d-1} dr``.

    Parameters
    ----------
    R_list : sequence of float
    intervals : sequence of (center, halfwidth)
    d : int
    weight : callable, optional
        ``weight(r, R)``; defaults to ``psi_R``.

    Returns
    -------
    dict
        ``{"per_R": {R: sup}, "max": ..., "min": ...}``.
    """
    if not intervals:
        raise ValueError("empty interval family")
    w = psi_R if weight is None else weight
    per_R = {}
    for R in R_list:
        best = 0.0
        for c, a in intervals:
            lo, hi = c - a, c + a
            if lo <= 0:
                raise ValueError("intervals must lie in (0, inf)")
            pts = [R] if lo < R < hi else None
            mass, _ = integrate.quad(lambda t: t ** (d - 1), lo, hi)
            m1, _ = integrate.quad(lambda t: w(t, R) * t ** (d - 1), lo, hi, points=pts, limit=200)
            m2, _ = integrate.quad(lambda t: t ** (d - 1) / w(t, R), lo, hi, points=pts, limit=200)
            best = max(best, (m1 / mass) * (m2 / mass))
        per_R[R] = best
    vals = list(per_R.values())
    return {"per_R": per_R, "max": max(vals), "min": min(vals)}


# ---------------------------------------------------------------- multiplier built from a weight


class HypothesisError(ValueError):
    def __init__(self, message, margin):
        super().__init__(message)
        self.margin = margin


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _cell_integrals(fn, edges):
    """Gauss-Legendre integral of ``fn`` over each cell ``[edges[k], edges[k+1]]``."""
    a = edges[:-1, None]
    b = edges[1:, None]
    t = 0.5 * (b - a) * _GL_X[None, :] + 0.5 * (a + b)
    return (0.5 * (b - a)[:, 0]) * np.sum(fn(t) * _GL_W[None, :], axis=1)


def _phi_closed_form(r, eps, R):
    """``phi'`` and ``phi''`` for ``m = (eps/R^3) chi_{(0,R)}``."""
    inside = r < R
    d2 = np.where(inside, eps / (6.0 * R) - eps * r * r / (10.0 * R**3), eps * R * R / (15.0 * r**3))
    d1 = np.where(inside, eps * r / (6.0 * R) - eps * r**3 / (30.0 * R**3), eps / 6.0 - eps * R * R / (30.0 * r * r))
    return d1, d2


def appendix2_construct(h_profile, eps, R, alpha, kappa, grid, decay=None):
    """Radial ``Phi`` in ``R^3`` with ``Delta^2 Phi = -(eps/R^3) chi_{(0,R)} - h(r)/r``.

    ``Phi' = psi' + phi'`` where ``psi`` absorbs ``h`` (with ``psi'(0) = alpha``)
    and ``phi`` absorbs the ball term with ``phi'(0) = 0`` and
    ``phi'' = int_r^inf s^{-4} int_0^s t^4 m``.

    Parameters
    ----------
    h_profile : callable or None
        Nonnegative ``h(t)``; ``None`` means ``h = 0``.
    eps, R, alpha, kappa : float
        Must satisfy ``alpha + eps/6 + int t h dt < kappa < 1/2``.
    grid : RadialGrid
        Must have ``d = 3``.
    decay : float, optional
        Exponent ``p`` with ``h(t) ~ t^{-p}`` beyond ``r_max``; must exceed 2.
        Integrals to infinity add the power-law tail from ``h(r_max)``.

    Returns
    -------
    MultiplierProfile
        ``meta`` holds the hypothesis margin, the moment ``int t h``, the
        measured constant ``C`` of the lower bound on ``(0, R)`` and the
        per-node verdicts.
    """
    if grid.d != 3:
        raise ValueError("this construction is three-dimensional")
    if not (eps > 0 and R > 0 and alpha > 0):
        raise ValueError("eps, R and alpha must be positive")
    r = grid.r
    L = grid.rmax
    zero = h_profile is None
    h = (lambda t: np.zeros_like(t)) if zero else h_profile
    edges = np.concatenate(([0.0], r))
    if zero:
        I1 = I3 = J0 = np.zeros(grid.n)
        moment = 0.0
        tail1 = tail0 = 0.0
    else:
        hL = float(h(np.array([L]))[0])
        if hL > 0:
            if decay is None or decay <= 2.0:
                raise HypothesisError("h needs a declared decay exponent > 2 for its tail", -math.inf)
            tail1 = L * L * hL / (decay - 2.0)
            tail0 = L * hL / (decay - 1.0)
        else:
            tail1 = tail0 = 0.0
        c1 = _cell_integrals(lambda t: t * h(t), edges)
        c3 = _cell_integrals(lambda t: t**3 * h(t), edges)
        c0 = _cell_integrals(h, edges)
        I1 = np.cumsum(c1)
        I3 = np.cumsum(c3)
        J0 = (np.sum(c0) - np.cumsum(c0)) + tail0
        moment = float(I1[-1] + tail1)
    margin = kappa - (alpha + eps / 6.0 + moment)
    if not kappa < 0.5:
        raise HypothesisError(f"kappa = {kappa} must be below 1/2", 0.5 - kappa)
    if margin <= 0:
        raise HypothesisError(f"hypothesis violated by {-margin:.3e}", margin)
    psi1 = alpha + 0.5 * I1 - I3 / (6.0 * r * r) + r * J0 / 3.0
    psi2 = I3 / (3.0 * r**3) + J0 / 3.0
    phi1, phi2 = _phi_closed_form(r, eps, R)
    d1 = psi1 + phi1
    d2 = psi2 + phi2
    lap = d2 + 2.0 * d1 / r
    ball = r < R
    target = -(eps / R**3) * ball - h(r) / r
    lower = np.minimum(d1[ball] / r[ball], d2[ball]) if ball.any() else np.array([np.inf])
    C = float(np.min(lower) * R / eps)
    checks = {
        "nonneg": bool(np.all(d1 >= 0) and np.all(d2 >= 0)),
        "bracket": bool(np.all(d1 > alpha) and np.all(d1 < kappa)),
        "phi_prime_le": bool(np.all(phi1 <= eps / 6.0)),
        "lower_C_positive": C > 0,
    }
    return MultiplierProfile(
        grid=grid, kind="appendix2", dphi=d1, d2phi=d2, lap=lap, bilap=target,
        bilap_atoms=[Atom(0.0, -8.0 * math.pi * alpha)],
        aux={"psi_prime": psi1, "psi_second": psi2, "phi_prime": phi1, "phi_second": phi2},
        meta={"R": R, "eps": eps, "alpha": alpha, "kappa": kappa, "moment": moment,
              "margin": margin, "C": C, "checks": checks, "lap_singular": 2.0 * alpha,
              # phi'' = eps R^2 / (15 r^3) beyond R integrates to the limit at infinity
              "phi_prime_inf": float(phi1[-1] + (eps * R * R / (30.0 * L * L) if L > R else eps / 6.0 - phi1[-1]))},
    )


# ---------------------------------------------------------------- densities and residuals


def quadratic_form_density(profile, u):
    """``grad u^* . D^2 Phi . grad u`` for the mode:
    ``Phi'' |u'|^2 + (Phi'/r) l(l+d-2) |u|^2 / r^2``.
    """
    grid = u.grid
    if not profile.grid.same_as(grid):
        raise ValueError("profile and function live on different grids")
    du = u.derivative()
    r = grid.r
    return profile.d2phi * np.abs(du) ** 2 + profile.dphi / r * grid.angular * np.abs(u.values) ** 2 / r**2


def _d1_d2_central(g, h):
    """Fourth-order central first and second derivatives at indices 2..n-3."""
    g1 = (g[:-4] - 8.0 * g[1:-3] + 8.0 * g[3:-1] - g[4:]) / (12.0 * h)
    g2 = (-g[:-4] + 16.0 * g[1:-3] - 30.0 * g[2:-2] + 16.0 * g[3:-1] - g[4:]) / (12.0 * h * h)
    return g1, g2


def bilaplacian_residual(profile, target, normalize="sup", floor=1e-12, exclude=(), return_field=False):
    """Largest deviation of the numerical ``Delta^2 Phi`` from ``target``.

    ``Delta^2 Phi = g'' + (d-1) g'/r`` with ``g = Delta Phi`` is formed by
    fourth-order central differences.  A cone part ``s/r`` of ``g`` (recorded
    as ``meta["lap_singular"]``) is removed first and its exact contribution
    ``-s (d-3)/r^3`` added back, so the origin does not dominate.

    Parameters
    ----------
    target : callable or array
    normalize : {"sup", "pointwise"}
        ``"sup"`` divides by ``max |target| + floor``; ``"pointwise"`` by
        ``|target| + floor`` at each node.
    exclude : sequence of float
        Radii whose differencing stencils are skipped (jumps of ``g''``).
    """
    grid = profile.grid
    if grid.n < 5:
        raise ValueError("need at least 5 nodes")
    r = grid.r
    d = grid.d
    h = grid.h
    s = float(profile.meta.get("lap_singular", 0.0))
    g = profile.lap - s / r
    g1, g2 = _d1_d2_central(g, h)
    ri = r[2:-2]
    num = g2 + (d - 1) * g1 / ri - s * (d - 3) / ri**3
    tgt = np.asarray(target(ri) if callable(target) else np.asarray(target)[2:-2], dtype=float)
    keep = np.ones(ri.shape, dtype=bool)
    for x in exclude:
        keep &= np.abs(ri - x) > 2.0 * h + 1e-12 * h
    err = np.abs(num - tgt)[keep]
    if normalize == "sup":
        res = err / (np.max(np.abs(tgt[keep])) + floor) if err.size else np.zeros(0)
    elif normalize == "pointwise":
        res = err / (np.abs(tgt[keep]) + floor)
    else:
        raise ValueError("normalize must be 'sup' or 'pointwise'")
    worst = float(np.max(res)) if res.size else 0.0
    if return_field:
        return worst, ri[keep], res
    return worst
