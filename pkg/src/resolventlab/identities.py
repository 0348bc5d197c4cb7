"""Integration-by-parts identities for solutions of the resolvent equation,
evaluated term by term with the grid quadrature.

Conventions.  The equation is ``-Delta u + V u + i s a(r) u + c u = f`` with
``s = +/-1``, ``a = eps + Gamma`` (``Gamma`` the sponge, zero for plain
Dirichlet problems) and ``c`` the ``tau`` coefficient.  ``M u = grad Phi .
grad u + (1/2) Delta Phi u`` is the multiplier.  On the truncated ball the
Dirichlet condition leaves one boundary term,
``-(1/2) Phi'(L) int_{|x|=L} |u'|^2``, in every multiplier identity.

Identity ids:

``A1-1``  ``int phi |grad u|^2 - 1/2 int Delta phi |u|^2 + int phi V |u|^2 + c int phi |u|^2 = Re int phi f u*``
``A1-2``  ``s int phi a |u|^2 + Im int grad phi . grad u u* = Im int phi f u*``
``A1-3``  ``int D^2Phi(grad u, grad u) - 1/4 int Delta^2 Phi |u|^2 - 1/2 int V' Phi' |u|^2 + B_L
= s Im int a Phi' u'* u + Re int f (M u)*``
``A1-4``  ``A1-3 - A1-1`` with ``1/4 int Delta(2 phi - Delta Phi) |u|^2`` collected
``A1-13`` ``A1-3`` with ``V = V1 + V2`` and the ``V2`` part integrated by parts
``A1-14`` ``A1-4`` with the same split
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import SingularWeightWarning, Weight, integrate_radial, integrate_sphere

IDS = ("A1-1", "A1-2", "A1-3", "A1-4", "A1-13", "A1-14")


@dataclass(frozen=True)
class TestWeight:
    """Radial test weight ``phi`` with ``phi'`` and ``Delta phi`` samples."""

    __test__ = False  # not a pytest class

    values: np.ndarray
    deriv: np.ndarray
    lap: np.ndarray
    label: str = "custom"

    @classmethod
    def from_callables(cls, grid, f, df, d2f, label="custom"):
        r = grid.r
        return cls(f(r), df(r), d2f(r) + (grid.d - 1) * df(r) / r, label)

    @classmethod
    def constant(cls, grid, c=1.0):
        z = np.zeros(grid.n)
        return cls(np.full(grid.n, float(c)), z, z.copy(), f"const_{c:g}")

    @classmethod
    def japanese(cls, grid, alpha):
        """``(1 + r)^{-1-alpha}``."""
        e = -1.0 - alpha
        return cls.from_callables(
            grid,
            lambda r: (1.0 + r) ** e,
            lambda r: e * (1.0 + r) ** (e - 1.0),
            lambda r: e * (e - 1.0) * (1.0 + r) ** (e - 2.0),
            f"japanese_{alpha:g}",
        )

    @classmethod
    def psi(cls, grid, R):
        """``psi_R = R / (R^2 + r^2)``."""
        return cls.from_callables(
            grid,
            lambda r: R / (R * R + r * r),
            lambda r: -2.0 * R * r / (R * R + r * r) ** 2,
            lambda r: -2.0 * R / (R * R + r * r) ** 2 + 8.0 * R * r * r / (R * R + r * r) ** 3,
            f"psi_{R:g}",
        )

    @classmethod
    def gaussian(cls, grid, width):
        w2 = width * width
        return cls.from_callables(
            grid,
            lambda r: np.exp(-r * r / w2),
            lambda r: -2.0 * r / w2 * np.exp(-r * r / w2),
            lambda r: (4.0 * r * r / w2**2 - 2.0 / w2) * np.exp(-r * r / w2),
            f"gauss_{width:g}",
        )


@dataclass
class IdentityReport:
    identity: str
    lhs: float
    rhs: float
    residual: float
    lhs_terms: dict = field(default_factory=dict)
    rhs_terms: dict = field(default_factory=dict)


def _quad(grid, density, origin_power=0.0):
    weight = Weight.sampled(np.ones(grid.n), origin_power) if origin_power else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularWeightWarning)
        return integrate_radial(grid, weight, density=np.asarray(density, dtype=float))


def origin_value(u):
    """``u(0)``: even extrapolation for ``l = 0``, zero otherwise."""
    if u.grid.ell != 0:
        return 0.0
    return (4.0 * u.values[0] - u.values[1]) / 3.0


def atom_integral(atoms, u):
    """``int |u|^2`` against a list of point/surface atoms."""
    total = 0.0
    for at in atoms:
        if at.r == 0.0:
            total += at.mass * abs(origin_value(u)) ** 2
        else:
            total += at.mass * integrate_sphere(u, at.r)
    return total


def _split_potentials(problem):
    V1 = [p for p in problem.potentials if p.role != "V2_long_range"]
    V2 = [p for p in problem.potentials if p.role == "V2_long_range"]
    r = problem.grid.r

    def tot(ps, deriv=False):
        out = np.zeros_like(r)
        for p in ps:
            out = out + (p.derivative(r) if deriv else p.value(r))
        return out

    return tot(V1), tot(V1, True), tot(V2)


def _finish(identity, lhs_terms, rhs_terms):
    lhs = float(sum(lhs_terms.values()))
    rhs = float(sum(rhs_terms.values()))
    scale = sum(abs(v) for v in lhs_terms.values()) + sum(abs(v) for v in rhs_terms.values())
    floor = 1e-14 * scale + 1e-300
    return IdentityReport(identity, lhs, rhs, abs(lhs - rhs) / (abs(lhs) + abs(rhs) + floor), lhs_terms, rhs_terms)


def check_identity(identity, solution, problem, phi=None, Phi=None):
    """Evaluate one identity on a computed solution.

    Parameters
    ----------
    identity : str
        One of ``IDS``.
    solution : ResolventSolution or ModeFunction
    problem : ResolventProblem
    phi : TestWeight, optional
        Needed by A1-1, A1-2, A1-4, A1-14.  For A1-4/A1-14 with a piecewise
        multiplier, ``None`` selects the paired weight ``phi_R``.
    Phi : MultiplierProfile, optional
        Needed by A1-3, A1-4, A1-13, A1-14.
    """
    if identity not in IDS:
        raise ValueError(f"unknown identity {identity!r}")
    u = solution.u if hasattr(solution, "u") else solution
    grid = problem.grid
    if not u.grid.same_as(grid):
        raise ValueError("solution and problem live on different grids")
    if Phi is not None and not Phi.grid.same_as(grid):
        raise ValueError("multiplier lives on a different grid")
    if u.deriv is None:
        raise ValueError("solution carries no derivative samples")
    r = grid.r
    A = grid.angular
    uu = u.values
    du = u.deriv
    f = problem.rhs.values
    abs2 = np.abs(uu) ** 2
    grad2 = np.abs(du) ** 2 + A * abs2 / r**2
    s = problem.sigma
    c = problem.tau_shift
    a = problem.absorption()
    V = problem.potential()
    Vp = problem.potential_derivative()
    pV = max((p.origin_power for p in problem.potentials), default=0.0)

    needs_phi = identity in ("A1-1", "A1-2") or (identity in ("A1-4", "A1-14") and (Phi is None or Phi.kind != "piecewise"))
    if needs_phi and phi is None:
        raise ValueError(f"{identity} needs a test weight")
    if identity in ("A1-3", "A1-4", "A1-13", "A1-14") and Phi is None:
        raise ValueError(f"{identity} needs a multiplier profile")
    if identity in ("A1-3", "A1-13") and Phi.bilap is None:
        raise ValueError(f"{identity} needs a multiplier with sampled bilaplacian (not {Phi.kind})")
    paired = identity in ("A1-4", "A1-14") and phi is None and Phi.kind == "piecewise"
    if paired:
        phi_vals = Phi.aux["phi_R"]
    elif phi is not None:
        phi_vals = phi.values

    if identity == "A1-1":
        lhs = {
            "phi_grad": _quad(grid, phi_vals * grad2),
            "lap_phi": -0.5 * _quad(grid, phi.lap * abs2),
            "phi_V": _quad(grid, phi_vals * V * abs2, pV),
            "tau": c * _quad(grid, phi_vals * abs2),
        }
        rhs = {"f": _quad(grid, (phi_vals * f * np.conj(uu)).real)}
        return _finish(identity, lhs, rhs)

    if identity == "A1-2":
        lhs = {
            "absorption": s * _quad(grid, phi_vals * a * abs2),
            "grad_phi": _quad(grid, (phi.deriv * du * np.conj(uu)).imag),
        }
        rhs = {"f": _quad(grid, (phi_vals * f * np.conj(uu)).imag)}
        return _finish(identity, lhs, rhs)

    # multiplier identities
    d1, d2, lapP = Phi.dphi, Phi.d2phi, Phi.lap
    L = grid.rmax
    lhs = {"hessian": _quad(grid, d2 * np.abs(du) ** 2 + d1 * A * abs2 / r**3)}
    if identity in ("A1-3", "A1-13"):
        lhs["bilap"] = -0.25 * (_quad(grid, Phi.bilap * abs2, 3.0) + atom_integral(Phi.bilap_atoms, u))
    else:
        if paired:
            dist = _quad(grid, Phi.paired_lap * abs2, 3.0) + atom_integral(Phi.paired_atoms, u)
        else:
            dist = _quad(grid, (2.0 * phi.lap - Phi.bilap) * abs2, 3.0) - atom_integral(Phi.bilap_atoms, u)
        lhs["phi_grad"] = -_quad(grid, phi_vals * grad2)
        lhs["lap_weight"] = 0.25 * dist
    if identity in ("A1-3", "A1-4"):
        lhs["dV"] = -0.5 * _quad(grid, Vp * d1 * abs2, pV + 1.0)
    else:
        V1, dV1, V2 = _split_potentials(problem)
        lhs["dV1"] = -0.5 * _quad(grid, dV1 * d1 * abs2, pV + 1.0)
        lhs["V2_grad"] = 0.5 * _quad(grid, V2 * d1 * 2.0 * (np.conj(uu) * du).real, pV)
        lhs["V2_lap"] = 0.5 * _quad(grid, V2 * lapP * abs2, pV + 1.0)
    if identity in ("A1-4", "A1-14"):
        lhs["phi_V"] = -_quad(grid, phi_vals * V * abs2, pV)
        lhs["tau"] = -c * _quad(grid, phi_vals * abs2)
    lhs["boundary"] = -0.5 * d1[-1] * grid.omega * L ** (grid.d - 1) * abs(du[-1]) ** 2
    rhs = {
        "absorption": s * _quad(grid, (a * d1 * np.conj(du) * uu).imag),
        "f_mult": _quad(grid, (f * (d1 * np.conj(du) + 0.5 * lapP * np.conj(uu))).real, 1.0),
    }
    if identity in ("A1-4", "A1-14"):
        rhs["f_phi"] = -_quad(grid, (phi_vals * f * np.conj(uu)).real)
    return _finish(identity, lhs, rhs)
