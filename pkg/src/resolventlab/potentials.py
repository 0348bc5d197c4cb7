"""Radial potential library and checkers for the repulsive, attractive and
long-range hypotheses.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, interpolate

from .grids import fd_derivative, j0_for, shell_index_range

KINDS = (
    "zero",
    "inverse_power",
    "smooth_inverse_power",
    "offset_inverse_power",
    "exp_well",
    "neumann_table",
    "manufactured",
)
ROLES = ("V_repulsive", "n_attractive", "V1_long_range", "V2_long_range")


class ProfileError(ValueError):
    pass


class CheckerError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialSpec:
    """Parametric radial potential.

    Parameters
    ----------
    kind : str
        One of ``KINDS``.  Parameters per kind:

        * ``inverse_power``: ``c / r^gamma_pow``
        * ``smooth_inverse_power``: ``c / (1 + r^2)^(alpha_pow/2)``
        * ``offset_inverse_power``: ``c / (1 + r)^p``
        * ``exp_well``: with ``G(r) = b (1+r)^(1-gamma_g) / (gamma_g - 1)``,
          form ``decay`` gives ``mu (e^{-G} - 1)`` and form ``growth`` gives
          ``mu (1 - e^{G})``; ``shift`` is added to either
        * ``neumann_table``: cubic spline through ``r``, ``v`` samples
        * ``manufactured``: callables ``profile`` and ``derivative``
    params : dict
    role : str
    angular_sup : float, optional
        Upper bound for a bounded angular factor; multiplies the profile in
        the checkers only.
    """

    kind: str
    params: dict = field(default_factory=dict)
    role: str = "V_repulsive"
    angular_sup: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProfileError(f"unknown potential kind {self.kind!r}")
        if self.role not in ROLES:
            raise ProfileError(f"unknown role {self.role!r}")
        p = self.params
        if self.kind == "inverse_power" and not p.get("gamma_pow", 0) > 0:
            raise ProfileError("inverse_power needs gamma_pow > 0")
        if self.kind == "exp_well":
            if not p.get("gamma_g", 0) > 1:
                raise ProfileError("exp_well needs gamma_g > 1")
            if p.get("form", "decay") not in ("decay", "growth"):
                raise ProfileError("exp_well form must be 'decay' or 'growth'")
        if self.kind == "manufactured" and not (callable(p.get("profile")) and callable(p.get("derivative"))):
            raise ProfileError("manufactured kind needs callable 'profile' and 'derivative'")
        if self.kind == "neumann_table":
            r = np.asarray(p["r"], dtype=float)
            v = np.asarray(p["v"], dtype=float)
            if r.ndim != 1 or r.shape != v.shape or np.any(np.diff(r) <= 0):
                raise ProfileError("table needs strictly increasing r and matching v")
            object.__setattr__(self, "_spline", interpolate.CubicSpline(r, v, extrapolate=True))

    # ---------------------------------------------------------------- values

    @property
    def scale(self):
        return 1.0 if self.angular_sup is None else float(self.angular_sup)

    @property
    def origin_power(self):
        """Exponent ``p`` with ``|V| <~ r^{-p}`` as ``r -> 0``."""
        if self.kind == "inverse_power":
            return float(self.params["gamma_pow"])
        if self.kind == "manufactured":
            return float(self.params.get("origin_power", 0.0))
        return 0.0

    @property
    def decay_power(self):
        """Exponent ``q`` with ``|V - V(inf)| <~ r^{-q}`` at infinity (``inf`` if faster)."""
        p = self.params
        if self.kind == "zero":
            return math.inf
        if self.kind == "inverse_power":
            return float(p["gamma_pow"])
        if self.kind == "smooth_inverse_power":
            return float(p["alpha_pow"])
        if self.kind == "offset_inverse_power":
            return float(p["p"])
        if self.kind == "exp_well":
            return float(p["gamma_g"]) - 1.0
        return float(p.get("decay_power", math.inf))

    def _G(self, r):
        p = self.params
        gg = float(p["gamma_g"])
        return float(p["b"]) * (1.0 + r) ** (1.0 - gg) / (gg - 1.0)

    def _raw(self, r):
        p = self.params
        k = self.kind
        if k == "zero":
            return np.zeros_like(r)
        if k == "inverse_power":
            return p["c"] / r ** p["gamma_pow"]
        if k == "smooth_inverse_power":
            return p["c"] / (1.0 + r * r) ** (0.5 * p["alpha_pow"])
        if k == "offset_inverse_power":
            return p["c"] / (1.0 + r) ** p["p"]
        if k == "exp_well":
            mu = float(p["mu"])
            G = self._G(r)
            base = mu * (np.exp(-G) - 1.0) if p.get("form", "decay") == "decay" else mu * (1.0 - np.exp(G))
            return base + float(p.get("shift", 0.0))
        if k == "neumann_table":
            return self._spline(r)
        return p["profile"](r)

    def _raw_deriv(self, r):
        p = self.params
        k = self.kind
        if k == "zero":
            return np.zeros_like(r)
        if k == "inverse_power":
            g = p["gamma_pow"]
            return -g * p["c"] / r ** (g + 1.0)
        if k == "smooth_inverse_power":
            a = p["alpha_pow"]
            return -a * p["c"] * r * (1.0 + r * r) ** (-0.5 * a - 1.0)
        if k == "offset_inverse_power":
            q = p["p"]
            return -q * p["c"] / (1.0 + r) ** (q + 1.0)
        if k == "exp_well":
            mu = float(p["mu"])
            G = self._G(r)
            Gp = -float(p["b"]) / (1.0 + r) ** float(p["gamma_g"])
            if p.get("form", "decay") == "decay":
                return -mu * np.exp(-G) * Gp
            return -mu * np.exp(G) * Gp
        if k == "neumann_table":
            return self._spline(r, 1)
        return p["derivative"](r)

    def value(self, r):
        """``V(r)`` at positive radii."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("potential evaluated at r <= 0")
        with np.errstate(all="ignore"):
            v = self.scale * self._raw(r)
        if not np.all(np.isfinite(v)):
            raise ProfileError(f"non-finite value of {self.kind} potential")
        return v

    def derivative(self, r):
        """Radial derivative ``dV/dr``, closed form for every built-in kind."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("potential evaluated at r <= 0")
        with np.errstate(all="ignore"):
            dv = self.scale * self._raw_deriv(r)
        if not np.all(np.isfinite(dv)):
            raise ProfileError(f"non-finite derivative of {self.kind} potential")
        return dv

    def fd_derivative(self, grid):
        """Fourth-order difference derivative on ``grid`` (for cross-checks)."""
        return fd_derivative(self.value(grid.r), grid.h)

    def __call__(self, r):
        return self.value(r)


def eval_potential(spec, r):
    """``V(r)``; ``r`` must be positive."""
    if np.any(np.asarray(r) <= 0):
        raise ValueError("r must be positive")
    return spec.value(r)


def zero_resonance_potential(d, lam):
    """``V = Delta u / u`` for ``u = (1 + r^2)^lam``, with its derivative."""

    def V(r):
        s = 1.0 + r * r
        return 2.0 * lam * (d * s + 2.0 * (lam - 1.0) * r * r) / s**2

    def dV(r):
        s = 1.0 + r * r
        num = d * s + 2.0 * (lam - 1.0) * r * r
        dnum = 2.0 * d * r + 4.0 * (lam - 1.0) * r
        return 2.0 * lam * (dnum * s - 4.0 * r * num) / s**3

    return PotentialSpec("manufactured", {"profile": V, "derivative": dV, "decay_power": 2.0})


# ---------------------------------------------------------------- repulsive


@dataclass
class RepulsivityReport:
    d: int
    gamma: float
    nonnegative: bool
    negative_node: Optional[int]
    lhs: np.ndarray = field(repr=False)
    eta: Optional[float] = None
    envelope: Optional[np.ndarray] = field(default=None, repr=False)
    moment: Optional[float] = None
    tail_bound: float = 0.0
    chi: int = 0
    passed: bool = False


def check_repulsive(spec, d, gamma, grid):
    """Check ``V >= 0`` and the radial-derivative condition.

    For ``d > 3`` the largest ``eta`` with
    ``gamma V + r V' <= (1 - eta)(d-1)(d-3)/(2 r^2)`` at every node is
    reported (capped at 1).  For ``d = 3`` the envelope
    ``W = max(0, gamma V + r V')`` and ``int_0^inf t W dt`` are reported,
    the part beyond ``r_max`` bounded from the declared decay.
    """
    if d < 3:
        raise CheckerError("repulsivity conditions need d >= 3")
    r = grid.r
    V = spec.value(r)
    dV = spec.derivative(r)
    lhs = gamma * V + r * dV
    neg = np.nonzero(V < 0)[0]
    rep = RepulsivityReport(d=d, gamma=gamma, nonnegative=neg.size == 0,
                            negative_node=int(neg[0]) if neg.size else None, lhs=lhs,
                            chi=1 if d == 3 else 0)
    if d > 3:
        rhs = (d - 1) * (d - 3) / (2.0 * r * r)
        rep.eta = float(min(1.0, np.min(1.0 - lhs / rhs)))
        rep.passed = rep.nonnegative and rep.eta > 0
    else:
        W = np.maximum(0.0, lhs)
        h = grid.h
        F = r * W
        # trapezoid from the origin, taking r W -> 0 there
        body = float(h * (np.sum(F) - 0.5 * F[-1]))
        q = spec.decay_power  # W ~ r^{-q} when V ~ r^{-q}
        tail = 0.0
        if W[-1] > 0:
            if not q > 2.0:
                tail = math.inf
            else:
                tail = grid.rmax**2 * W[-1] / (q - 2.0)
        rep.envelope = W
        rep.tail_bound = tail
        rep.moment = body + tail
        rep.passed = rep.nonnegative and rep.moment < 0.5
    if not rep.nonnegative:
        rep.passed = False
    return rep


# ---------------------------------------------------------------- attractive


@dataclass
class AttractionReport:
    rho: float
    j0: int
    shell_sups: dict
    ball_term: float
    beta: float
    threshold: float
    passed: bool
    truncated: bool = False
    tail_bound: float = 0.0


class SignViolation(CheckerError):
    pass


def _log_ratio(n, r):
    v = n.value(r)
    if np.any(v >= 0):
        idx = int(np.nonzero(v >= 0)[0][0])
        raise SignViolation(f"n >= 0 at r = {float(np.atleast_1d(r)[idx]):.6g}")
    return n.derivative(r) / np.abs(v)


def compute_beta_rho(n, rho, grid, d=4, moment_W=0.0, refine=1):
    """Smallness index of the radial variation of an attractive potential.

    Parameters
    ----------
    n : PotentialSpec
        Negative on the grid.
    rho : float
        Radius in ``(0, r_max)``.
    grid : RadialGrid
    d : int
        Dimension; selects the threshold ``1/4`` (``d > 3``) or
        ``1/2 - moment_W`` (``d = 3``).
    moment_W : float
        ``int t W dt`` of the repulsive part (0 when there is none).
    refine : int
        Oversampling factor inside each shell.
    """
    if not 0 < rho < grid.rmax:
        raise ValueError("rho must lie in (0, r_max)")
    r = np.arange(1, grid.n * refine + 1) * (grid.h / refine)
    ratio = _log_ratio(n, r)
    j0 = j0_for(rho)
    _, jhi = shell_index_range(grid)
    sups = {}
    for j in range(j0, jhi + 1):
        mask = (r > 2.0**j) & (r <= 2.0 ** (j + 1))
        if mask.any():
            sups[j] = max(0.0, float(np.max(ratio[mask])))
    ball = r <= rho
    ball_sup = max(0.0, float(np.max(ratio[ball]))) if ball.any() else 0.0
    ball_term = rho * ball_sup
    beta = float(sum(2.0 ** (j + 1) * s for j, s in sups.items()) + ball_term)
    truncated = 2.0 ** (jhi + 1) > grid.rmax
    tail = 0.0
    q = n.decay_power
    last = ratio[-1]
    if last > 0:
        # ratio ~ r^{-(q+1)}: shells beyond r_max add a geometric tail
        if q > 0:
            tail = 2.0 * grid.rmax * last / (1.0 - 2.0**-q)
        else:
            tail = math.inf
        warnings.warn(f"beta_rho truncated at r_max; tail bound {tail:.3e}", stacklevel=2)
    thr = 0.25 if d > 3 else 0.5 - moment_W
    return AttractionReport(rho=rho, j0=j0, shell_sups=sups, ball_term=ball_term,
                            beta=beta, threshold=thr, passed=beta + tail < thr,
                            truncated=truncated, tail_bound=tail)


def check_sobolev_split(n1_bound, n2, d, grid):
    """Hardy-sufficient constant ``c1 = kappa (2/(d-2))^2`` for ``|n2| <= kappa/r^2``.

    This is a sufficient condition only; ``n1_bound`` is recorded but plays no
    role in the Hardy test.
    """
    if d < 3:
        raise CheckerError("Hardy criterion needs d >= 3")
    if n2 is None or n2.kind == "zero":
        return 0.0, True
    r = grid.r
    prod = r * r * np.abs(n2.value(r))
    # unbounded r^2 |n2| at either end means no finite kappa
    probe_lo = np.array([grid.h / 64.0, grid.h / 8.0, grid.h])
    lo = probe_lo**2 * np.abs(n2.value(probe_lo))
    if lo[0] > 1.5 * lo[2] + 1e-300 or (n2.decay_power < 2.0 and prod[-1] > 0.5 * prod.max()):
        raise CheckerError("n2 is not dominated by kappa/r^2 on the grid")
    kappa = float(np.max(np.concatenate((prod, lo))))
    c1 = kappa * (2.0 / (d - 2)) ** 2
    return c1, c1 < 1.0


# ---------------------------------------------------------------- long range


@dataclass
class LongRangeReport:
    gamma: float
    a_values: dict
    a: float
    argmax: dict
    failing: Optional[str] = None
    B_values: dict = field(default_factory=dict)
    d2_admissible: dict = field(default_factory=dict)


def compute_B_tau0(a, d, gamma, tau0):
    """Threshold ``B(tau0)`` for the long-range weighted estimate.

    ``16 a (d^2-1) (1 + F max{1, 1/tau0 - 1}) + a (2a+1)`` with
    ``F = 2^gamma / (2^gamma - 1)``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if tau0 <= 0 or a < 0 or d < 2:
        raise ValueError("need a >= 0, d >= 2, tau0 > 0")
    F = 2.0**gamma / (2.0**gamma - 1.0)
    return 16.0 * a * (d * d - 1) * (1.0 + F * max(1.0, 1.0 / tau0 - 1.0)) + a * (2.0 * a + 1.0)


def check_long_range(V1, V2, gamma, grid, d=3, tau0_list=(1.0,)):
    """Smallest ``a`` with ``|V1| <= a/(1+r)^gamma``, ``|V2| <= a/(1+r)^{gamma+1}``
    and ``V1' <= a/(1+r)^{gamma+1}`` on the grid.
    """
    r = grid.r
    zero = PotentialSpec("zero")
    V1 = V1 or zero
    V2 = V2 or zero

    def ratios(rr):
        return {
            "c1": np.abs(V1.value(rr)) * (1.0 + rr) ** gamma,
            "c2": np.abs(V2.value(rr)) * (1.0 + rr) ** (gamma + 1.0),
            "c3": np.maximum(0.0, V1.derivative(rr)) * (1.0 + rr) ** (gamma + 1.0),
        }

    on_grid = ratios(r)
    probes = ratios(grid.h * 2.0 ** -np.arange(1, 11, dtype=float))
    a_vals, argmax = {}, {}
    failing = None
    for key, vals in on_grid.items():
        i = int(np.argmax(vals))
        a_vals[key] = float(vals[i])
        argmax[key] = float(r[i])
        pv = probes[key]
        if pv[-1] > 2.0 * max(vals[0], 1e-300) and pv[-1] > pv[0]:
            a_vals[key] = math.inf
            argmax[key] = 0.0
            failing = failing or key
    a = max(a_vals.values())
    rep = LongRangeReport(gamma=gamma, a_values=a_vals, a=a, argmax=argmax, failing=failing)
    if math.isfinite(a):
        for t0 in tau0_list:
            B = compute_B_tau0(a, d, gamma, t0)
            rep.B_values[t0] = B
            rep.d2_admissible[t0] = (1.0 / (2.0 * B * t0 * t0) < 1.0) if B > 0 else False
    return rep


def exp_well_bound(mu, b, gamma_g):
    """``mu (1 - e^{-int_0^inf g'})`` with ``g' = b/(1+r)^gamma_g`` by quadrature."""
    total, _ = integrate.quad(lambda t: b / (1.0 + t) ** gamma_g, 0.0, np.inf)
    return mu * (1.0 - math.exp(-total))
