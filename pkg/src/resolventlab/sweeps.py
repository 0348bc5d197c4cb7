"""Uniformity sweeps of resolvent estimates over a (tau, eps, R) lattice.

Every lattice point solves the resolvent equation for a seeded family of
right-hand sides (one factorization per point), evaluates the left-hand
terms of the selected estimate and divides each by the selected right-hand
norm squared.  Points whose solutions reach the outer boundary are dropped
before aggregation.
"""
import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .grids import (
    ModeFunction,
    RadialGrid,
    SingularWeightWarning,
    Weight,
    grad_density,
    integrate_radial,
    morrey_sup,
    norm_Xstar,
    sphere_sup,
)
from .helmholtz import LEAK_LIMIT, ResolventProblem, Sponge, solve_many

ESTIMATES = ("basic", "basic_attractive", "mayo10", "weighted_sinpeque", "juan10_kato", "juan14_kato")
FAMILIES = ("gaussian", "shell", "shell_bump", "zero")

# left-hand terms reported per estimate
TERMS = {
    "basic": ("grad", "tau_u", "cubic", "V_over_r", "ball_R3", "W_over_r"),
    "basic_attractive": ("grad", "sphere", "n_u", "cubic", "tau_u", "V_over_r", "W_over_r"),
    "mayo10": ("grad", "tau_u", "cubic_outside", "sphere"),
    "weighted_sinpeque": ("grad_weighted", "tau_weighted"),
    "juan10_kato": ("half_derivative",),
    "juan14_kato": ("sqrt_potential",),
}
USES_R = ("juan10_kato", "juan14_kato")


class ContaminatedSweepError(RuntimeError):
    """Every lattice point was dropped by the boundary-leak filter."""

    def __init__(self, message, histogram):
        super().__init__(message)
        self.histogram = histogram


@dataclass
class SweepConfig:
    """Resolved sweep configuration.

    ``potentials`` holds PotentialSpec objects; ``boundary`` is
    ``"dirichlet"`` or a Sponge.  ``rho`` sets ``X_rho`` for the attractive
    estimate and ``tau_0`` for ``mayo10``.
    """

    d: int
    n: int
    rmax: float
    potentials: tuple
    estimate: str
    tau_list: tuple
    epsilon_list: tuple
    family: str
    seed: int
    count: int
    ell: int = 0
    R_list: tuple = (1.0,)
    rho: float = 0.0
    alpha: float = 0.5
    gamma: float = 1.0
    sign: str = "plus"
    tau_sign: str = "minus"
    boundary: object = "dirichlet"
    leak_limit: float = LEAK_LIMIT

    def __post_init__(self):
        if self.estimate not in ESTIMATES:
            raise ValueError(f"unknown estimate {self.estimate!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown data family {self.family!r}")
        if self.estimate in ("basic_attractive", "mayo10") and not self.rho > 0:
            raise ValueError(f"{self.estimate} needs rho > 0")
        if any(not e > 0 for e in self.epsilon_list):
            raise ValueError("every epsilon must be positive")
        self.potentials = tuple(self.potentials)

    def grid(self):
        return RadialGrid.from_rmax(self.d, self.ell, self.n, self.rmax)

    def physical_nodes(self):
        """Nodes outside the absorbing layer; norms are taken there."""
        if isinstance(self.boundary, Sponge):
            return int(math.floor(self.n * (1.0 - self.boundary.width)))
        return self.n

    def as_dict(self):
        out = {}
        for k, v in asdict(self).items():
            out[k] = v
        out["potentials"] = [_spec_dict(p) for p in self.potentials]
        out["boundary"] = (
            {"sponge": {"width": self.boundary.width, "strength": self.boundary.strength}}
            if isinstance(self.boundary, Sponge) else "dirichlet"
        )
        for k in ("tau_list", "epsilon_list", "R_list"):
            out[k] = [float(x) for x in getattr(self, k)]
        return out

    def hash(self):
        return config_hash(self.as_dict())


def _spec_dict(p):
    params = {k: (float(v) if isinstance(v, (int, float)) else str(v)) for k, v in sorted(p.params.items())}
    return {"kind": p.kind, "params": params, "role": p.role}


def config_hash(obj):
    """SHA-256 of the canonical JSON form."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


# ------------------------------------------------------------- data


def data_family(grid, family, count, seed, rmax_data=None):
    """Seeded right-hand sides.

    ``gaussian``: random center, width and phase; ``shell``: indicator of a
    random dyadic shell; ``shell_bump``: smooth bump centred in a dyadic
    shell; ``zero``: identically zero.  Support stays below ``rmax_data``.
    """
    rng = np.random.default_rng(seed)
    r = grid.r
    top = grid.rmax if rmax_data is None else rmax_data
    jmin = max(-2, math.floor(math.log2(4 * grid.h)))
    jmax = max(jmin, math.floor(math.log2(top)) - 2)
    out = []
    for _ in range(count):
        phase = np.exp(2j * np.pi * rng.uniform())
        if family == "zero":
            vals = np.zeros(grid.n)
        elif family == "gaussian":
            c = rng.uniform(0.0, 0.25 * top)
            w = rng.uniform(0.5, 2.0)
            vals = np.exp(-((r - c) / w) ** 2)
        elif family == "shell":
            j = int(rng.integers(jmin, jmax + 1))
            vals = ((r > 2.0**j) & (r <= 2.0 ** (j + 1))).astype(float)
        elif family == "shell_bump":
            j = int(rng.integers(jmin, jmax + 1))
            vals = np.exp(-((r - 1.5 * 2.0**j) / (0.25 * 2.0**j)) ** 2)
        else:
            raise ValueError(f"unknown data family {family!r}")
        out.append(ModeFunction(grid, phase * vals))
    return out


# ------------------------------------------------------------- terms


def _restrict(u, m):
    """View of ``u`` on the first ``m`` nodes as a function on a shorter grid."""
    g = u.grid
    if m == g.n:
        return u
    sub = RadialGrid(g.d, g.ell, m, g.h)
    return ModeFunction(sub, u.values[:m], None if u.deriv is None else u.deriv[:m])


def _potential_sum(specs, r, roles=None):
    V = np.zeros_like(r)
    for p in specs:
        if roles is None or p.role in roles:
            V = V + p.value(r)
    return V


def _W(specs, r, gamma):
    """Smallest admissible ``W``: the positive part of ``gamma V + r V'``."""
    out = np.zeros_like(r)
    for p in specs:
        if p.role == "V_repulsive":
            out = out + gamma * p.value(r) + r * p.derivative(r)
    return np.maximum(out, 0.0)


def lhs_terms(cfg, u, tau, R=None, aux=None):
    """Left-hand terms of the selected estimate for one solution ``u``.

    Origin-singular weights such as ``V/r`` are summed from the first node;
    the solutions vanish there at the rate set by the potential, so the
    singular-weight warning is silenced.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularWeightWarning)
        return _lhs_terms(cfg, u, tau, R, aux)


def _lhs_terms(cfg, u, tau, R, aux):
    g = u.grid
    r = g.r
    d = g.d
    est = cfg.estimate
    grad = grad_density(u)
    rho = cfg.rho
    V = _potential_sum(cfg.potentials, r, ("V_repulsive", "V1_long_range", "V2_long_range"))
    pV = max((p.origin_power for p in cfg.potentials), default=0.0)
    out = {}
    if est in ("basic", "basic_attractive"):
        out["grad"] = morrey_sup(g, rho, 1.0, density=grad)
        tau_eff = max(0.0, tau) if est == "basic" else tau
        out["tau_u"] = tau_eff * morrey_sup(u, rho, 1.0)
        out["cubic"] = (d - 3) * integrate_radial(u, Weight.inverse_power(3)) if d > 3 else 0.0
        out["V_over_r"] = integrate_radial(u, Weight.sampled(V / r, pV + 1.0))
        out["W_over_r"] = (integrate_radial(u, Weight.sampled(_W(cfg.potentials, r, cfg.gamma) / r, pV + 1.0))
                           if d == 3 else 0.0)
        if est == "basic":
            out["ball_R3"] = morrey_sup(u, 0.0, 3.0)
        else:
            n_abs = np.abs(_potential_sum(cfg.potentials, r, ("n_attractive",)))
            out["sphere"] = sphere_sup(u, rho, 2.0)
            out["n_u"] = morrey_sup(u, rho, 1.0, weight=Weight.sampled(n_abs))
    elif est == "mayo10":
        out["grad"] = morrey_sup(g, rho, 1.0, density=grad)
        out["tau_u"] = tau * morrey_sup(u, rho, 1.0)
        out["cubic_outside"] = ((d - 3) * integrate_radial(u, Weight.sampled((r > rho) / r**3)) if d > 3 else 0.0)
        out["sphere"] = sphere_sup(u, rho, 2.0)
    elif est == "weighted_sinpeque":
        w = Weight.japanese(cfg.alpha, sign=-1)
        out["grad_weighted"] = integrate_radial(g, w, density=grad)
        out["tau_weighted"] = tau * integrate_radial(u, w)
    elif est == "juan10_kato":
        du = aux["half"](u)
        out["half_derivative"] = integrate_radial(du, Weight.ball(R))
    elif est == "juan14_kato":
        out["sqrt_potential"] = integrate_radial(u, aux["sqrtV_ball"](R))
    return out


def rhs_norm2(cfg, f, R=None, aux=None):
    est = cfg.estimate
    if est == "basic":
        return norm_Xstar(f, 0.0) ** 2
    if est in ("basic_attractive", "mayo10"):
        return norm_Xstar(f, cfg.rho) ** 2
    if est == "weighted_sinpeque":
        return integrate_radial(f, Weight.japanese(cfg.alpha, sign=+1))
    # Kato forms: f = A* g and the ratio is ||A R A* g||^2 / ||g||^2
    return integrate_radial(aux["g"])


def _ratio(num, den):
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


# ------------------------------------------------------------- sweep


@dataclass
class SweepReport:
    config: dict
    config_hash: str
    seed: int
    rows: list
    per_datum: list
    aggregates: dict
    dropped: int
    leak_histogram: dict
    meta: dict = field(default_factory=dict)

    COLUMNS = ("tau", "epsilon", "R", "estimate", "lhs_term", "ratio", "leak")

    def csv_body(self):
        """Report body with 17-significant-digit floats."""
        lines = [",".join(self.COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in self.COLUMNS))
        return "\n".join(lines) + "\n"

    def json_body(self):
        return json.dumps({"config_hash": self.config_hash, "seed": self.seed, "rows": self.rows,
                           "aggregates": self.aggregates, "dropped": self.dropped},
                          sort_keys=True, indent=1, default=_json_default)


def _fmt(v):
    if isinstance(v, str):
        return v
    return f"{float(v):.16e}"


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v))


def _aux_for(cfg, grid):
    aux = {}
    if cfg.estimate == "juan10_kato":
        from .evolution import diagonalize, half_derivative

        free = diagonalize(grid)
        aux["half"] = lambda u: half_derivative(u, free)
    if cfg.estimate == "juan14_kato":
        specs = cfg.potentials
        aux["sqrtV_ball"] = lambda R: Weight(
            lambda r: np.sqrt(np.maximum(_potential_sum(specs, r), 0.0)) * (r <= R) / R,
            0.5 * max((p.origin_power for p in specs), default=0.0), f"sqrtV_ball_{R:g}")
    return aux


def _kato_rhs(cfg, g_data, R, aux, grid):
    """``f = A* g`` for the Kato forms."""
    r = grid.r
    if cfg.estimate == "juan14_kato":
        w = aux["sqrtV_ball"](R)(grid)
        return [ModeFunction(grid, np.sqrt(w) * g.values) for g in g_data]
    w = (r <= R) / R
    return [aux["half"](ModeFunction(grid, np.sqrt(w) * g.values)) for g in g_data]


def _solve_point(cfg, grid, data, tau, eps, aux):
    problem = ResolventProblem(grid, cfg.potentials, eps, tau, data[0], sign=cfg.sign,
                               tau_sign=cfg.tau_sign, boundary=cfg.boundary)
    m = cfg.physical_nodes()
    R_values = cfg.R_list if cfg.estimate in USES_R else (cfg.rho,)
    results = []
    for R in R_values:
        if cfg.estimate in USES_R:
            rhs = _kato_rhs(cfg, data, R, aux, grid)
        else:
            rhs = data
        sols = solve_many(problem, rhs)
        for k, (f, sol) in enumerate(zip(rhs, sols)):
            u = _restrict(sol.u, m)
            lhs = lhs_terms(cfg, u, tau, R, aux)
            a = dict(aux)
            a["g"] = _restrict(data[k], m)
            den = rhs_norm2(cfg, _restrict(f, m), R, a)
            results.append({
                "R": float(R), "datum": k, "leak": sol.boundary_leak,
                "ratios": {t: _ratio(v, den) for t, v in lhs.items()},
            })
    return results


def _slope(x, y):
    if len(x) < 2:
        return 0.0
    X = np.log10(np.asarray(x))
    Y = np.log10(np.asarray(y))
    Xc = X - X.mean()
    den = float(Xc @ Xc)
    return float(Xc @ (Y - Y.mean()) / den) if den > 0 else 0.0


def _decade_stats(eps, vals):
    """Max/min of the per-decade maxima and the log-log slope."""
    pos = [(e, v) for e, v in zip(eps, vals) if v > 0 and math.isfinite(v)]
    if not pos:
        return 1.0, 0.0
    decades = {}
    for e, v in pos:
        k = math.floor(math.log10(e) + 1e-9)
        decades[k] = max(decades.get(k, 0.0), v)
    dv = list(decades.values())
    return max(dv) / min(dv), _slope([e for e, _ in pos], [v for _, v in pos])


def aggregate(rows, terms):
    """Uniformity statistics per left-hand term.

    For each ``(tau, R)`` the ratios are profiled in ``eps``.  The envelope
    ``C(eps) = max_tau ratio`` is the empirical constant of the estimate at
    that ``eps``; it is profiled the same way.  Each profile reports the
    ratio of its largest to smallest decade maximum and the least-squares
    slope of ``log10 ratio`` against ``log10 eps``.
    """
    out = {}
    for term in terms:
        sel = [r for r in rows if r["lhs_term"] == term]
        groups = {}
        for tau, R in sorted({(r["tau"], r["R"]) for r in sel}):
            pts = sorted((r["epsilon"], r["ratio"]) for r in sel if r["tau"] == tau and r["R"] == R)
            eps = [p[0] for p in pts]
            rat = [p[1] for p in pts]
            mom, slope = _decade_stats(eps, rat)
            groups[f"tau={tau!r},R={R!r}"] = {"sup": max(rat), "max_over_min": mom, "slope": slope,
                                              "epsilons": eps, "ratios": rat}
        envelopes = {}
        for R in sorted({r["R"] for r in sel}):
            eps = sorted({r["epsilon"] for r in sel if r["R"] == R})
            env = [max(r["ratio"] for r in sel if r["R"] == R and r["epsilon"] == e) for e in eps]
            mom, slope = _decade_stats(eps, env)
            envelopes[f"R={R!r}"] = {"max_over_min": mom, "slope": slope, "epsilons": eps, "ratios": env}
        out[term] = {
            "sup": max((g["sup"] for g in groups.values()), default=0.0),
            "max_over_min": max((e["max_over_min"] for e in envelopes.values()), default=1.0),
            "abs_slope": max((abs(e["slope"]) for e in envelopes.values()), default=0.0),
            "per_tau_max_over_min": max((g["max_over_min"] for g in groups.values()), default=1.0),
            "per_tau_abs_slope": max((abs(g["slope"]) for g in groups.values()), default=0.0),
            "envelopes": envelopes,
            "groups": groups,
        }
    return out


def supersmooth_sweep(cfg, threads=1, data=None):
    """Run the sweep described by ``cfg``; see :class:`SweepConfig`.

    The ratio stored per lattice point is the largest over the data that
    passed the leak filter.  ``data`` overrides the seeded family.
    """
    grid = cfg.grid()
    m = cfg.physical_nodes()
    if data is None:
        data = data_family(grid, cfg.family, cfg.count, cfg.seed, rmax_data=0.5 * m * grid.h)
    aux = _aux_for(cfg, grid)
    lattice = [(tau, eps) for tau in cfg.tau_list for eps in cfg.epsilon_list]

    def work(pt):
        return _solve_point(cfg, grid, data, pt[0], pt[1], aux)

    # warning filters are process-wide, so silence them around the pool
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularWeightWarning)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(work, lattice))
        else:
            results = [work(pt) for pt in lattice]

    terms = TERMS[cfg.estimate]
    rows, per_datum, leaks = [], [], []
    dropped = 0
    for (tau, eps), res in zip(lattice, results):
        Rs = sorted({x["R"] for x in res})
        for R in Rs:
            entries = [x for x in res if x["R"] == R]
            leaks.extend(x["leak"] for x in entries)
            ok = [x for x in entries if x["leak"] <= cfg.leak_limit]
            for x in entries:
                per_datum.append({"tau": tau, "epsilon": eps, "R": R, "datum": x["datum"], "leak": x["leak"],
                                  "kept": x["leak"] <= cfg.leak_limit, **{f"ratio_{t}": x["ratios"][t] for t in terms}})
            if not ok:
                dropped += 1
                continue
            leak = max(x["leak"] for x in ok)
            for t in terms:
                rows.append({"tau": float(tau), "epsilon": float(eps), "R": float(R), "estimate": cfg.estimate,
                             "lhs_term": t, "ratio": max(x["ratios"][t] for x in ok), "leak": leak})
    hist = _leak_histogram(leaks)
    if not rows:
        raise ContaminatedSweepError(
            f"all {dropped} lattice points exceed boundary leak {cfg.leak_limit:g}; enlarge r_max or add a sponge",
            hist)
    return SweepReport(cfg.as_dict(), cfg.hash(), cfg.seed, rows, per_datum, aggregate(rows, terms), dropped, hist)


def _leak_histogram(leaks):
    if not leaks:
        return {}
    edges = [0.0, 1e-12, 1e-9, 1e-6, 1e-3, 1e-1, math.inf]
    counts, _ = np.histogram(np.asarray(leaks), bins=edges)
    return {f"[{edges[i]:g},{edges[i + 1]:g})": int(c) for i, c in enumerate(counts)}
