"""Config-driven experiment runner.

``resolventlab <subcommand> --config FILE [--out DIR] [--threads N] [--seed S]``

Every report starts with ``#`` header lines (config hash, resolved config,
timestamp); the body after them depends only on the config and seed.
Exit status: 0 when every check passes, 2 when a check fails, 1 on usage or
configuration errors.
"""
import argparse
import datetime
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import config as C
from .evolution import GuardError, diagonalize, smoothing_functional
from .grids import ModeFunction, RadialGrid, Weight
from .helmholtz import ResolventProblem, continuous_operator, solve_resolvent
from .identities import IDS, TestWeight, check_identity
from .multipliers import (
    HypothesisError,
    a2_interval_family,
    appendix2_construct,
    bilaplacian_residual,
    check_A2,
    morawetz_profile,
    piecewise_profile,
    psi_weight,
)
from .potentials import CheckerError, check_long_range, check_repulsive, compute_beta_rho
from .sweeps import TERMS, ContaminatedSweepError, SweepConfig, config_hash, supersmooth_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2

SUBCOMMANDS = ("check-potential", "multiplier", "solve", "verify-identities", "sweep", "evolve", "spectrum")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------- reports


class Report:
    """Table plus summary for one subcommand.

    ``body`` overrides the CSV table when the producer formats its own.
    """

    def __init__(self, name, columns, rows, passed=True, summary=None, body=None, json_rows=None):
        self.name = name
        self.columns = tuple(columns)
        self.rows = rows
        self.passed = passed
        self.summary = summary or {}
        self.body = body
        self.json_rows = json_rows


def fmt(v):
    """Full-precision scalar formatting for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return x if math.isfinite(x) else repr(x)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def csv_table(columns, rows):
    lines = [",".join(columns)]
    lines.extend(",".join(fmt(row[c]) for c in columns) for row in rows)
    return "\n".join(lines) + "\n"


def write_report(report, out_dir, fmt_name, cfg, chash):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    cfg_text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    summary = _jsonable(dict(report.summary, passed=report.passed))
    if fmt_name == "json":
        doc = {
            "header": {"config_hash": chash, "config": cfg, "timestamp": stamp},
            "body": {"columns": list(report.columns),
                     "rows": _jsonable(report.json_rows if report.json_rows is not None else report.rows),
                     "summary": summary},
        }
        path = out / f"{report.name}.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n")
        return [path]
    header = f"# config_hash: {chash}\n# config: {cfg_text}\n# timestamp: {stamp}\n"
    body = report.body if report.body is not None else csv_table(report.columns, report.rows)
    path = out / f"{report.name}.csv"
    path.write_text(header + body)
    spath = out / f"{report.name}_summary.json"
    spath.write_text(json.dumps({"config_hash": chash, "summary": summary}, sort_keys=True, indent=1,
                                default=str) + "\n")
    return [path, spath]


def report_body(path):
    """Report text without its ``#`` header lines."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return json.dumps(json.loads(text)["body"], sort_keys=True)
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


# ------------------------------------------------------------- shared builders


def _need(cfg, block, key=None):
    if block not in cfg:
        raise C.ConfigError(f"{block}: missing required block")
    if key is not None and key not in cfg[block]:
        raise C.ConfigError(f"{block}.{key}: missing required key")
    return cfg[block] if key is None else cfg[block][key]


def build_grid(cfg):
    g = _need(cfg, "grid")
    return RadialGrid.from_rmax(cfg["dimension"], C.grid_mode(cfg), g["n"], g["rmax"])


def _boundary(cfg, block):
    return C.parse_boundary(f"{block}.boundary", cfg.get(block, {}).get("boundary", "dirichlet"))


def manufactured_mode(grid):
    """``u* = r^{l+1} e^{-r^2}`` with ``u*'`` and ``u*''``."""
    r = grid.r
    m = grid.ell + 1
    e = np.exp(-r * r)
    u = r**m * e
    du = (m * r ** (m - 1) - 2.0 * r ** (m + 1)) * e
    d2u = (m * (m - 1) * r ** (m - 2) - 2.0 * (2 * m + 1) * r**m + 4.0 * r ** (m + 2)) * e
    return u, du, d2u


def build_rhs(cfg, grid):
    block = _need(cfg, "rhs")
    kind = block["kind"]
    r = grid.r
    if kind == "gaussian":
        for k in ("center", "width"):
            _need(cfg, "rhs", k)
        return ModeFunction(grid, np.exp(-((r - block["center"]) / block["width"]) ** 2))
    if kind == "shell":
        j = _need(cfg, "rhs", "j")
        return ModeFunction(grid, ((r > 2.0**j) & (r <= 2.0 ** (j + 1))).astype(float))
    if kind == "custom_file":
        path = _need(cfg, "rhs", "path")
        try:
            tab = np.loadtxt(path, ndmin=2)
        except OSError as exc:
            raise C.ConfigError(f"rhs.path: cannot read {path}: {exc}") from None
        if tab.shape[1] != 3:
            raise C.ConfigError("rhs.path: expected three columns 'r re im'")
        order = np.argsort(tab[:, 0])
        t = tab[order]
        vals = np.interp(r, t[:, 0], t[:, 1], left=0.0, right=0.0) + 1j * np.interp(
            r, t[:, 0], t[:, 2], left=0.0, right=0.0)
        return ModeFunction(grid, vals)
    if kind == "manufactured":
        return None
    raise C.ConfigError(f"rhs.kind: unsupported kind {kind!r}")


def build_problem(cfg, grid, potentials):
    pb = _need(cfg, "problem")
    rhs = build_rhs(cfg, grid)
    probe = ModeFunction(grid, np.zeros(grid.n)) if rhs is None else rhs
    problem = ResolventProblem(grid, potentials, pb["epsilon"], pb["tau"], probe,
                               sign=pb.get("sign", "plus"), tau_sign=pb.get("tau_sign", "minus"),
                               boundary=_boundary(cfg, "problem"))
    if rhs is None:
        u, du, d2u = manufactured_mode(grid)
        f = continuous_operator(problem, grid.r, u, du, d2u)
        problem = problem.replace(rhs=ModeFunction(grid, f))
    return problem


def _row(check, value, bound, passed, **extra):
    return dict({"check": check, "value": float(value), "bound": float(bound), "passed": bool(passed)}, **extra)


# ------------------------------------------------------------- subcommands


class _Combined:
    """Sum of several potentials seen through the checker interface."""

    def __init__(self, specs):
        self.specs = specs
        self.decay_power = min((p.decay_power for p in specs), default=math.inf)
        self.origin_power = max((p.origin_power for p in specs), default=0.0)

    def value(self, r):
        return sum((p.value(r) for p in self.specs), np.zeros_like(np.asarray(r, dtype=float)))

    def derivative(self, r):
        return sum((p.derivative(r) for p in self.specs), np.zeros_like(np.asarray(r, dtype=float)))


def cmd_check_potential(cfg, args):
    grid = build_grid(cfg)
    d = cfg["dimension"]
    specs = C.build_potentials(cfg)
    checks = cfg.get("checks", {})
    rows = []
    for i, p in enumerate(specs):
        vals = p.value(grid.r)
        rows.append(_row(f"finite[{i}:{p.kind}]", float(np.max(np.abs(vals))), math.inf,
                         bool(np.all(np.isfinite(vals)))))
    rep = [p for p in specs if p.role == "V_repulsive"]
    moment_W = 0.0
    if rep:
        V = _Combined(rep)
        neg = V.value(grid.r)
        rows.append(_row("V_nonnegative", float(np.min(neg)), 0.0, bool(np.all(neg >= 0))))
        if d >= 3:
            if "gamma" not in checks:
                raise C.ConfigError("checks.gamma: required to check a repulsive potential")
            r = check_repulsive(V, d, checks["gamma"], grid)
            if d > 3:
                rows.append(_row("eta_margin", r.eta, 0.0, r.passed))
            else:
                moment_W = r.moment
                rows.append(_row("moment_tW", r.moment, 0.5, r.passed))
    att = [p for p in specs if p.role == "n_attractive"]
    if att:
        if "rho" not in checks:
            raise C.ConfigError("checks.rho: required to check an attractive potential")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                a = compute_beta_rho(_Combined(att), checks["rho"], grid, d=d, moment_W=moment_W)
            rows.append(_row("beta_rho", a.beta, a.threshold, a.passed))
            rows.append(_row("beta_rho_tail", a.tail_bound, math.inf, True))
        except CheckerError as exc:
            rows.append(_row(f"beta_rho: {exc}", math.nan, 0.25 if d > 3 else 0.5, False))
    V1 = [p for p in specs if p.role == "V1_long_range"]
    V2 = [p for p in specs if p.role == "V2_long_range"]
    if V1 or V2:
        if "gamma" not in checks:
            raise C.ConfigError("checks.gamma: required to check a long-range potential")
        tau0 = tuple(checks.get("tau0_list", ()))
        lr = check_long_range(_Combined(V1) if V1 else None, _Combined(V2) if V2 else None,
                              checks["gamma"], grid, d=d, tau0_list=tau0)
        rows.append(_row("long_range_a", lr.a, math.inf, lr.failing is None))
        for t0 in tau0:
            if t0 in lr.B_values:
                rows.append(_row(f"B(tau0={t0:g})", lr.B_values[t0], math.inf, True))
    if not rows:
        rows.append(_row("zero_potential", 0.0, 0.0, True))
    return Report("check-potential", ("check", "value", "bound", "passed"), rows,
                  passed=all(r["passed"] for r in rows))


def _h_profile(block):
    hp = block.get("h_profile")
    if hp is None:
        return None, None
    a, p = hp["amplitude"], hp["power"]
    return (lambda t: a / (1.0 + t) ** p), p


def cmd_multiplier(cfg, args):
    grid = build_grid(cfg)
    block = _need(cfg, "multiplier")
    kind = block["kind"]
    d = grid.d
    r = grid.r
    rows = []
    summary = {"kind": kind}
    if kind == "morawetz":
        R = _need(cfg, "multiplier", "R")
        prof = morawetz_profile(R, grid)
        rows.append(_row("dphi_min", prof.dphi.min(), 1.0, prof.dphi.min() >= 1.0))
        rows.append(_row("dphi_max", prof.dphi.max(), 2.0, prof.dphi.max() <= 2.0))
        rphi2 = r * prof.d2phi
        rows.append(_row("r_d2phi_min", rphi2.min(), 0.0, rphi2.min() >= 0.0))
        rows.append(_row("r_d2phi_max", rphi2.max(), 1.0, rphi2.max() <= 1.0))
        inner = r <= R
        if inner.any():
            low = np.minimum(R * prof.d2phi[inner], R * (prof.dphi[inner] - 1.0) / r[inner])
            b = 1.0 / (2.0 * math.sqrt(2.0))
            rows.append(_row("hessian_lower_inner", low.min(), b, low.min() >= b))
            if d > 3:
                nb = -(R**3) * prof.bilap[inner]
                b = d * (d + 2) / (8.0 * math.sqrt(2.0))
                rows.append(_row("neg_bilap_inner", nb.min(), b, nb.min() >= b))
        cons = np.max(np.abs(prof.lap - (prof.d2phi + (d - 1) * prof.dphi / r)) / np.abs(prof.lap))
        rows.append(_row("laplacian_consistency", cons, 1e-12, cons <= 1e-12))
    elif kind == "piecewise":
        R = _need(cfg, "multiplier", "R")
        prof = piecewise_profile(R, grid)
        Rs = prof.meta["R"]
        rows.append(_row("grad_max", prof.dphi.max(), 1.0, prof.dphi.max() <= 1.0))
        inside = r < Rs
        dev = float(np.max(np.abs(prof.lap[inside] - d / Rs))) if inside.any() else 0.0
        rows.append(_row("lap_inside_dev", dev, 1e-12 * d / Rs, dev <= 1e-12 * d / Rs))
        outside = prof.aux["phi_R"][r > Rs]
        rows.append(_row("phi_R_outside_max", float(np.max(np.abs(outside), initial=0.0)), 0.0,
                         not np.any(outside)))
        summary["snap"] = prof.meta["snap"]
    elif kind == "psi":
        R = _need(cfg, "multiplier", "R")
        prof = psi_weight(R, grid)
        for flag, ok in sorted(prof.meta["flags"].items()):
            rows.append(_row(flag, float(ok), 1.0, ok))
        if "R_list" in block:
            fam = a2_interval_family(block.get("interval_count", 200), block.get("interval_seed", 0))
            res = check_A2(block["R_list"], fam, d=d)
            for Rk, v in res["per_R"].items():
                rows.append(_row(f"A2_product(R={Rk:g})", v, 1.0, v >= 1.0 - 1e-12))
            spread = res["max"] / res["min"]
            lim = cfg.get("tolerances", {}).get("R_spread", 2.0)
            rows.append(_row("A2_spread", spread, lim, spread <= lim))
    elif kind == "appendix2":
        for k in ("epsilon", "R", "alpha", "kappa"):
            _need(cfg, "multiplier", k)
        eps, R = block["epsilon"], block["R"]
        h, decay = _h_profile(block)
        try:
            prof = appendix2_construct(h, eps, R, block["alpha"], block["kappa"], grid, decay=decay)
        except HypothesisError as exc:
            rows.append(_row(f"hypothesis: {exc}", exc.margin, 0.0, False))
            return Report("multiplier", ("check", "value", "bound", "passed"), rows, passed=False,
                          summary=summary)
        m = prof.meta
        rows.append(_row("hypothesis_margin", m["margin"], 0.0, m["margin"] > 0))
        for name, ok in sorted(m["checks"].items()):
            rows.append(_row(name, float(ok), 1.0, ok))
        rows.append(_row("lower_constant_C", m["C"], 0.0, m["C"] > 0))
        if h is None:
            dev = abs(prof.aux["phi_prime"][-1] - eps / 6.0)
            rows.append(_row("phi_prime_far_dev", dev, 1e-6, dev <= 1e-6))
            dinf = abs(m["phi_prime_inf"] - eps / 6.0)
            rows.append(_row("phi_prime_limit_dev", dinf, 1e-12, dinf <= 1e-12))
        hh = h or (lambda t: np.zeros_like(t))
        res = bilaplacian_residual(prof, lambda t: -(eps / R**3) * (t < R) - hh(t) / t, exclude=(R,))
        lim = C.tolerance(cfg, "bilaplacian")
        rows.append(_row("bilaplacian_residual", res, lim, res <= lim))
        summary["moment"] = m["moment"]
    else:
        raise C.ConfigError(f"multiplier.kind: unsupported kind {kind!r}")
    return Report("multiplier", ("check", "value", "bound", "passed"), rows,
                  passed=all(r["passed"] for r in rows), summary=summary)


def cmd_solve(cfg, args):
    grid = build_grid(cfg)
    problem = build_problem(cfg, grid, C.build_potentials(cfg))
    sol = solve_resolvent(problem, warn=False)
    u = sol.u
    rows = [{"r": float(ri), "u_re": float(v.real), "u_im": float(v.imag), "du_re": float(w.real),
             "du_im": float(w.imag)} for ri, v, w in zip(grid.r, u.values, u.deriv)]
    lim = C.tolerance(cfg, "residual")
    summary = {"residual": sol.residual, "boundary_leak": sol.boundary_leak,
               "cond_estimate": sol.cond_estimate, "backward_ok": sol.backward_ok}
    if cfg["rhs"]["kind"] == "manufactured":
        ustar = manufactured_mode(grid)[0]
        w = grid.weights
        summary["l2_error"] = float(np.sqrt(np.sum(w * np.abs(u.values - ustar) ** 2) / np.sum(w * ustar**2)))
    return Report("solve", ("r", "u_re", "u_im", "du_re", "du_im"), rows, passed=sol.residual <= lim,
                  summary=summary)


def _test_weight(cfg, grid):
    phi = cfg.get("identities", {}).get("phi")
    if phi is None:
        return None
    kind = phi["kind"]
    try:
        if kind == "gaussian":
            return TestWeight.gaussian(grid, phi["width"])
        if kind == "japanese":
            return TestWeight.japanese(grid, phi["alpha"])
        if kind == "psi":
            return TestWeight.psi(grid, phi["R"])
        if kind == "constant":
            return TestWeight.constant(grid, phi.get("value", 1.0))
    except KeyError as exc:
        raise C.ConfigError(f"identities.phi.{exc.args[0]}: missing required key for {kind}") from None
    raise C.ConfigError(f"identities.phi.kind: unsupported kind {kind!r}")


def _multiplier_for(cfg, grid):
    block = cfg.get("identities", {})
    kind = block.get("multiplier")
    if kind is None:
        return None
    if "R" not in block:
        raise C.ConfigError("identities.R: required with a multiplier")
    if kind == "morawetz":
        return morawetz_profile(block["R"], grid)
    if kind == "piecewise":
        return piecewise_profile(block["R"], grid)
    raise C.ConfigError(f"identities.multiplier: unsupported kind {kind!r}")


def cmd_verify_identities(cfg, args):
    block = cfg.get("identities", {})
    ids = block.get("list", list(IDS))
    for i, name in enumerate(ids):
        if name not in IDS:
            raise C.ConfigError(f"identities.list[{i}]: unknown identity {name!r}")
    levels = block.get("refinements", 3) + 1
    base = build_grid(cfg)
    potentials = C.build_potentials(cfg)
    grids = [RadialGrid(base.d, base.ell, base.n * 2**k, base.h / 2**k) for k in range(levels)]
    results = {name: [] for name in ids}
    for g in grids:
        problem = build_problem(cfg, g, potentials)
        sol = solve_resolvent(problem, warn=False)
        phi = _test_weight(cfg, g)
        Phi = _multiplier_for(cfg, g)
        for name in ids:
            try:
                rep = check_identity(name, sol, problem, phi=phi, Phi=Phi)
            except ValueError as exc:
                raise C.ConfigError(f"identities: {exc}") from None
            results[name].append((g.h, rep))
    rows = []
    ratio_lim = C.tolerance(cfg, "refinement_ratio")
    res_lim = C.tolerance(cfg, "identity")
    passed = True
    worst = {}
    for name in ids:
        prev = None
        for h, rep in results[name]:
            order = math.nan
            if prev is not None and rep.residual > 0 and prev > 0:
                order = math.log2(prev / rep.residual)
                if prev / rep.residual < ratio_lim and prev > 1e-13:
                    passed = False
            rows.append({"identity": name, "h": h, "lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual,
                         "order-estimate": order})
            prev = rep.residual
        worst[name] = results[name][-1][1].residual
        if worst[name] > res_lim:
            passed = False
    return Report("verify-identities", ("identity", "h", "lhs", "rhs", "residual", "order-estimate"), rows,
                  passed=passed, summary={"finest_residual": worst, "refinement_ratio_bound": ratio_lim})


def sweep_config(cfg):
    """SweepConfig from a validated experiment config."""
    g = _need(cfg, "grid")
    s = _need(cfg, "sweep")
    data = _need(cfg, "data")
    est = s["estimate"]
    if est in ("basic", "basic_attractive") and "gamma" not in s:
        raise C.ConfigError(f"sweep.gamma: required for estimate {est}")
    if est in ("basic_attractive", "mayo10") and "rho" not in s:
        raise C.ConfigError(f"sweep.rho: required for estimate {est}")
    if est == "weighted_sinpeque" and "alpha" not in s:
        raise C.ConfigError("sweep.alpha: required for estimate weighted_sinpeque")
    if est in ("juan10_kato", "juan14_kato") and "R_list" not in s:
        raise C.ConfigError(f"sweep.R_list: required for estimate {est}")
    kw = {}
    for key in ("R_list", "rho", "alpha", "gamma", "sign", "tau_sign"):
        if key in s:
            kw[key] = tuple(s[key]) if key == "R_list" else s[key]
    try:
        return SweepConfig(
            d=cfg["dimension"], n=g["n"], rmax=float(g["rmax"]), potentials=C.build_potentials(cfg),
            estimate=est, tau_list=tuple(s["tau_list"]), epsilon_list=tuple(s["epsilon_list"]),
            family=data["family"], seed=data["seed"], count=data["count"], ell=C.grid_mode(cfg),
            boundary=_boundary(cfg, "sweep"), **kw)
    except ValueError as exc:
        raise C.ConfigError(f"sweep: {exc}") from None


def cmd_sweep(cfg, args):
    sc = sweep_config(cfg)
    try:
        rep = supersmooth_sweep(sc, threads=args.threads)
    except ContaminatedSweepError as exc:
        print(f"sweep: {exc}", file=sys.stderr)
        return Report("sweep", ("tau", "epsilon", "R", "estimate", "lhs_term", "ratio", "leak"), [],
                      passed=False, summary={"error": str(exc), "leak_histogram": exc.histogram})
    tol = cfg.get("tolerances", {})
    terms = tol.get("terms", list(TERMS[sc.estimate]))
    verdict = {}
    passed = True
    for t in terms:
        if t not in rep.aggregates:
            raise C.ConfigError(f"tolerances.terms: {t!r} is not a term of {sc.estimate}")
        a = rep.aggregates[t]
        ok = True
        if "max_over_min" in tol:
            ok &= a["max_over_min"] <= tol["max_over_min"]
        if "abs_slope" in tol:
            ok &= a["abs_slope"] <= tol["abs_slope"]
        verdict[t] = bool(ok)
        passed &= ok
    summary = {
        "sweep_hash": rep.config_hash, "seed": rep.seed, "dropped": rep.dropped,
        "leak_histogram": rep.leak_histogram, "verdict": verdict,
        "aggregates": {t: {k: v for k, v in a.items() if k != "groups"} for t, a in rep.aggregates.items()},
    }
    return Report("sweep", rep.COLUMNS, rep.rows, passed=passed, summary=summary, body=rep.csv_body())


def cmd_evolve(cfg, args):
    grid = build_grid(cfg)
    ev = _need(cfg, "evolution")
    potentials = C.build_potentials(cfg)
    if cfg.get("rhs", {}).get("kind") == "manufactured":
        raise C.ConfigError("rhs.kind: manufactured data has no meaning for evolve")
    u0 = build_rhs(cfg, grid)
    boundary = _boundary(cfg, "spectrum")
    try:
        spec = diagonalize(grid, potentials, boundary=boundary)
    except ValueError as exc:
        raise C.ConfigError(f"spectrum: {exc}") from None
    form = ev.get("form", "half_derivative")
    if form == "half_derivative":
        free = spec if not potentials and boundary == "dirichlet" else diagonalize(grid)
    elif form == "adapted":
        free = spec
    elif form == "plain":
        free = None
    else:
        raise C.ConfigError(f"evolution.form: unsupported form {form!r}")
    project = tuple(ev["project"]) if "project" in ev else None
    norm2 = spec.norm(u0) ** 2 if spec.hermitian else float(np.sum(grid.weights * np.abs(u0.values) ** 2))
    rows = []
    for R in ev["R_list"]:
        try:
            res = smoothing_functional(spec, u0, Weight.ball(R), ev["T"], dt=ev.get("dt"), free=free,
                                       project=project, method=ev.get("method", "trapezoid"))
        except GuardError as exc:
            raise UsageError(f"evolution.T: {exc}") from None
        rows.append({"R": float(R), "value": res.value, "value_over_norm2": res.value / norm2 if norm2 else 0.0,
                     "T_guard": res.T_guard, "modes": res.modes})
    vals = [r["value_over_norm2"] for r in rows if r["value_over_norm2"] > 0]
    spread = max(vals) / min(vals) if vals else 1.0
    lim = cfg.get("tolerances", {}).get("R_spread", 4.0)
    return Report("evolve", ("R", "value", "value_over_norm2", "T_guard", "modes"), rows,
                  passed=spread <= lim, summary={"R_spread": spread, "bound": lim, "norm2": norm2})


def cmd_spectrum(cfg, args):
    grid = build_grid(cfg)
    block = cfg.get("spectrum", {})
    select = block.get("select")
    if select is not None and len(select) != 2:
        raise C.ConfigError("spectrum.select: expected [lo, hi]")
    try:
        spec = diagonalize(grid, C.build_potentials(cfg), boundary=_boundary(cfg, "spectrum"),
                           select=None if select is None else tuple(select))
    except ValueError as exc:
        raise C.ConfigError(f"spectrum: {exc}") from None
    lam = spec.eigenvalues
    rows = [{"k": k, "re": float(np.real(w)), "im": float(np.imag(w))} for k, w in enumerate(lam)]
    scale = max(float(np.max(np.abs(lam), initial=0.0)), 1.0)
    eres = spec.eigen_residual() / scale
    summary = {"count": len(rows), "eigen_residual": eres}
    passed = eres <= C.tolerance(cfg, "eigen_residual")
    if spec.hermitian:
        orth = spec.orthonormality_error()
        summary["orthonormality"] = orth
        passed &= orth <= C.tolerance(cfg, "orthonormality")
    return Report("spectrum", ("k", "re", "im"), rows, passed=bool(passed), summary=summary)


COMMANDS = {
    "check-potential": cmd_check_potential,
    "multiplier": cmd_multiplier,
    "solve": cmd_solve,
    "verify-identities": cmd_verify_identities,
    "sweep": cmd_sweep,
    "evolve": cmd_evolve,
    "spectrum": cmd_spectrum,
}


def build_parser():
    p = _Parser(prog="resolventlab", description="Radial resolvent and smoothing experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="YAML or JSON experiment file")
    p.add_argument("--out", default=None, help="report directory (default: output.path or '.')")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="override data.seed")
    return p


def run(argv=None):
    """Parse ``argv``, run one subcommand and return the exit status."""
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("resolventlab: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = C.load(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise C.ConfigError("--seed: must be an unsigned 64-bit integer")
            cfg.setdefault("data", {})["seed"] = args.seed
            cfg = C.validate(cfg)
        out_dir = args.out or cfg.get("output", {}).get("path", ".")
        fmt_name = cfg.get("output", {}).get("format", "csv")
        report = COMMANDS[args.subcommand](cfg, args)
    except FileNotFoundError as exc:
        print(f"resolventlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (C.ConfigError, UsageError) as exc:
        print(f"resolventlab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        print(f"resolventlab: config error: cannot parse {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    paths = write_report(report, out_dir, fmt_name, cfg, config_hash(cfg))
    status = "pass" if report.passed else "FAIL"
    print(f"{args.subcommand}: {status} -> {', '.join(str(p) for p in paths)}")
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv=None):
    sys.exit(run(argv))
