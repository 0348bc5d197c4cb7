
import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from resolventlab.grids import ModeFunction, RadialGrid, integrate_radial
from resolventlab.helmholtz import (
    ResolventProblem,
    Sponge,
    TruncationWarning,
    assemble_operator,
    boundary_leak,
    effective_potential,
    residual_check,
    solve_many,
    solve_resolvent,
)
from resolventlab.potentials import PotentialSpec


def _manufactured(d, ell, expr_u, eps, tau, V=None):
    """Right-hand side for a given exact profile, built symbolically."""
    r = sp.symbols("r", positive=True)
    u = expr_u(r)
    lap = sp.diff(u, r, 2) + (d - 1) / r * sp.diff(u, r) - ell * (ell + d - 2) * u / r**2
    rest = -lap + sp.I * eps * u - tau * u
    fu = sp.lambdify(r, u, "numpy")
    fr = sp.lambdify(r, rest, "numpy")
    fd = sp.lambdify(r, sp.diff(u, r), "numpy")

    def rhs(grid):
        x = grid.r
        extra = 0.0 if V is None else V.value(x) * fu(x)
        return ModeFunction(grid, fr(x) + extra)

    return fu, fd, rhs


def _problem(grid, f, eps=0.5, tau=1.0, pots=(), **kw):
    return ResolventProblem(grid, tuple(pots), eps, tau, f, **kw)


def test_effective_potential_example():
    g = RadialGrid(3, 1, 10, 0.5)
    assert_allclose(effective_potential(g, np.zeros(10)), 2.0 / g.r**2)
    g5 = RadialGrid(5, 0, 10, 0.5)
    assert_allclose(effective_potential(g5, np.ones(10)), 1.0 + 2.0 / g5.r**2)


@pytest.mark.parametrize(
    "d, ell, expr, V, min_order",
    [
        (3, 0, lambda r: r * sp.exp(-r**2), None, 1.8),
        (3, 0, lambda r: r * sp.exp(-r**2), PotentialSpec("smooth_inverse_power", {"c": 1.0, "alpha_pow": 3.0}), 1.8),
        (4, 2, lambda r: r**3 * sp.exp(-r**2), None, 1.8),
        # l = 1 in the plane: the Liouville potential -1/(4 r^2) limits the rate near the origin
        (2, 1, lambda r: r**2 * sp.exp(-r**2), None, 1.8),
    ],
)
def test_manufactured_convergence(d, ell, expr, V, min_order):
    eps, tau = 0.5, 1.0
    fu, fd, rhs = _manufactured(d, ell, expr, eps, tau, V)
    errs = []
    for n in (200, 400, 800, 1600):
        g = RadialGrid.from_rmax(d, ell, n, 8.0)
        sol = solve_resolvent(_problem(g, rhs(g), eps, tau, () if V is None else (V,)), warn=False)
        w = g.r ** ((d - 1) / 2)
        errs.append(np.sqrt(np.sum(np.abs(sol.u.values - fu(g.r)) ** 2 * w * w) * g.h))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= min_order), orders


def test_dense_oracle(rng):
    g = RadialGrid.from_rmax(3, 1, 200, 10.0)
    f = ModeFunction(g, rng.normal(size=200) + 1j * rng.normal(size=200))
    pots = (PotentialSpec("inverse_power", {"c": 0.3, "gamma_pow": 2.0}),)
    prob = _problem(g, f, 0.2, 2.0, pots)
    op = assemble_operator(prob)
    A = op.dense()
    v = np.linalg.solve(A, op.scale * f.values[:-1])
    sol = solve_resolvent(prob, warn=False)
    assert_allclose(sol.u.values[:-1], v / op.scale, rtol=1e-10, atol=1e-12 * np.max(np.abs(v / op.scale)))
    assert sol.u.values[-1] == 0
    # independent matrix for the same scheme
    h, r = g.h, g.r[:-1]
    B = (np.diag(2 / h**2 + 2.0 / r**2 + 0.3 / r**2 - 2.0 + 0.2j)
         - np.diag(np.ones(len(r) - 1), 1) / h**2 - np.diag(np.ones(len(r) - 1), -1) / h**2)
    assert_allclose(A, B, rtol=1e-14, atol=0)
    assert sol.residual <= 1e-10 and sol.backward_ok


def test_conjugation_symmetry(rng):
    g = RadialGrid.from_rmax(3, 0, 400, 15.0)
    f = ModeFunction(g, np.exp(-(g.r - 3.0) ** 2) * (1.0 + 0.3j))
    plus = solve_resolvent(_problem(g, f, 0.3, 1.5), warn=False)
    fbar = ModeFunction(g, np.conj(f.values))
    minus = solve_resolvent(_problem(g, fbar, 0.3, 1.5, sign="minus"), warn=False)
    assert_allclose(minus.u.values, np.conj(plus.u.values), rtol=1e-12, atol=1e-15)


def test_resolvent_identity():
    # R(z1) - R(z2) = (z1 - z2) R(z1) R(z2) with z = tau - i eps
    g = RadialGrid.from_rmax(3, 0, 400, 15.0)
    f = ModeFunction(g, np.exp(-(g.r - 2.0) ** 2))
    p1, p2 = _problem(g, f, 0.4, 1.0), _problem(g, f, 0.7, 2.5)
    u1 = solve_resolvent(p1, warn=False).u
    u2 = solve_resolvent(p2, warn=False).u
    u12 = solve_resolvent(p1.replace(rhs=u2), warn=False).u
    z1, z2 = 1.0 - 0.4j, 2.5 - 0.7j
    assert_allclose(u1.values - u2.values, (z1 - z2) * u12.values, rtol=1e-9, atol=1e-12)


def test_tau_sign_plus_matches_negative_tau():
    g = RadialGrid.from_rmax(3, 0, 200, 10.0)
    f = ModeFunction(g, np.exp(-g.r**2))
    a = solve_resolvent(_problem(g, f, 0.5, 1.0, tau_sign="plus"), warn=False).u.values
    b = solve_resolvent(_problem(g, f, 0.5, -1.0), warn=False).u.values
    assert_allclose(a, b, rtol=1e-14)


def test_zero_rhs():
    g = RadialGrid.from_rmax(3, 0, 100, 10.0)
    sol = solve_resolvent(_problem(g, ModeFunction(g, np.zeros(100))), warn=False)
    assert np.all(sol.u.values == 0) and sol.residual == 0 and sol.boundary_leak == 0


def test_residual_detects_perturbation(rng):
    g = RadialGrid.from_rmax(3, 0, 400, 15.0)
    f = ModeFunction(g, np.exp(-(g.r - 2.0) ** 2))
    prob = _problem(g, f)
    sol = solve_resolvent(prob, warn=False)
    base = residual_check(prob, sol.u)
    noisy = ModeFunction(g, sol.u.values * (1 + 0.01 * rng.normal(size=400)))
    assert residual_check(prob, noisy) >= 1e3 * max(base, 1e-16)


def test_gradient_fourth_order():
    errs = []
    for n in (200, 400, 800):
        g = RadialGrid.from_rmax(3, 0, n, 8.0)
        r = g.r
        u = ModeFunction(g, np.sin(r) * np.exp(-0.1 * r * r))
        exact = (np.cos(r) - 0.2 * r * np.sin(r)) * np.exp(-0.1 * r * r)
        errs.append(np.max(np.abs(u.derivative() - exact)))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 3.5)


def test_absorption_energy_bound():
    # eps ||u||^2 = -Im <f, u> for real V; so eps ||u||^2 <= int |f| |u|
    g = RadialGrid.from_rmax(3, 0, 800, 20.0)
    f = ModeFunction(g, np.exp(-(g.r - 3.0) ** 2) * (1 + 1j))
    for eps in (0.05, 0.5):
        u = solve_resolvent(_problem(g, f, eps, 2.0), warn=False).u
        lhs = eps * integrate_radial(g, None, density=np.abs(u.values) ** 2)
        rhs = integrate_radial(g, None, density=np.abs(f.values * u.values))
        assert lhs <= rhs * (1 + 1e-10)


def test_truncation_warning_and_sponge():
    g = RadialGrid.from_rmax(3, 0, 2000, 20.0)
    f = ModeFunction(g, np.exp(-(g.r - 2.0) ** 2))
    prob = _problem(g, f, 1e-3, 4.0)
    with pytest.warns(TruncationWarning):
        solve_resolvent(prob)
    damped = solve_resolvent(prob.replace(boundary=Sponge(0.25, 40.0)), warn=False)
    assert damped.boundary_leak < 1e-3


def test_solve_many_matches_single(rng):
    g = RadialGrid.from_rmax(3, 0, 300, 10.0)
    fs = [ModeFunction(g, rng.normal(size=300)) for _ in range(3)]
    prob = _problem(g, fs[0])
    many = solve_many(prob, fs)
    for f, s in zip(fs, many):
        assert_allclose(s.u.values, solve_resolvent(prob.replace(rhs=f), warn=False).u.values, rtol=1e-13)
    assert solve_many(prob, []) == []


def test_invalid_problems():
    g = RadialGrid.from_rmax(3, 0, 50, 10.0)
    f = ModeFunction(g, np.zeros(50))
    with pytest.raises(ValueError):
        _problem(g, f, eps=0.0)
    with pytest.raises(ValueError):
        _problem(g, f, sign="up")
    with pytest.raises(ValueError):
        _problem(g, ModeFunction(RadialGrid.from_rmax(3, 0, 60, 10.0), np.zeros(60)))
    with pytest.raises(ValueError):
        ModeFunction(g, np.full(50, np.nan))


def test_boundary_leak_definition():
    g = RadialGrid.from_rmax(3, 0, 1000, 10.0)
    assert boundary_leak(g, np.exp(-g.r**2)) < 1e-30
    vals = np.ones(1000) / g.r
    assert_allclose(boundary_leak(g, vals), 1.0, rtol=1e-12)
