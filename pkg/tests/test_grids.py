import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from resolventlab.grids import (
    ModeFunction,
    RadialGrid,
    SingularWeightWarning,
    Weight,
    ball_integral,
    check_discrete_hardy,
    dyadic_radii,
    grad_density,
    indicator,
    integrate_radial,
    integrate_radial_detail,
    integrate_sphere,
    morrey_sup,
    norm_X,
    norm_Xstar,
    sphere_area,
    sphere_sup,
)


def grid3(n=1000, rmax=10.0, ell=0, d=3):
    return RadialGrid.from_rmax(d, ell, n, rmax)


def test_sphere_area_closed_forms():
    assert_allclose(sphere_area(2), 2 * math.pi)
    assert_allclose(sphere_area(3), 4 * math.pi)
    assert_allclose(sphere_area(4), 2 * math.pi**2)


def test_grid_validation():
    with pytest.raises(ValueError):
        RadialGrid(1, 0, 10, 0.1)
    with pytest.raises(ValueError):
        RadialGrid(3, 0, 4, 0.1)
    with pytest.raises(ValueError):
        ModeFunction(grid3(10), np.ones(9))
    with pytest.raises(ValueError):
        ModeFunction(grid3(10), np.full(10, np.nan))
    g = grid3(100, 5.0)
    assert g.r[0] == pytest.approx(g.h) and np.all(np.diff(g.r) > 0)


def test_zero_function_integrals():
    g = grid3(200)
    z = ModeFunction(g, np.zeros(g.n))
    assert integrate_radial(z) == 0.0
    assert integrate_sphere(z, 2.0) == 0.0
    assert norm_X(z) == 0.0 and norm_Xstar(z) == 0.0


def test_ball_volume_second_order():
    errs = []
    for n in (100, 200, 400):
        g = grid3(n, 2.0)
        u = indicator(g, 0.0, 1.0, balanced=True)
        errs.append(abs(integrate_radial(u) - 4 * math.pi / 3))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_inverse_square_weight():
    g = grid3(800, 2.0)
    u = indicator(g, 0.0, 1.0, balanced=True)
    assert_allclose(integrate_radial(u, Weight.inverse_power(2)), 4 * math.pi, rtol=1e-5)


def test_singular_weight_warns_with_first_node():
    g = grid3(200, 2.0)
    u = ModeFunction(g, np.ones(g.n))
    with pytest.warns(SingularWeightWarning):
        res = integrate_radial_detail(u, Weight.inverse_power(3))
    assert res.singular and res.first_node > 0


def test_sphere_integral():
    g = grid3(400, 4.0)
    assert_allclose(integrate_sphere(ModeFunction(g, np.ones(g.n)), 2.0), 16 * math.pi)
    with pytest.raises(ValueError):
        integrate_sphere(ModeFunction(g, np.ones(g.n)), 5.0)


def test_norm_X_indicator():
    g = grid3(1024, 8.0)
    # the ball integral ends on the jump, so the node at r = 1 keeps full weight
    u = indicator(g, 0.0, 1.0)
    assert_allclose(norm_X(u) ** 2, 4 * math.pi / 3, rtol=1e-4)


def test_norm_Xstar_single_shell():
    g = grid3(2048, 8.0)
    f = indicator(g, 1.0, 2.0)
    assert_allclose(norm_Xstar(f), math.sqrt(56 * math.pi / 3), rtol=2e-3)


def test_Xrho_monotone(rng):
    g = grid3(512, 16.0)
    for _ in range(10):
        u = ModeFunction(g, rng.standard_normal(g.n) * np.exp(-g.r / 4))
        vals = [norm_X(u, rho) for rho in (0.0, 1.0, 2.0, 4.0)]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


def test_dyadic_sup_brackets_full_sup(rng):
    # continuous sup over R is within a factor 2 of the dyadic one
    g = grid3(512, 16.0)
    for _ in range(20):
        u = ModeFunction(g, rng.standard_normal(g.n))
        dyadic = morrey_sup(u)
        full = max(ball_integral(u, R) / R for R in g.r)
        assert dyadic <= full * (1 + 1e-12)
        assert full <= 2.0 * dyadic


def test_duality_pairing(rng):
    consts = []
    for n in (500, 1000, 2000):
        g = grid3(n, 20.0)
        worst = 0.0
        for _ in range(100):
            a = np.abs(rng.standard_normal(g.n)) * np.exp(-rng.uniform(0, 1) * g.r)
            b = np.abs(rng.standard_normal(g.n)) * np.exp(-rng.uniform(0, 1) * g.r)
            u, f = ModeFunction(g, a), ModeFunction(g, b)
            pair = float(np.sum(g.weights * a * b))
            worst = max(worst, pair / (norm_X(u) * norm_Xstar(f)))
        consts.append(worst)
    assert max(consts) <= 2.0


def test_ball_sup_below_sphere_sup(rng):
    g = grid3(400, 10.0)
    r = g.r
    for _ in range(100):
        c = rng.uniform(0.5, 5.0, 3)
        u = ModeFunction(g, np.exp(-((r - c[0]) / c[1]) ** 2) * np.cos(c[2] * r))
        assert morrey_sup(u, 0.0, 3.0) <= sphere_sup(u, 0.0, 2.0) * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3), st.integers(0, 2**31))
def test_norms_homogeneous(lam, seed):
    g = grid3(128, 8.0)
    vals = np.random.default_rng(seed).standard_normal(g.n)
    u = ModeFunction(g, vals)
    assert_allclose(norm_X(u * lam), abs(lam) * norm_X(u), rtol=1e-12)
    assert_allclose(norm_Xstar(u * lam), abs(lam) * norm_Xstar(u), rtol=1e-12)


def test_triangle_inequality(rng):
    g = grid3(256, 8.0)
    for _ in range(20):
        u = ModeFunction(g, rng.standard_normal(g.n))
        w = ModeFunction(g, rng.standard_normal(g.n))
        s = ModeFunction(g, u.values + w.values)
        assert norm_X(s) <= norm_X(u) + norm_X(w) + 1e-12
        assert norm_Xstar(s) <= norm_Xstar(u) + norm_Xstar(w) + 1e-12


def test_grad_density_closed_forms():
    g = grid3(2000, 5.0)
    r = g.r
    u = ModeFunction(g, np.exp(-r * r))
    assert_allclose(grad_density(u)[2:-2], (4 * r * r * np.exp(-2 * r * r))[2:-2], atol=1e-8)
    g2 = grid3(100, 5.0, ell=2)
    assert_allclose(grad_density(ModeFunction(g2, np.ones(g2.n))), 6.0 / g2.r**2)
    assert np.all(grad_density(ModeFunction(g, np.ones(g.n))) == 0)


def test_dyadic_radii_contains_rmax():
    g = grid3(100, 10.0)
    radii = dyadic_radii(g)
    assert radii[-1] == g.rmax and 8.0 in radii


def test_hardy_constants():
    for d, bound in ((3, 4.0), (5, 4.0 / 9.0)):
        g = RadialGrid.from_rmax(d, 0, 4000, 40.0)
        worst = check_discrete_hardy(g, 8)
        assert worst <= bound * 1.02
    g = RadialGrid.from_rmax(3, 0, 4000, 40.0)
    assert check_discrete_hardy(g, [lambda r: r * np.exp(-r)]) <= 4.0
