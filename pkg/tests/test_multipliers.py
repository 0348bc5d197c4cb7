import math

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from resolventlab.grids import ModeFunction, RadialGrid
from resolventlab.multipliers import (
    HypothesisError,
    MultiplierProfile,
    a2_interval_family,
    appendix2_construct,
    bilaplacian_residual,
    check_A2,
    morawetz_phi,
    morawetz_profile,
    piecewise_profile,
    psi_R,
    psi_weight,
    quadratic_form_density,
)


def grid(d=3, n=2000, rmax=20.0, ell=0):
    return RadialGrid.from_rmax(d, ell, n, rmax)


def _radial_bilap(d):
    r = sp.symbols("r", positive=True)
    phi = sp.sqrt(1 + r**2) + r
    lap = lambda f: sp.diff(f, r, 2) + (d - 1) / r * sp.diff(f, r)
    return sp.lambdify(r, sp.simplify(lap(lap(phi))))


def test_morawetz_bilap_value_d5():
    g = RadialGrid(5, 0, 10, 0.1)
    prof = morawetz_profile(1.0, g)
    ref = -(8 / 2**1.5 + 12 / 2**2.5 + 15 / 2**3.5 + 8)
    assert_allclose(prof.bilap[9], ref, rtol=1e-12)
    assert_allclose(ref, -14.2756, atol=1e-4)


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_morawetz_bilap_symbolic(d):
    g = grid(d, 200, 10.0)
    prof = morawetz_profile(1.0, g)
    assert_allclose(prof.bilap, _radial_bilap(d)(g.r), rtol=1e-10)


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_morawetz_bounds(d):
    g = grid(d, 4000, 100.0)
    prof = morawetz_profile(1.0, g)
    r = g.r
    assert np.all(prof.dphi >= 1.0) and np.all(prof.dphi <= 2.0)
    assert np.all(r * prof.d2phi >= 0.0) and np.all(r * prof.d2phi <= 1.0)
    assert prof.dphi[0] == pytest.approx(1.0, abs=2 * g.h) and prof.dphi[-1] == pytest.approx(2.0, abs=1e-4)
    inner = r <= 1.0
    low = np.minimum(prof.d2phi[inner], (prof.dphi[inner] - 1.0) / r[inner])
    assert low.min() >= 1.0 / (2.0 * math.sqrt(2.0))
    if d > 3:
        assert np.min(-prof.bilap[inner]) >= d * (d + 2) / (8.0 * math.sqrt(2.0))
    assert_allclose(prof.lap, prof.d2phi + (d - 1) * prof.dphi / r, rtol=1e-13)


def test_morawetz_scaling():
    g = grid(4, 1000, 20.0)
    R = 2.5
    pr = morawetz_profile(R, g)
    scaled = RadialGrid(4, 0, 1000, g.h / R)
    p1 = morawetz_profile(1.0, scaled)
    assert_allclose(pr.dphi, p1.dphi, rtol=1e-12)
    assert_allclose(pr.d2phi, p1.d2phi / R, rtol=1e-12)
    assert_allclose(pr.bilap, p1.bilap / R**3, rtol=1e-12)
    with pytest.raises(ValueError):
        morawetz_profile(0.0, g)


def test_morawetz_phi_closed_form():
    assert morawetz_phi(np.array([0.0]))[0] == 1.0


def test_piecewise_examples():
    g = grid(3, 1000, 10.0)
    prof = piecewise_profile(2.0, g)
    inside = g.r < 2.0
    assert_allclose(prof.lap[inside], 1.5)
    assert np.all(prof.dphi <= 1.0)
    assert np.all(prof.aux["phi_R"][g.r > 2.0] == 0.0)
    assert_allclose(prof.aux["phi_R"][inside], 0.25)
    atom = prof.paired_atoms[0]
    assert atom.r == 2.0 and atom.mass == pytest.approx(2.0 / 4.0)
    with pytest.raises(ValueError):
        piecewise_profile(0.5 * g.h, g)


def test_piecewise_snaps_to_node():
    g = grid(5, 100, 10.0)
    prof = piecewise_profile(2.03, g)
    assert prof.meta["R"] == pytest.approx(2.0) and prof.meta["snap"] == pytest.approx(0.03)


def test_psi_examples():
    assert psi_R(0.0, 4.0) == 0.25
    g = grid(3, 2000, 50.0)
    for R in (0.5, 4.0, 16.0):
        prof = psi_weight(R, g)
        assert all(prof.meta["flags"].values())
        assert_allclose(prof.aux["psi"] * prof.aux["inv_psi"], 1.0)


def test_A2_constant_and_degenerate():
    fam = a2_interval_family(50, 1)
    res = check_A2([1.0], fam, weight=lambda r, R: np.ones_like(r))
    assert_allclose(res["max"], 1.0, rtol=1e-10)
    tiny = [(3.0, 1e-6)]
    assert_allclose(check_A2([1.0], tiny)["max"], 1.0, rtol=1e-8)
    with pytest.raises(ValueError):
        check_A2([1.0], [])


def test_A2_R_independence():
    fam = a2_interval_family(200, 3)
    res = check_A2([1.0, 8.0, 64.0], fam, d=3)
    assert min(res["per_R"].values()) >= 1.0 - 1e-12
    assert res["max"] / res["min"] <= 2.0


def test_constructed_multiplier_zero_h():
    eps, R, L = 0.6, 1.0, 200.0
    g = RadialGrid.from_rmax(3, 0, 4000, L)
    prof = appendix2_construct(None, eps, R, 0.1, 0.4, g)
    phi1 = prof.aux["phi_prime"]
    # closed form beyond R: eps/6 - eps R^2 / (30 r^2)
    assert_allclose(phi1[-1], eps / 6 - eps * R * R / (30 * L * L), rtol=1e-13)
    assert abs(phi1[-1] - eps / 6) <= 1e-6
    assert prof.meta["phi_prime_inf"] == pytest.approx(eps / 6, abs=1e-14)
    assert np.all(phi1 <= eps / 6)
    assert all(prof.meta["checks"].values())
    assert np.all(prof.dphi > 0.1) and np.all(prof.dphi < 0.4)
    assert np.all(prof.dphi >= 0) and np.all(prof.d2phi >= 0)
    assert prof.meta["C"] > 0
    res = bilaplacian_residual(prof, lambda t: -(eps / R**3) * (t < R), exclude=(R,))
    assert res <= 1e-4


def test_constructed_multiplier_nonzero_h():
    h = lambda t: 0.05 / (1.0 + t) ** 3
    eps, R = 0.6, 1.0
    g = RadialGrid.from_rmax(3, 0, 4000, 200.0)
    prof = appendix2_construct(h, eps, R, 0.1, 0.4, g, decay=3.0)
    # int t h = 0.05 / 2; the power-law tail beyond rmax is modelled to O(1/rmax) of itself
    assert_allclose(prof.meta["moment"], 0.025, rtol=1e-4)
    assert all(prof.meta["checks"].values())
    res = bilaplacian_residual(prof, lambda t: -(eps / R**3) * (t < R) - h(t) / t, exclude=(R,))
    assert res <= 1e-4


def test_constructed_multiplier_compact_h_moment():
    h = lambda t: np.where(t < 5.0, 0.02 * (1.0 - t / 5.0) ** 2, 0.0)
    g = RadialGrid.from_rmax(3, 0, 2000, 50.0)
    prof = appendix2_construct(h, 0.6, 1.0, 0.1, 0.4, g)
    # int_0^5 t (1 - t/5)^2 dt = 25/12
    assert_allclose(prof.meta["moment"], 0.02 * 25.0 / 12.0, rtol=1e-10)


def test_constructed_multiplier_refuses():
    g = RadialGrid.from_rmax(3, 0, 400, 20.0)
    with pytest.raises(HypothesisError) as exc:
        appendix2_construct(None, 0.6, 1.0, 0.35, 0.4, g)
    assert exc.value.margin == pytest.approx(0.4 - 0.35 - 0.1)
    with pytest.raises(HypothesisError):
        appendix2_construct(lambda t: 1.0 / (1 + t), 0.6, 1.0, 0.1, 0.4, g)
    with pytest.raises(ValueError):
        appendix2_construct(None, 0.6, 1.0, 0.1, 0.4, RadialGrid.from_rmax(4, 0, 400, 20.0))


def test_quadratic_density_closed_form():
    g = grid(3, 4000, 6.0)
    r = g.r
    prof = morawetz_profile(1.0, g)
    u = ModeFunction(g, np.exp(-r * r), -2 * r * np.exp(-r * r))
    assert_allclose(quadratic_form_density(prof, u), prof.d2phi * 4 * r * r * np.exp(-2 * r * r), rtol=1e-13)
    assert np.all(quadratic_form_density(prof, ModeFunction(g, np.ones(g.n), np.zeros(g.n))) == 0)


def _phi3(x):
    s = np.linalg.norm(x)
    return math.sqrt(1 + s * s) + s


def _hessian_fd(f, x, step=1e-4):
    H = np.zeros((3, 3))
    E = np.eye(3) * step
    for i in range(3):
        for j in range(3):
            H[i, j] = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (
                4 * step * step)
    return H


def test_quadratic_density_vs_cartesian_hessian(rng):
    g = grid(3, 4000, 4.0)
    prof = morawetz_profile(1.0, g)
    r = g.r
    u = ModeFunction(g, np.exp(-r * r), -2 * r * np.exp(-r * r))
    dens = quadratic_form_density(prof, u)
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=3)
        x *= rng.uniform(0.3, 2.5) / np.linalg.norm(x)
        s = np.linalg.norm(x)
        grad = -2 * x * math.exp(-s * s)
        val = grad @ _hessian_fd(_phi3, x) @ grad
        ref = np.interp(s, r, dens)
        worst = max(worst, abs(val - ref) / abs(val))
    assert worst <= 1e-4


def test_quadratic_density_tangential_average():
    # l = 1 in 3-D: u = f(r) sqrt(3) cos(theta), sphere mean of |Y|^2 is 1
    g = grid(3, 4000, 4.0, ell=1)
    prof = morawetz_profile(1.0, g)
    r = g.r
    f = r * np.exp(-r * r)
    df = (1 - 2 * r * r) * np.exp(-r * r)
    dens = quadratic_form_density(prof, ModeFunction(g, f, df))
    m = 4000
    k = np.arange(m) + 0.5
    z = 1 - 2 * k / m
    th = math.pi * (1 + 5**0.5) * k
    dirs = np.stack([np.sqrt(1 - z * z) * np.cos(th), np.sqrt(1 - z * z) * np.sin(th), z], axis=1)
    for s in (0.5, 1.3):
        i = int(round(s / g.h)) - 1
        s = r[i]
        acc = 0.0
        for w in dirs:
            x = s * w
            # grad of f(s) sqrt3 x3/s = sqrt3 * f(s)/s * x3
            a = f[i] / s
            da = (df[i] - f[i] / s) / s
            grad = math.sqrt(3) * (da * x[2] * x / s + a * np.array([0.0, 0.0, 1.0]))
            acc += grad @ _hessian_fd(_phi3, x, 1e-4) @ grad
        assert_allclose(acc / m, dens[i], rtol=1e-3)


def test_bilaplacian_residual_linear_phi():
    g = grid(3, 500, 10.0)
    c = 0.7
    prof = MultiplierProfile(g, "linear", dphi=np.full(g.n, c), d2phi=np.zeros(g.n), lap=2 * c / g.r,
                             meta={"lap_singular": 2 * c})
    assert bilaplacian_residual(prof, np.zeros(g.n)) == 0.0
    with pytest.raises(ValueError):
        bilaplacian_residual(prof, np.zeros(g.n), normalize="other")


def test_bilaplacian_residual_morawetz_second_order():
    res = []
    for n in (1000, 2000, 4000):
        g = grid(5, n, 10.0)
        prof = morawetz_profile(1.0, g)
        res.append(bilaplacian_residual(prof, prof.bilap))
    ratios = np.array(res[:-1]) / np.array(res[1:])
    assert np.all(ratios > 3.5)
