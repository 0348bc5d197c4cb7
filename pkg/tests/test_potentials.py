import math
import warnings

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose
from scipy import integrate

from resolventlab.grids import RadialGrid, fd_derivative
from resolventlab.potentials import (
    CheckerError,
    PotentialSpec,
    ProfileError,
    SignViolation,
    check_long_range,
    check_repulsive,
    check_sobolev_split,
    compute_B_tau0,
    compute_beta_rho,
    eval_potential,
    exp_well_bound,
    zero_resonance_potential,
)


def grid(d=3, n=2000, rmax=50.0):
    return RadialGrid.from_rmax(d, 0, n, rmax)


def test_eval_examples():
    assert eval_potential(PotentialSpec("zero"), 1.0) == 0.0
    assert eval_potential(PotentialSpec("inverse_power", {"c": 0.5, "gamma_pow": 2}), 2.0) == pytest.approx(0.125)
    with pytest.raises(ValueError):
        eval_potential(PotentialSpec("zero"), 0.0)


def test_invalid_specs():
    with pytest.raises(ProfileError):
        PotentialSpec("inverse_power", {"c": 1.0, "gamma_pow": 0.0})
    with pytest.raises(ProfileError):
        PotentialSpec("cubic")
    with pytest.raises(ProfileError):
        PotentialSpec("zero", role="mystery")


def test_exp_well_bounded_by_quadrature():
    V = PotentialSpec("exp_well", {"mu": 1.0, "b": 0.1, "gamma_g": 2.0})
    r = np.geomspace(1e-3, 1e6, 400)
    bound = exp_well_bound(1.0, 0.1, 2.0)
    assert np.all(np.abs(V.value(r)) <= bound * (1 + 1e-12))
    assert abs(V.value(np.array([1e6]))[0]) < 1e-6
    total, _ = integrate.quad(lambda t: 0.1 / (1 + t) ** 2, 0, np.inf)
    assert_allclose(bound, 1 - math.exp(-total), rtol=1e-12)


@pytest.mark.parametrize("spec", [
    PotentialSpec("inverse_power", {"c": 0.3, "gamma_pow": 1.5}),
    PotentialSpec("smooth_inverse_power", {"c": 1.0, "alpha_pow": 0.7}),
    PotentialSpec("offset_inverse_power", {"c": 0.2, "p": 1.0}),
    PotentialSpec("exp_well", {"mu": 0.5, "b": 0.05, "gamma_g": 2.0, "form": "growth", "shift": -0.5}),
    PotentialSpec("exp_well", {"mu": 1.0, "b": 0.3, "gamma_g": 3.0}),
])
def test_derivative_matches_differences(spec):
    g = RadialGrid.from_rmax(3, 0, 4000, 20.0)
    r = g.r[100:-100]
    fd = fd_derivative(spec.value(g.r), g.h)[100:-100]
    assert_allclose(spec.derivative(r), fd, rtol=1e-6, atol=1e-9)


def test_zero_resonance_potential_symbolic():
    rs, lam, d = sp.symbols("r lam d", positive=True)
    u = (1 + rs**2) ** lam
    V_expr = sp.simplify((sp.diff(u, rs, 2) + (d - 1) / rs * sp.diff(u, rs)) / u)
    for dd, ll in ((3, -2.0), (4, -1.5)):
        spec = zero_resonance_potential(dd, ll)
        f = sp.lambdify(rs, V_expr.subs({d: dd, lam: ll}))
        df = sp.lambdify(rs, sp.diff(V_expr, rs).subs({d: dd, lam: ll}))
        r = np.linspace(0.05, 10, 50)
        assert_allclose(spec.value(r), f(r), rtol=1e-12)
        assert_allclose(spec.derivative(r), df(r), rtol=1e-10, atol=1e-14)


def test_repulsive_examples():
    g5 = grid(5)
    rep = check_repulsive(PotentialSpec("zero"), 5, 1.0, g5)
    assert rep.passed and rep.eta == 1.0
    rep = check_repulsive(PotentialSpec("inverse_power", {"c": 0.1, "gamma_pow": 2}), 5, 1.0, g5)
    assert rep.passed and rep.eta > 0.99
    # homogeneous with gamma equal to the exponent: the left side vanishes
    rep = check_repulsive(PotentialSpec("inverse_power", {"c": 0.1, "gamma_pow": 1.5}), 3, 1.5, grid(3))
    assert rep.passed and rep.moment == pytest.approx(0.0, abs=1e-12)
    assert rep.chi == 1


def test_repulsive_negative_fails():
    rep = check_repulsive(PotentialSpec("offset_inverse_power", {"c": -0.1, "p": 2}), 3, 1.0, grid(3))
    assert not rep.passed and rep.negative_node == 0
    with pytest.raises(CheckerError):
        check_repulsive(PotentialSpec("zero"), 2, 1.0, grid(2))


def test_repulsive_monotone():
    g = grid(5)
    big = check_repulsive(PotentialSpec("smooth_inverse_power", {"c": 1.0, "alpha_pow": 1.0}), 5, 2.0, g)
    small = check_repulsive(PotentialSpec("smooth_inverse_power", {"c": 0.5, "alpha_pow": 1.0}), 5, 2.0, g)
    assert small.eta >= big.eta


def test_beta_constant_well_is_zero():
    n = PotentialSpec("exp_well", {"mu": 1.0, "b": 0.0, "gamma_g": 2.0, "shift": -1.0}, role="n_attractive")
    rep = compute_beta_rho(n, 1.0, grid(4), d=4)
    assert rep.beta == 0.0 and rep.passed


def _well(b, mu=0.5):
    return PotentialSpec("exp_well", {"mu": mu, "b": b, "gamma_g": 2.0, "form": "growth", "shift": -0.5},
                         role="n_attractive")


def test_beta_scale_invariant():
    g = grid(4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = compute_beta_rho(_well(0.1), 1.0, g, d=4).beta
        for mu in (0.5, 2.0, 10.0):
            spec = PotentialSpec("exp_well", {"mu": 0.5 * mu, "b": 0.1, "gamma_g": 2.0, "form": "growth",
                                              "shift": -0.5 * mu}, role="n_attractive")
            assert_allclose(compute_beta_rho(spec, 1.0, g, d=4).beta, base, rtol=1e-13)


def _beta_brute(spec, rho, rmax, per_shell=20000):
    """Shell suprema of n'/|n| sampled densely and independently of the grid."""
    total = 0.0
    j0 = math.ceil(math.log2(rho)) - 1
    j = j0
    while 2.0**j < rmax:
        r = np.linspace(2.0**j, min(2.0 ** (j + 1), rmax), per_shell)[1:]
        total += 2.0 ** (j + 1) * max(0.0, float(np.max(spec.derivative(r) / np.abs(spec.value(r)))))
        j += 1
    r = np.linspace(0, rho, per_shell)[1:]
    return total + rho * max(0.0, float(np.max(spec.derivative(r) / np.abs(spec.value(r)))))


def test_beta_decreases_with_b_against_dense_sampling():
    g = grid(4, 1000, 50.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = [compute_beta_rho(_well(b), 1.0, g, d=4).beta for b in (0.1, 0.01, 0.001)]
        dense = compute_beta_rho(_well(0.1), 1.0, g, d=4, refine=10).beta
    assert vals[0] > vals[1] > vals[2] and vals[2] < 0.01
    brute = _beta_brute(_well(0.1), 1.0, g.rmax)
    # grid suprema miss the shell's inner edge by at most one spacing
    assert vals[0] <= dense <= brute * (1 + 1e-9)
    assert_allclose(dense, brute, rtol=1e-2)
    assert_allclose(vals[0], brute, rtol=6e-2)


def test_beta_sign_violation():
    with pytest.raises(SignViolation):
        compute_beta_rho(PotentialSpec("inverse_power", {"c": 1.0, "gamma_pow": 1}), 1.0, grid(4), d=4)


def test_sobolev_split():
    g = grid(3)
    assert check_sobolev_split(0.0, None, 3, g) == (0.0, True)
    c1, ok = check_sobolev_split(0.0, PotentialSpec("inverse_power", {"c": -0.1, "gamma_pow": 2}), 3, g)
    assert_allclose(c1, 0.4, rtol=1e-12) and ok
    c1, ok = check_sobolev_split(0.0, PotentialSpec("inverse_power", {"c": -0.5, "gamma_pow": 2}), 3, g)
    assert_allclose(c1, 2.0, rtol=1e-12) and not ok


def test_long_range_examples():
    g = grid(3)
    assert check_long_range(None, None, 1.0, g).a == 0.0
    rep = check_long_range(PotentialSpec("offset_inverse_power", {"c": 1.0, "p": 2}), None, 2.0, g)
    assert_allclose(rep.a, 1.0, rtol=1e-12)
    rep = check_long_range(PotentialSpec("inverse_power", {"c": 1.0, "gamma_pow": 2}), None, 1.0, g)
    assert math.isinf(rep.a) and rep.failing == "c1"


def test_long_range_refinement_stable():
    V1 = PotentialSpec("exp_well", {"mu": 1.0, "b": 0.5, "gamma_g": 2.0})
    a = [check_long_range(V1, None, 1.0, grid(3, n, 50.0)).a for n in (1000, 2000, 4000)]
    assert max(a) / min(a) - 1 < 0.01 and math.isfinite(a[0])


def test_B_tau0_examples():
    assert compute_B_tau0(0.0, 3, 1.0, 1.0) == 0.0
    assert_allclose(compute_B_tau0(0.1, 3, 1.0, 1.0), 38.52, rtol=1e-12)
    with pytest.raises(ValueError):
        compute_B_tau0(0.1, 3, 0.0, 1.0)


def test_B_tau0_monotone():
    a_vals = np.linspace(0.0, 1.0, 10)
    t_vals = np.linspace(0.1, 1.0, 10)
    B = np.array([[compute_B_tau0(a, 3, 1.0, t) for t in t_vals] for a in a_vals])
    assert np.all(np.diff(B, axis=0) >= 0)
    assert np.all(np.diff(B, axis=1) <= 1e-12)
