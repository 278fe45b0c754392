import numpy as np
import pytest
from scipy.integrate import quad

from choqlab.closed_forms import (calibrate_a0, constants, lower_extremal,
                                  rho0, rho0_upper_variant, shoot_w, talenti)
from choqlab.errors import RegimeError, ShootingError
from choqlab.grid import RadialField, grad_norm_sq, lp_norm, make_grid
from choqlab.riesz import cached_kernel, hls_sharp_constant, riesz_normalization


def test_talenti_center_values(grid3, grid5):
    assert talenti(grid3, 1.0).field.center_value() == pytest.approx(
        3 ** 0.25, rel=1e-6)
    g4 = make_grid(4, 30.0, 800, 1.5)
    assert talenti(g4, 1.0).field.center_value() == pytest.approx(
        np.sqrt(8.0), rel=1e-6)


def test_talenti_gradient_scale_invariance(grid5):
    v1 = talenti(grid5, 1.0).field
    # rho = 2 on the dilated grid represents the same gradient norm exactly
    g2 = grid5.scaled(2.0)
    v2 = talenti(g2, 2.0).field
    assert grad_norm_sq(v2) == pytest.approx(grad_norm_sq(v1), rel=1e-12)
    with pytest.raises(RegimeError):
        talenti(grid5, -1.0)


def test_calibrate_a0_two_grid_and_optimality():
    vals = []
    for n in (1000, 2000):
        g = make_grid(3, 120.0, n, 2.5)
        k = cached_kernel(g, 2.0)
        vals.append(calibrate_a0(g, 2.0, k))
    assert abs(vals[0] - vals[1]) < 5e-4 * vals[1]
    # optimality: residual grows when the amplitude is halved or doubled
    from choqlab.closed_forms import _lower_residual
    g = make_grid(3, 120.0, 1000, 2.5)
    k = cached_kernel(g, 2.0)
    a0 = vals[0]
    r0 = _lower_residual(g, k, a0)
    assert r0 < _lower_residual(g, k, a0 / 2)
    assert r0 < _lower_residual(g, k, 2 * a0)
    assert a0 > 0


def test_lower_extremal_scalings():
    g = make_grid(3, 200.0, 2000, 3.0)
    k = cached_kernel(g, 2.0)
    a0 = calibrate_a0(g, 2.0, k)
    u1 = lower_extremal(g, 1.0, a0).field
    # mass invariance of the family, exact on the dilated-grid representation
    u2_exact = lower_extremal(g.scaled(2.0), 2.0, a0).field
    m1 = lp_norm(u1, 2) ** 2
    assert abs(m1 - lp_norm(u2_exact, 2) ** 2) <= 1e-10 * m1
    # and within quadrature accuracy when both live on the same grid
    u2 = lower_extremal(g, 2.0, a0).field
    assert abs(m1 - lp_norm(u2, 2) ** 2) <= 1e-4 * m1
    q = 2.2
    lq1 = lp_norm(u1, q) ** q
    lq2 = lp_norm(u2_exact, q) ** q
    assert lq2 == pytest.approx(2.0 ** (3 - 1.5 * q) * lq1, rel=1e-8)
    assert lower_extremal(g, 1.0, a0).field.center_value() == pytest.approx(
        a0 ** 1.5, rel=1e-6)


def test_shoot_w_oracle_pohozaev():
    g = make_grid(3, 40.0, 1000, 1.5)
    prof = shoot_w(3, 2.8, 1.0, g)
    sh = prof.shoot
    assert sh.residual < 1e-8
    om = g.sphere_area
    G = om * quad(lambda r: sh.deriv(r) ** 2 * r ** 2, 1e-9, np.inf, limit=400)[0]
    M = om * quad(lambda r: sh(r) ** 2 * r ** 2, 1e-9, np.inf, limit=400)[0]
    Q = om * quad(lambda r: sh(r) ** 2.8 * r ** 2, 1e-9, np.inf, limit=400)[0]
    # interior decaying solution: both variational identities hold
    poho = 0.5 * G + 1.5 * M - 3.0 / 2.8 * Q
    assert abs(poho) / max(G, M, Q) < 1e-8
    nehari = G + M - Q
    assert abs(nehari) / Q < 1e-8
    # positivity and strict radial decrease
    assert np.all(prof.field.values > 0)
    assert np.all(np.diff(prof.field.values) < 0)


def test_shoot_w_amplitude_scaling():
    g = make_grid(3, 40.0, 800, 1.5)
    w1 = shoot_w(3, 4.0, 1.0, g)
    w4 = shoot_w(3, 4.0, 4.0, g)
    scale = 4.0 ** (-1.0 / 2.0)
    assert np.max(np.abs(w4.field.values - scale * w1.field.values)) \
        < 1e-8 * w1.shoot.w0


def test_shoot_w_sq_extremality(rng):
    g = make_grid(3, 40.0, 1200, 1.5)
    q = 2.8
    w = shoot_w(3, q, 1.0, g).field
    quot = lambda f: (grad_norm_sq(f) + lp_norm(f, 2) ** 2) / lp_norm(f, q) ** 2
    sq = quot(w)
    # random perturbations must not decrease the quotient
    for _ in range(10):
        pert = rng.normal(0, 0.02, g.node_count) * np.exp(-g.nodes / 5)
        f = RadialField(g, np.abs(w.values * (1 + pert)))
        assert quot(f) >= sq * (1 - 1e-6)


def test_shoot_w_domain_errors():
    g = make_grid(3, 40.0, 800, 1.5)
    with pytest.raises(RegimeError):
        shoot_w(3, 2.0, 1.0, g)
    with pytest.raises(RegimeError):
        shoot_w(3, 4.0, -1.0, g)


def test_constants_two_grid_agreement():
    tabs = []
    for n in (1000, 2000):
        g = make_grid(3, 200.0, n, 3.0)
        tabs.append(constants(3, 2.0, 2.2, 1.0, g, cached_kernel(g, 2.0)))
    for name in ("s1", "sq", "s_alpha", "a0"):
        a, b = getattr(tabs[0], name), getattr(tabs[1], name)
        assert abs(a - b) / abs(b) < 5e-3, name
    tab = tabs[1]
    # closed-form anchors via the sharp inequality
    s1_closed = (riesz_normalization(3, 2.0)
                 * hls_sharp_constant(3, 2.0)) ** (-3.0 / 5.0)
    assert tab.s1 == pytest.approx(s1_closed, rel=1e-3)
    # definitional limit energies
    assert tab.m_infty_lower == pytest.approx(
        2.0 / 10.0 * tab.s1 ** 2.5, rel=1e-14)
    assert tab.m_infty_upper == pytest.approx(
        4.0 / 10.0 * tab.s_alpha ** (5.0 / 4.0), rel=1e-14)


def test_constants_n5_alpha1_extremality(rng):
    g = make_grid(5, 60.0, 900, 2.0)
    k = cached_kernel(g, 1.0)
    from choqlab.riesz import d_term
    v1 = talenti(g, 1.0).field
    quot = lambda f: grad_norm_sq(f) / d_term(k, f, 6.0 / 3.0) ** (3.0 / 6.0)
    s_alpha = quot(v1)
    assert np.isfinite(s_alpha) and s_alpha > 0
    for _ in range(10):
        pert = rng.normal(0, 0.01, g.node_count) * np.exp(-g.nodes / 10)
        f = RadialField(g, np.abs(v1.values * (1 + pert)))
        assert quot(f) >= s_alpha * (1 - 1e-6)


def test_rho0_identity_and_monotonicity(grid5):
    r_a = rho0("upper", 5, 2.0, 3.0, 1.0, grid5)
    r_b = rho0_upper_variant(5, 2.0, 3.0, 1.0, grid5)
    assert abs(r_a - r_b) <= 1e-12 * r_a
    # lower-regime scale grows as the local coupling shrinks
    g = make_grid(3, 200.0, 1200, 3.0)
    k = cached_kernel(g, 2.0)
    a0 = calibrate_a0(g, 2.0, k)
    r1 = rho0("lower", 3, 2.0, 2.2, 1.0, g, a0=a0)
    r_small_a = rho0("lower", 3, 2.0, 2.2, 0.5, g, a0=a0)
    assert r_small_a > r1
    # two-grid agreement of the upper value
    g5b = make_grid(5, 40.0, 1800, 2.0)
    r_c = rho0("upper", 5, 2.0, 3.0, 1.0, g5b)
    assert abs(r_a - r_c) / r_c < 5e-3


def test_rho0_regime_bounds(grid5, grid3):
    with pytest.raises(RegimeError):
        rho0("upper", 4, 2.0, 3.0, 1.0, grid3)   # needs N >= 5
    with pytest.raises(RegimeError):
        rho0("lower", 3, 2.0, 3.0, 1.0, grid3)   # q above the border
    with pytest.raises(RegimeError):
        rho0("sideways", 3, 2.0, 2.2, 1.0, grid3)
