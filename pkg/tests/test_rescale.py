import numpy as np
import pytest

from choqlab.closed_forms import calibrate_a0, lower_extremal, talenti
from choqlab.errors import RegimeError, SolverError
from choqlab.grid import RadialField, grad_norm_sq, lp_norm, make_grid
from choqlab.rescale import (apply_plan, inverse_map, map_v, map_w_lower,
                             profile_distance, second_scaling, tau1, tau2,
                             zeta_from_center)
from choqlab.riesz import cached_kernel
from choqlab.solver import ProblemParams


def _smooth_field(grid, rng, decay=5.0):
    vals = np.abs(sum(rng.uniform(0.3, 2.0) * np.exp(
        -((grid.nodes - rng.uniform(0, 8)) / rng.uniform(0.5, 3)) ** 2)
        for _ in range(3))) * np.exp(-grid.nodes / decay)
    return RadialField(grid, vals)


def test_map_identity_at_unit_eps(grid3, rng):
    u = _smooth_field(grid3, rng)
    params = ProblemParams(3, 2.0, "lower", 2.2, 1.0, 1.0)
    w = map_w_lower(u, params)
    assert np.array_equal(w.values, u.values)
    assert w.grid.r_max == pytest.approx(grid3.r_max)


def test_map_norm_transfers_exact_route(grid3, grid5, rng):
    for _ in range(20):
        eps = float(rng.uniform(2.0, 1e4))
        u = _smooth_field(grid3, rng)
        pl = ProblemParams(3, 2.0, "lower", 2.2, 1.0, eps)
        w = map_w_lower(u, pl)
        # mass transfer for the first lower map: |w|_2^2 = eps^{-N/alpha}|u|_2^2
        assert lp_norm(w, 2) ** 2 == pytest.approx(
            eps ** -1.5 * lp_norm(u, 2) ** 2, rel=1e-12)
        u5 = _smooth_field(grid5, rng)
        pu = ProblemParams(5, 2.0, "upper", 3.0, 1.0, eps)
        wv = map_v(u5, pu)
        assert grad_norm_sq(wv) == pytest.approx(grad_norm_sq(u5), rel=1e-12)
        assert lp_norm(wv, 2) ** 2 == pytest.approx(
            eps ** (1 + pu.sigma) * lp_norm(u5, 2) ** 2, rel=1e-12)
        assert lp_norm(wv, pu.q) ** pu.q == pytest.approx(
            eps ** pu.sigma * lp_norm(u5, pu.q) ** pu.q, rel=1e-12)


def test_map_two_route_quadrature(grid3):
    # interpolation route onto a common grid agrees with the exact transfer
    eps = 40.0
    u = RadialField(grid3, np.exp(-grid3.nodes ** 2 / 8)
                    + 0.5 * np.exp(-(grid3.nodes - 2.0) ** 2 / 4))
    pl = ProblemParams(3, 2.0, "lower", 2.2, 1.0, eps)
    w_exact = map_w_lower(u, pl)
    target = make_grid(3, w_exact.grid.r_max, 6000, 1.5)
    w_interp = map_w_lower(u, pl, target_grid=target)
    direct = lp_norm(w_interp, 2) ** 2
    transferred = eps ** -1.5 * lp_norm(u, 2) ** 2
    assert abs(direct - transferred) / transferred < 1e-4


def test_map_inverse_consistency(grid3, rng):
    eps = 25.0
    u = _smooth_field(grid3, rng, decay=3.0)
    pl = ProblemParams(3, 2.0, "lower", 2.2, 1.0, eps)
    w = map_w_lower(u, pl)
    back = inverse_map(w, pl, "w_lower", target_grid=grid3)
    scale = np.max(np.abs(u.values))
    assert np.max(np.abs(back.values - u.values)) < 1e-6 * scale
    with pytest.raises(RegimeError):
        map_w_lower(u, ProblemParams(3, 2.0, "lower", 2.8, 1.0, eps))
    with pytest.raises(RegimeError):
        map_v(u, pl)


def test_zeta_center_matching(grid3):
    g = make_grid(3, 200.0, 1200, 3.0)
    k = cached_kernel(g, 2.0)
    a0 = calibrate_a0(g, 2.0, k)
    limit = lower_extremal(g, 4.6, a0)
    params = ProblemParams(3, 2.0, "lower", 2.2, 1.0, 50.0)
    # if u is the limit itself scaled by the nominal map, zeta is nominal
    u = limit.field
    plan = zeta_from_center(u, params, limit)
    rescaled = apply_plan(u, plan)
    assert rescaled.center_value() == pytest.approx(
        limit.field.center_value(), rel=1e-12)
    # larger center value gives a smaller scale
    u_big = u.copy_with(2.0 * u.values)
    plan_big = zeta_from_center(u_big, params, limit)
    assert plan_big.zeta < plan.zeta
    with pytest.raises(SolverError):
        zeta_from_center(u.copy_with(-u.values), params, limit)


def test_second_scaling_invariances(grid3, rng):
    u = _smooth_field(grid3, rng)
    limit = talenti(grid3, 1.0)
    wt, xi = second_scaling(u, limit=limit, dim_n=3)
    assert wt.center_value() == pytest.approx(limit.field.center_value(),
                                              rel=1e-9)
    assert grad_norm_sq(wt) == pytest.approx(grad_norm_sq(u), rel=1e-12)
    q = 5.0
    assert lp_norm(wt, q) ** q == pytest.approx(
        xi ** (0.5 * q - 3) * lp_norm(u, q) ** q, rel=1e-12)


def test_tau1_at_extremal_and_homogeneity(rng):
    g = make_grid(3, 200.0, 1500, 3.0)
    k = cached_kernel(g, 2.0)
    a0 = calibrate_a0(g, 2.0, k)
    u1 = lower_extremal(g, 1.0, a0).field
    assert abs(tau1(u1, k) - 1.0) < 1e-3
    c = 2.0
    t_scaled = tau1(u1.copy_with(c * u1.values), k)
    assert t_scaled == pytest.approx(c ** (2 - 2 * (5 / 3)) * tau1(u1, k),
                                     rel=1e-10)


def test_tau2_at_talenti(grid5, kernel5):
    v1 = talenti(grid5, 1.0).field
    assert abs(tau2(v1, kernel5) - 1.0) < 1e-3
    c = 2.0
    p = (5 + 2) / (5 - 2)
    t_scaled = tau2(v1.copy_with(c * v1.values), kernel5)
    assert t_scaled == pytest.approx(c ** (2 - 2 * p) * tau2(v1, kernel5),
                                     rel=1e-10)


def test_profile_distance_properties(grid3, rng):
    f = _smooth_field(grid3, rng)
    g = _smooth_field(grid3, rng)
    h = _smooth_field(grid3, rng)
    assert profile_distance(f, f, "L2") == 0.0
    assert profile_distance(f, f, "H1") == 0.0
    for norm in ("L2", "D12", "H1"):
        dfg = profile_distance(f, g, norm)
        assert dfg == pytest.approx(profile_distance(g, f, norm), rel=1e-12)
        assert dfg <= profile_distance(f, h, norm) \
            + profile_distance(h, g, norm) + 1e-12
    assert profile_distance(f, g, "Lq", q=2.5) > 0
    with pytest.raises(SolverError):
        profile_distance(f, g, "Lq")
    with pytest.raises(SolverError):
        profile_distance(f, g, "L7")


def test_profile_distance_resamples_to_finer(grid3):
    f = RadialField(grid3, np.exp(-grid3.nodes ** 2 / 8))
    coarse = make_grid(3, 30.0, 200, 1.5)
    g = RadialField(coarse, np.exp(-coarse.nodes ** 2 / 8))
    d = profile_distance(f, g, "L2")
    assert d < 1e-2 * lp_norm(f, 2)
