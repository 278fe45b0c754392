import numpy as np
import pytest
from scipy.integrate import quad

from choqlab.errors import GridError
from choqlab.grid import (RadialField, eval_at, grad_norm_sq, lp_norm,
                          make_grid, unit_sphere_area)


def test_uniform_midpoint_example():
    g = make_grid(3, 10.0, 4, 1.0)
    assert np.allclose(g.nodes, [1.25, 3.75, 6.25, 8.75])
    assert abs(g.weights.sum() - 1000.0 / 3.0) <= 1e-12 * 1000 / 3


def test_weight_sum_exact_n4():
    g = make_grid(4, 50.0, 2000, 1.0)
    target = 50.0 ** 4 / 4.0
    assert abs(g.weights.sum() - target) <= 1e-12 * target


def test_graded_grid_spacing_and_mass():
    g = make_grid(3, 20.0, 500, 3.0)
    target = 20.0 ** 3 / 3.0
    # exactness of the constant against an adaptive quadrature oracle
    oracle = quad(lambda r: r ** 2, 0.0, 20.0)[0]
    assert abs(g.weights.sum() - target) <= 1e-12 * target
    assert abs(g.weights.sum() - oracle) <= 1e-10 * target
    # cubic edge grading: last/first spacing ratio ~ stretch * n^{stretch-1}
    ratio = (g.edges[-1] - g.edges[-2]) / (g.edges[1] - g.edges[0])
    assert 0.9 * 3 * 500 ** 2 < ratio < 1.1 * 3 * 500 ** 2


def test_moment_exactness_deg2():
    g = make_grid(3, 10.0, 200, 1.0)
    for k in range(3):
        want = 10.0 ** (3 + k) / (3 + k)
        got = g.weights @ g.nodes ** k
        assert abs(got - want) <= 1e-10 * want


def test_make_grid_rejects_bad_args():
    for args in [(2, 10.0, 100, 1.0), (3, -1.0, 100, 1.0),
                 (3, np.inf, 100, 1.0), (3, 10.0, 1, 1.0),
                 (3, 10.0, 100, 0.5)]:
        with pytest.raises(GridError):
            make_grid(*args)


def test_lp_norm_constant_unit_ball():
    g = make_grid(3, 1.0, 400, 1.0)
    u = RadialField(g, np.ones(400))
    assert abs(lp_norm(u, 2) - np.sqrt(4 * np.pi / 3)) < 1e-12


def test_lp_norm_gaussian():
    g = make_grid(3, 12.0, 4000, 1.0)
    u = RadialField(g, np.exp(-g.nodes ** 2 / 2))
    assert abs(lp_norm(u, 2) - np.pi ** 0.75) < 2e-5 * np.pi ** 0.75


def test_lp_norm_talenti_vs_quadrature_oracle():
    # N = 5 profile at the critical Sobolev power, against adaptive quadrature
    g = make_grid(5, 25.0, 12000, 1.2)
    amp = 15.0 ** 0.75
    u = RadialField(g, amp * (1 + g.nodes ** 2) ** -1.5)
    p = 10.0 / 3.0
    oracle = (unit_sphere_area(5)
              * quad(lambda r: (amp * (1 + r * r) ** -1.5) ** p * r ** 4,
                     0, np.inf, limit=300)[0]) ** (1 / p)
    assert abs(lp_norm(u, p) - oracle) < 1e-6 * oracle


def test_lp_norm_monotone_in_magnitude(rng):
    g = make_grid(3, 10.0, 300, 1.0)
    v = rng.uniform(0.1, 1.0, 300)
    u = RadialField(g, v)
    bigger = RadialField(g, v * rng.uniform(1.0, 2.0, 300))
    for p in (1.0, 2.0, 3.7):
        assert lp_norm(u, p) <= lp_norm(bigger, p)
    with pytest.raises(GridError):
        lp_norm(u, 0.5)


def test_grad_norm_constant_is_zero():
    g = make_grid(3, 10.0, 200, 1.0)
    u = RadialField(g, np.full(200, 2.5))
    assert grad_norm_sq(u) == 0.0


def test_grad_norm_gaussian_and_order():
    exact = 1.5 * np.pi ** 1.5
    errs = []
    for n in (250, 500, 1000, 2000):
        g = make_grid(3, 12.0, n, 1.0)
        u = RadialField(g, np.exp(-g.nodes ** 2 / 2))
        errs.append(abs(grad_norm_sq(u) - exact))
    assert errs[-1] < 1e-4 * exact
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((1.8 < orders) & (orders < 2.2))


def test_grad_norm_talenti_n5_vs_quadrature():
    g = make_grid(5, 200.0, 3000, 3.0)
    amp = 15.0 ** 0.75
    u = RadialField(g, amp * (1 + g.nodes ** 2) ** -1.5)
    dv = lambda r: -3 * amp * r * (1 + r * r) ** -2.5
    oracle = unit_sphere_area(5) * quad(lambda r: dv(r) ** 2 * r ** 4,
                                        0, np.inf, limit=300)[0]
    assert abs(grad_norm_sq(u) - oracle) < 2e-4 * oracle


def test_eval_at_nodes_exact_and_constant():
    g = make_grid(3, 10.0, 500, 1.0)
    u = RadialField(g, np.full(500, 3.14))
    assert eval_at(u, 4.5) == pytest.approx(3.14, abs=1e-12)
    v = RadialField(g, np.sin(g.nodes) + 2.0)
    sub = g.nodes[50:60]
    assert np.max(np.abs(eval_at(v, sub) - v.values[50:60])) == 0.0


def test_eval_at_talenti_between_nodes():
    g = make_grid(5, 10.0, 8000, 1.0)
    amp = 15.0 ** 0.75
    u = RadialField(g, amp * (1 + g.nodes ** 2) ** -1.5)
    rq = np.array([0.1234, 1.618, 3.21, 7.77])
    exact = amp * (1 + rq ** 2) ** -1.5
    assert np.max(np.abs(eval_at(u, rq) - exact)) < 1e-8


def test_eval_at_tail_model():
    g = make_grid(3, 10.0, 1000, 1.0)
    u = RadialField(g, 2.0 / g.nodes)  # c r^{-(N-2)} with c = 2
    assert eval_at(u, 15.0) == pytest.approx(2.0 / 15.0, rel=1e-6)
    with pytest.raises(GridError):
        eval_at(u, -1.0)


def test_scaled_grid_consistency():
    g = make_grid(3, 10.0, 300, 2.0)
    gs = g.scaled(2.5)
    assert gs.r_max == pytest.approx(25.0)
    target = 25.0 ** 3 / 3
    assert abs(gs.weights.sum() - target) < 1e-12 * target
    assert g.same_family(gs) and gs.same_family(g)
