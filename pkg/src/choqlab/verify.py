"""Acceptance harness: every criterion as a runnable check.

Each criterion function returns CheckResult rows; `run_all` executes the
full suite (used by the CLI verify-all mode and by the acceptance test
module).  Sweeps are shared between criteria through a lazy context.

One criterion is knowingly red: the unit-scale Talenti profile solves
the critical nonlocal equation only for alpha = 2; for alpha = 1 its
nonlocal term is off by the constant factor recorded in the decisions
ledger, so the alpha = 1 residual rows cannot reach 1e-3.  Those rows
carry expected_defect = True.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import closed_forms
from .asymptotics import (GridSpec, SweepConfig, compare, constants_for,
                          fit_power_law, mass_curve, sweep)
from .grid import RadialField, grad_norm_sq, lp_norm, make_grid
from .rescale import second_scaling
from .riesz import (cached_kernel, d_term, hls_sharp_constant, riesz_apply,
                    riesz_normalization)
from .solver import (ProblemParams, SolveOptions, nehari_project,
                     solve_ground_state)

__all__ = ["CheckResult", "VerifyContext", "run_all", "CRITERIA"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    expected_defect: bool = False


# shared experiment definitions (grids documented per experiment)
SWEEP_LOWER_RIESZ = dict(dim_n=3, alpha=2.0, regime="lower", q=2.2, a_coef=1.0,
                         epsilons=list(np.geomspace(1e2, 1e4, 12)),
                         grid=GridSpec(2000, 600.0, 3.0))
SWEEP_LOWER_LOCAL = dict(dim_n=3, alpha=2.0, regime="lower", q=2.8, a_coef=1.0,
                         epsilons=list(np.geomspace(1e5, 1e8, 12)),
                         grid=GridSpec(1600, 100.0, 2.0))
SWEEP_UPPER_N5 = dict(dim_n=5, alpha=2.0, regime="upper", q=3.0, a_coef=1.0,
                      epsilons=list(np.geomspace(1e2, 1e6, 12)),
                      grid=GridSpec(1800, 120.0, 2.5))
SWEEP_UPPER_N3 = dict(dim_n=3, alpha=2.0, regime="upper", q=5.0, a_coef=1.0,
                      epsilons=list(np.geomspace(1e2, 1e4, 12)),
                      grid=GridSpec(2200, 240.0, 3.5),
                      constants_grid=GridSpec(2600, 20000.0, 5.0))
SWEEP_UPPER_N4 = dict(dim_n=4, alpha=2.0, regime="upper", q=3.5, a_coef=1.0,
                      epsilons=list(np.geomspace(1e2, 1e5, 12)),
                      grid=GridSpec(1800, 120.0, 2.5))


class VerifyContext:
    def __init__(self):
        self._lock = threading.Lock()
        self._sweeps = {}

    def sweep_result(self, key):
        spec = {"lower_riesz": SWEEP_LOWER_RIESZ, "lower_local": SWEEP_LOWER_LOCAL,
                "upper_n5": SWEEP_UPPER_N5, "upper_n3": SWEEP_UPPER_N3,
                "upper_n4": SWEEP_UPPER_N4}[key]
        with self._lock:
            job = self._sweeps.get(key)
        if job is None:
            result = sweep(SweepConfig(**spec))
            with self._lock:
                self._sweeps[key] = result
            return result
        return job

    def prebuild(self, threads=1):
        keys = ["lower_riesz", "lower_local", "upper_n5", "upper_n3", "upper_n4"]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=min(threads, len(keys))) as pool:
                list(pool.map(self.sweep_result, keys))
        else:
            for k in keys:
                self.sweep_result(k)


def _pointwise_neg_laplacian(grid, values):
    """-(u'' + (N-1)/r u') at interior nodes by 3-point differences."""
    r = grid.nodes
    v = values
    a = r[1:-1] - r[:-2]
    b = r[2:] - r[1:-1]
    d2 = 2.0 * (a * v[2:] + b * v[:-2] - (a + b) * v[1:-1]) / (a * b * (a + b))
    d1 = (a * a * v[2:] - b * b * v[:-2] + (b * b - a * a) * v[1:-1]) \
        / (a * b * (a + b))
    return -(d2 + (grid.dim_n - 1) / r[1:-1] * d1)


def _talenti_residual(dim_n, alpha, grid, kernel):
    """Relative L2 residual of -Delta V = (I_alpha*V^{p*}) V^{p*-1} at V_1.

    Measured over the interior nodes (the truncation boundary is a
    modeling artifact, not part of the equation).
    """
    v = closed_forms.talenti(grid, 1.0).field.values
    pstar = (dim_n + alpha) / (dim_n - 2.0)
    rhs = (kernel.matrix @ v ** pstar) * v ** (pstar - 1.0)
    lap = _pointwise_neg_laplacian(grid, v)
    w = grid.weights[1:-1]
    num = w @ (lap - rhs[1:-1]) ** 2
    den = w @ rhs[1:-1] ** 2
    return float(np.sqrt(num / den))


def criterion_1(ctx) -> list:
    """Closed-form residuals of the limit profiles."""
    out = []
    for dim_n in (3, 4, 5):
        grid = make_grid(dim_n, 60.0, 2000, 2.0)
        for alpha in (1.0, 2.0):
            kern = cached_kernel(grid, alpha)
            res = _talenti_residual(dim_n, alpha, grid, kern)
            ok = res < 1e-3
            out.append(CheckResult(
                f"1.talenti_residual_N{dim_n}_a{alpha:g}", ok,
                f"rel L2 residual {res:.3e} (tol 1e-3)",
                expected_defect=(alpha == 1.0)))
    grid = make_grid(3, 60.0, 2000, 2.0)
    kern = cached_kernel(grid, 2.0)
    a0 = closed_forms.calibrate_a0(grid, 2.0, kern)
    res = closed_forms._lower_residual(grid, kern, a0)
    out.append(CheckResult("1.lower_extremal_residual_N3_a2", res < 1e-3,
                           f"rel residual {res:.3e} at a0={a0:.6f} (tol 1e-3)"))
    return out


def criterion_2(ctx) -> list:
    """Riesz kernel correctness: Newtonian ball, far field, sharp inequality."""
    out = []
    grid = make_grid(3, 10.0, 2000, 1.0)
    kern = cached_kernel(grid, 2.0)
    ball = RadialField(grid, (grid.nodes <= 1.0).astype(float))
    pot = riesz_apply(kern, ball).values
    r = grid.nodes
    exact = np.where(r >= 1.0, 1.0 / (3.0 * r), 0.5 - r ** 2 / 6.0)
    mask = np.abs(r - 1.0) > 0.1
    err = float(np.max(np.abs(pot - exact)[mask] / exact[mask]))
    out.append(CheckResult("2.newtonian_ball", err < 1e-4,
                           f"max rel err {err:.2e} away from the edge (tol 1e-4)"))

    worst = 0.0
    for dim_n, alpha in ((3, 2.0), (4, 1.0), (5, 2.0)):
        g = make_grid(dim_n, 12.0, 2000, 1.0)
        k = cached_kernel(g, alpha)
        supp = 2.0
        f = np.where(g.nodes <= supp, (1.0 - (g.nodes / supp) ** 2) ** 2, 0.0)
        f /= g.sphere_area * (g.weights @ f)
        pot = k.matrix @ f
        i_far = int(np.argmin(np.abs(g.nodes - 5.0 * supp)))
        pred = riesz_normalization(dim_n, alpha) * g.nodes[i_far] ** (alpha - dim_n)
        worst = max(worst, abs(pot[i_far] - pred) / pred)
    out.append(CheckResult("2.far_field_monopole", worst < 0.02,
                           f"worst rel dev {worst:.4f} at 5x support (tol 2%)"))

    dim_n, alpha = 3, 1.0
    g = make_grid(dim_n, 30.0, 900, 2.0)
    k = cached_kernel(g, alpha)
    p = (dim_n + alpha) / dim_n
    bound_const = riesz_normalization(dim_n, alpha) * hls_sharp_constant(dim_n, alpha)
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(50):
        c = rng.uniform(0.3, 3.0, 3)
        wdt = rng.uniform(0.5, 4.0, 3)
        x0 = rng.uniform(0.0, 6.0, 3)
        vals = sum(ci * np.exp(-((g.nodes - xi) / wi) ** 2)
                   for ci, wi, xi in zip(c, wdt, x0))
        fld = RadialField(g, vals)
        ratio = d_term(k, fld, p) / (bound_const * lp_norm(fld, 2) ** (2 * p))
        worst = max(worst, ratio)
    out.append(CheckResult("2.hls_inequality", worst <= 1.0 + 1e-8,
                           f"worst D/(AC|f|^2p) = {worst:.6f} over 50 fields"))
    return out


def _random_positive_init(grid, rng):
    c = rng.uniform(0.5, 2.0, 3)
    wdt = rng.uniform(0.5, 3.0, 3)
    vals = sum(ci * np.exp(-(grid.nodes / wi) ** 2) for ci, wi in zip(c, wdt))
    return RadialField(grid, vals)


def criterion_3(ctx) -> list:
    """Solver certificates and multi-start energy agreement."""
    out = []
    cfgd = SWEEP_LOWER_RIESZ
    grid = cfgd["grid"].build(cfgd["dim_n"])
    kern = cached_kernel(grid, cfgd["alpha"])
    rng = np.random.default_rng(7)
    worst_neh = worst_poh = worst_multi = 0.0
    for eps in (cfgd["epsilons"][0], cfgd["epsilons"][-1]):
        params = ProblemParams(cfgd["dim_n"], cfgd["alpha"], "lower",
                               cfgd["q"], cfgd["a_coef"], eps)
        energies = []
        for k in range(3):
            init = _random_positive_init(grid, rng)
            gs = solve_ground_state(params, init=init, kernel=kern)
            energies.append(gs.functionals["energy"])
            worst_neh = max(worst_neh, gs.nehari_residual)
            worst_poh = max(worst_poh, gs.pohozaev_residual)
        spread = (max(energies) - min(energies)) / abs(energies[0])
        worst_multi = max(worst_multi, spread)
    grid5 = SWEEP_UPPER_N5["grid"].build(5)
    gs_up = solve_ground_state(
        ProblemParams(5, 2.0, "upper", 3.0, 1.0, 1e3),
        grid=grid5, kernel=cached_kernel(grid5, 2.0))
    worst_neh = max(worst_neh, gs_up.nehari_residual)
    worst_poh = max(worst_poh, gs_up.pohozaev_residual)
    out.append(CheckResult("3.nehari_certificate", worst_neh < 1e-10,
                           f"worst Nehari residual {worst_neh:.2e} (tol 1e-10)"))
    out.append(CheckResult("3.pohozaev_certificate", worst_poh < 1e-6,
                           f"worst dilation residual {worst_poh:.2e} (tol 1e-6)"))
    out.append(CheckResult("3.multistart_agreement", worst_multi < 1e-5,
                           f"worst energy spread {worst_multi:.2e} over 3 "
                           "random inits at both sweep endpoints (tol 1e-5)"))
    return out


def _row_check(rep, name, crit, label=None):
    row = rep.row(name)
    return CheckResult(f"{crit}.{label or name}", row.passed,
                       f"fitted {row.fitted:.6g} vs predicted "
                       f"{row.predicted:.6g} (tol {row.tol:g}, model {row.model})")


def criterion_4(ctx) -> list:
    """Lower-regime exponents and the refined mass prefactor."""
    sw = ctx.sweep_result("lower_riesz")
    rep = compare(sw, exponent_tol=0.10, ratio_tol=0.15)
    out = [_row_check(rep, n, "4") for n in
           ("center", "l2_sq", "grad_sq", "d_term", "l2_prefactor")]
    return out


def criterion_5(ctx) -> list:
    """Second lower sub-case: solved-system limits and energy prefactor."""
    sw = ctx.sweep_result("lower_local")
    rep = compare(sw)
    return [_row_check(rep, n, "5") for n in
            ("abc_grad", "abc_l2", "abc_lq", "energy_prefactor")]


def criterion_6(ctx) -> list:
    """Upper regime N=5: energy-gap rate and profile convergence."""
    sw = ctx.sweep_result("upper_n5")
    rep = compare(sw, ratio_tol=0.15)
    out = [_row_check(rep, "gap_upper", "6")]
    d_last = rep.extras["dist_h1_last"]
    out.append(CheckResult("6.profile_h1_distance", d_last < 5e-2,
                           f"relative H1 distance to the limit profile "
                           f"{d_last:.4f} at the largest eps (tol 5e-2)"))
    out.append(CheckResult("6.profile_h1_monotone",
                           rep.extras["dist_h1_tail_decreasing"],
                           "H1 distance decreasing over the last 4 points"))
    return out


def _tail_exponent(sw):
    gs = sw.final_state
    nd = gs.params.dim_n
    wt, xi = second_scaling(gs.frame_field, limit=sw.limit, dim_n=nd)
    r = wt.grid.nodes
    v = wt.values
    sigma = gs.params.sigma
    r_transition = gs.params.epsilon ** (sigma / 2.0) / xi
    hi = min(0.4 * r_transition, 0.4 * wt.grid.r_max)
    lo = 4.0
    mask = (r > lo) & (r < hi) & (v > 0)
    slope = np.polyfit(np.log(r[mask]), np.log(v[mask]), 1)[0]
    return -float(slope)


def criterion_7(ctx) -> list:
    """Upper regime N in {3, 4}: second-scaling growth, limits, tail decay."""
    out = []
    for key, crit in (("upper_n3", "7.N3"), ("upper_n4", "7.N4")):
        sw = ctx.sweep_result(key)
        rep = compare(sw, exponent_tol=0.10)
        out.append(_row_check(rep, "tilde_l2_sq", crit, "tilde_mass_growth"))
        out.append(_row_check(rep, "grad_sq_limit", crit))
        out.append(_row_check(rep, "d_term_limit", crit))
        nd = sw.config.dim_n
        tail = _tail_exponent(sw)
        need = nd - 2 - 0.2
        out.append(CheckResult(f"{crit}.tail_decay", tail >= need,
                               f"fitted tail exponent {tail:.3f} "
                               f">= N-2-0.2 = {need:.1f}"))
    return out


def criterion_8(ctx) -> list:
    """Mass curves: gradient growth in the mass, limit constrained energy."""
    out = []
    sw = ctx.sweep_result("lower_riesz")
    mc = mass_curve(sw)
    grads = [e.grad_sq for e in sw.ok_entries]
    slope, _, _ = fit_power_law(list(zip([a for a, _, _ in mc], grads)))
    n, q = sw.config.dim_n, sw.config.q
    pred = 2.0 * (2 * n - q * (n - 2)) / (4.0 - n * (q - 2.0))
    rel = abs(slope - pred) / pred
    out.append(CheckResult("8.grad_vs_mass_exponent", rel < 0.10,
                           f"fitted {slope:.4f} vs predicted {pred:.4f} "
                           f"(rel {rel:.3f}, tol 10%)"))
    sw_u = ctx.sweep_result("upper_n5")
    mc_u = mass_curve(sw_u)
    a_min = min(mc_u, key=lambda t: t[0])
    target = sw_u.constants.m_infty_upper
    rel = abs(a_min[2] - target) / target
    out.append(CheckResult("8.energy_limit_small_mass", rel < 0.05,
                           f"E(u_a) = {a_min[2]:.4f} at a = {a_min[0]:.2e} vs "
                           f"limit {target:.4f} (rel {rel:.3f}, tol 5%)"))
    return out


def criterion_9(ctx) -> list:
    """Standalone property suites (no sweeps)."""
    from .rescale import map_v, map_w_lower
    from .solver import action, frame_for
    out = []

    # norm-transfer identities on random fields, exact dilated-grid route
    rng = np.random.default_rng(99)
    grid = make_grid(3, 40.0, 800, 1.5)
    grid5 = make_grid(5, 40.0, 800, 1.5)
    worst = 0.0
    for i in range(100):
        vals = np.abs(sum(rng.uniform(0.2, 2) * np.exp(
            -((grid.nodes - rng.uniform(0, 10)) / rng.uniform(0.5, 3)) ** 2)
            for _ in range(3)))
        u = RadialField(grid, vals)
        u5 = RadialField(grid5, vals)
        eps = float(rng.uniform(5.0, 5e3))
        pl = ProblemParams(3, 2.0, "lower", 2.2, 1.0, eps)
        w = map_w_lower(u, pl)
        worst = max(worst, abs(lp_norm(w, 2) ** 2
                               - eps ** (-3 / 2.0) * lp_norm(u, 2) ** 2)
                    / lp_norm(w, 2) ** 2)
        pu = ProblemParams(5, 2.0, "upper", 3.0, 1.0, eps)
        wv = map_v(u5, pu)
        worst = max(worst, abs(grad_norm_sq(wv) - grad_norm_sq(u5))
                    / grad_norm_sq(wv))
        worst = max(worst, abs(lp_norm(wv, 2) ** 2
                               - eps ** (1 + pu.sigma) * lp_norm(u5, 2) ** 2)
                    / lp_norm(wv, 2) ** 2)
    out.append(CheckResult("9.norm_transfers", worst < 1e-8,
                           f"worst transfer identity defect {worst:.2e} "
                           "over 100 random fields (tol 1e-8)"))

    # fiber-map uniqueness: the ray action has exactly one interior maximum
    g = make_grid(3, 30.0, 600, 1.5)
    k = cached_kernel(g, 2.0)
    params = ProblemParams(3, 2.0, "lower", 2.2, 1.0, 10.0)
    bad = 0
    for i in range(10):
        vals = np.abs(sum(rng.uniform(0.2, 2) * np.exp(
            -((g.nodes - rng.uniform(0, 8)) / rng.uniform(0.5, 3)) ** 2)
            for _ in range(3)))
        u = RadialField(g, vals)
        t_star, _ = nehari_project(params, u, k)
        ts = np.geomspace(t_star / 50, t_star * 50, 401)
        vals_i = np.array([action(params, u.copy_with(t * u.values), k)
                           for t in ts])
        n_max = int(np.sum((vals_i[1:-1] > vals_i[:-2])
                           & (vals_i[1:-1] > vals_i[2:])))
        i_max = int(np.argmax(vals_i))
        if n_max != 1 or abs(np.log(ts[i_max] / t_star)) > 0.05:
            bad += 1
    out.append(CheckResult("9.fiber_uniqueness", bad == 0,
                           f"{bad} of 10 ray scans failed the unique-maximum "
                           "or maximizer-location check"))

    # radial decay bounds on produced profiles, C fitted on the coarse grid
    checks = []
    for maker, h1 in (
            (lambda gg: closed_forms.lower_extremal(
                gg, 1.0, closed_forms.calibrate_a0(gg, 2.0,
                                                   cached_kernel(gg, 2.0))).field, True),
            (lambda gg: closed_forms.shoot_w(3, 2.8, 1.0, gg).field, True),
    ):
        ga = make_grid(3, 60.0, 1000, 2.0)
        gb = make_grid(3, 60.0, 2000, 2.0)
        ua, ub = maker(ga), maker(gb)
        norm_a = np.sqrt(grad_norm_sq(ua) + lp_norm(ua, 2) ** 2)
        mask_a = ga.nodes >= 1.0
        c_fit = float(np.max(np.abs(ua.values[mask_a])
                             * ga.nodes[mask_a] ** 1.0) / norm_a)
        norm_b = np.sqrt(grad_norm_sq(ub) + lp_norm(ub, 2) ** 2)
        mask_b = gb.nodes >= 1.0
        c_chk = float(np.max(np.abs(ub.values[mask_b])
                             * gb.nodes[mask_b] ** 1.0) / norm_b)
        checks.append(c_chk <= 1.05 * c_fit)
    # D^{1,2} bound for the Talenti profile (N = 5)
    ga = make_grid(5, 60.0, 1000, 2.0)
    gb = make_grid(5, 60.0, 2000, 2.0)
    for gg, store in ((ga, "fit"), (gb, "chk")):
        v = closed_forms.talenti(gg, 1.0).field
        mask = gg.nodes >= 1.0
        c = float(np.max(np.abs(v.values[mask]) * gg.nodes[mask] ** 1.5)
                  / np.sqrt(grad_norm_sq(v)))
        if store == "fit":
            c_fit5 = c
        else:
            checks.append(c <= 1.05 * c_fit5)
    out.append(CheckResult("9.radial_decay_bounds", all(checks),
                           f"{sum(checks)}/{len(checks)} grid-stable decay "
                           "bound checks passed"))

    # reproducibility: identical runs give byte-identical artifacts
    import os
    import tempfile
    from .cli import RunConfig, run
    payloads = []
    for tag in ("a", "b"):
        with tempfile.TemporaryDirectory() as td:
            cfg = RunConfig(mode="sweep", dim_n=5, alpha=2.0, regime="upper",
                            q=3.0, a_coef=1.0, grid=GridSpec(900, 100.0, 2.5),
                            eps_min=1e2, eps_max=1e3, num_points=6,
                            out_dir=td, seed=1)
            run(cfg)
            with open(os.path.join(td, "sweep.csv"), "rb") as fh:
                csv_bytes = fh.read()
            with open(os.path.join(td, "scaling_report.json"), "rb") as fh:
                json_bytes = fh.read()
            payloads.append((csv_bytes, json_bytes))
    same = payloads[0] == payloads[1]
    out.append(CheckResult("9.reproducibility", same,
                           "two identical runs produced byte-identical "
                           "CSV and JSON artifacts" if same else
                           "artifacts differ between identical runs"))
    return out


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


def run_all(threads: int = 1, ctx: VerifyContext | None = None) -> list:
    ctx = ctx or VerifyContext()
    ctx.prebuild(threads=threads)
    results = []
    for crit in CRITERIA:
        results.extend(crit(ctx))
    return results
