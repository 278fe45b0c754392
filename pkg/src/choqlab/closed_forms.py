"""Explicit limit objects and variational constants.

Covers the algebraic Lorentzian ground state U_rho of the lower-critical
integral equation, the Talenti profile V_rho of the critical Choquard
equation, the positive decaying solution W of -Delta W + W = A W^{q-1}
by shooting, and the derived constants (S_1, S_q, S_alpha, sharp HLS
constant, limit energies, matching scales rho_0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CalibrationError, RegimeError, ShootingError
from .grid import RadialGrid, RadialField, grad_norm_sq, lp_norm
from .riesz import RieszKernel, build_kernel, d_term, hls_sharp_constant

__all__ = [
    "LimitProfile",
    "ConstantsTable",
    "talenti",
    "lower_extremal",
    "calibrate_a0",
    "shoot_w",
    "constants",
    "rho0",
    "ShootResult",
]

KIND_LOWER_EXTREMAL = "lower-extremal"
KIND_TALENTI = "talenti"
KIND_LOCAL_GROUND_STATE = "local-ground-state"
KIND_MIXED_LIMIT = "mixed-limit"


@dataclass(eq=False)
class LimitProfile:
    kind: str
    rho: float
    field: RadialField


@dataclass
class ConstantsTable:
    """Variational constants for one (N, alpha, q, A) tuple.

    m_infty_lower = alpha/(2(N+alpha)) * s1^{(N+alpha)/alpha} and
    m_infty_upper = (2+alpha)/(2(N+alpha)) * s_alpha^{(N+alpha)/(2+alpha)}
    hold by construction.
    """

    dim_n: int
    alpha: float
    q: float
    a_coef: float
    s1: float
    sq: float
    s_alpha: float
    hls_sharp: float
    a0: float
    m_infty_lower: float
    m_infty_upper: float
    extras: dict = field(default_factory=dict)


def talenti(grid: RadialGrid, rho: float) -> LimitProfile:
    """Talenti profile V_rho(r) = rho^{-(N-2)/2} [N(N-2)]^{(N-2)/4} (1+(r/rho)^2)^{-(N-2)/2}."""
    if not rho > 0:
        raise RegimeError("rho must be positive")
    nd = grid.dim_n
    amp = (nd * (nd - 2)) ** ((nd - 2) / 4.0) * rho ** (-(nd - 2) / 2.0)
    vals = amp * (1.0 + (grid.nodes / rho) ** 2) ** (-(nd - 2) / 2.0)
    return LimitProfile(KIND_TALENTI, float(rho), RadialField(grid, vals))


def lower_extremal(grid: RadialGrid, rho: float, a0: float) -> LimitProfile:
    """U_rho(r) = rho^{-N/2} (a0 / (1 + (r/rho)^2))^{N/2}; mass-invariant in rho."""
    if not rho > 0:
        raise RegimeError("rho must be positive")
    nd = grid.dim_n
    vals = rho ** (-nd / 2.0) * (a0 / (1.0 + (grid.nodes / rho) ** 2)) ** (nd / 2.0)
    return LimitProfile(KIND_LOWER_EXTREMAL, float(rho), RadialField(grid, vals))


def _lower_residual(grid, kernel, a0):
    """L2-relative residual of U = (I_alpha*|U|^p) |U|^{p-2} U at p = (N+alpha)/N."""
    nd = grid.dim_n
    p = (nd + kernel.alpha) / nd
    u = lower_extremal(grid, 1.0, a0).field.values
    rhs = (kernel.matrix @ u ** p) * u ** (p - 1.0)
    num = grid.weights @ (u - rhs) ** 2
    den = grid.weights @ u ** 2
    return float(np.sqrt(num / den))


def calibrate_a0(grid: RadialGrid, alpha: float, kernel: RieszKernel | None = None) -> float:
    """Amplitude A_0 minimizing the lower-critical equation residual.

    Golden-section search on log(A_0), seeded by the pointwise ratio of the
    two sides of the equation; deterministic.
    """
    if kernel is None:
        kernel = build_kernel(grid, alpha)
    nd = grid.dim_n
    p = (nd + alpha) / nd
    shape = (1.0 + grid.nodes ** 2) ** (-nd / 2.0)
    rhs = (kernel.matrix @ shape ** p) * shape ** (p - 1.0)
    core = grid.nodes < 0.5 * grid.r_max
    ratio = np.median(rhs[core] / shape[core])
    if not ratio > 0:
        raise CalibrationError("could not seed the amplitude bracket")
    seed = ratio ** (-1.0 / alpha)

    f = lambda loga: _lower_residual(grid, kernel, np.exp(loga))
    lo, hi = np.log(seed / 4.0), np.log(seed * 4.0)
    f_seed = f(np.log(seed))
    if not (f_seed < f(lo) and f_seed < f(hi)):
        raise CalibrationError("no residual-decreasing bracket around the seed amplitude")
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-12:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    a0 = float(np.exp(0.5 * (a + b)))
    if _lower_residual(grid, kernel, a0) > 1e-3:
        raise CalibrationError("calibrated amplitude leaves residual above 1e-3")
    return a0


@dataclass(eq=False)
class ShootResult:
    """Dense solution of W'' + (N-1)/r W' = W - A W^{q-1} plus tail model."""

    dim_n: int
    q: float
    a_coef: float
    w0: float
    r_match: float
    tail_coef: float
    _sol: object
    residual: float

    def _eval(self, r, component):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        nd = self.dim_n
        near = r <= self._sol.t[-1]
        inner = near & (r >= self._sol.t[0])
        tiny = r < self._sol.t[0]
        if np.any(inner):
            out[inner] = self._sol.sol(r[inner])[component]
        if np.any(tiny):
            w2 = (self.w0 - self.a_coef * self.w0 ** (self.q - 1.0)) / nd
            out[tiny] = (self.w0 + 0.5 * w2 * r[tiny] ** 2) if component == 0 \
                else w2 * r[tiny]
        far = ~near
        if np.any(far):
            rf = r[far]
            tail = self.tail_coef * rf ** (-(nd - 1) / 2.0) * np.exp(-rf)
            out[far] = tail if component == 0 else -tail * (1.0 + (nd - 1) / (2.0 * rf))
        return out

    def __call__(self, r):
        out = self._eval(r, 0)
        return out if np.ndim(r) else float(out[0])

    def deriv(self, r):
        out = self._eval(r, 1)
        return out if np.ndim(r) else float(out[0])


def _shoot_once(dim_n, q, a_coef, w0, r_end, dense=False):
    """Integrate the radial ODE from w0; classify overshoot/undershoot."""
    nd = dim_n

    def rhs(r, y):
        w, dw = y
        return [dw, w - a_coef * np.sign(w) * np.abs(w) ** (q - 1.0) - (nd - 1) / r * dw]

    def ev_cross(r, y):
        return y[0]
    ev_cross.terminal = True
    ev_cross.direction = -1

    def ev_turn(r, y):
        return y[1]
    ev_turn.terminal = True
    ev_turn.direction = 1

    r0 = 1e-8
    w2 = (w0 - a_coef * w0 ** (q - 1.0)) / nd
    y0 = [w0 + 0.5 * w2 * r0 ** 2, w2 * r0]
    sol = solve_ivp(rhs, (r0, r_end), y0, method="DOP853",
                    rtol=1e-12, atol=1e-30, dense_output=dense,
                    events=(ev_cross, ev_turn))
    if sol.t_events[0].size:
        return "over", sol
    if sol.t_events[1].size:
        return "under", sol
    return "decay", sol


def shoot_w(dim_n: int, q: float, a_coef: float, grid: RadialGrid) -> LimitProfile:
    """Positive radial decaying solution W of -Delta W + W = A W^{q-1}.

    Bisection on W(0) between overshoot (sign crossing) and undershoot
    (turning point) trajectories, with an exponential tail model
    c r^{-(N-1)/2} e^{-r} grafted past the matching radius.
    """
    if not (2.0 < q < 2.0 * dim_n / (dim_n - 2)):
        raise RegimeError("q must lie in (2, 2N/(N-2))")
    if not a_coef > 0:
        raise RegimeError("a_coef must be positive")
    res = shoot_w_dense(dim_n, q, a_coef, r_end=max(60.0, grid.r_max))
    vals = res(grid.nodes)
    prof = LimitProfile(KIND_LOCAL_GROUND_STATE, 1.0, RadialField(grid, vals))
    prof.shoot = res
    return prof


def shoot_w_dense(dim_n: int, q: float, a_coef: float, r_end: float = 60.0) -> ShootResult:
    # rest point of the autonomous flow; ground state amplitude sits above
    # the potential zero beta_z = (q/(2A))^{1/(q-2)}
    beta_z = (q / (2.0 * a_coef)) ** (1.0 / (q - 2.0))
    lo_lim, hi_lim = 1e-3, 1e3
    lo = max(beta_z * (1.0 + 1e-9), lo_lim)
    hi = lo * 2.0
    kind_lo, _ = _shoot_once(dim_n, q, a_coef, lo, r_end)
    if kind_lo == "over":
        raise ShootingError("lower endpoint already overshoots")
    while hi <= hi_lim:
        kind, _ = _shoot_once(dim_n, q, a_coef, hi, r_end)
        if kind == "over":
            break
        lo = hi
        hi *= 2.0
    else:
        raise ShootingError("no overshoot bracket inside [1e-3, 1e3]")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        kind, _ = _shoot_once(dim_n, q, a_coef, mid, r_end)
        if kind == "over":
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13 * hi:
            break
    w0 = lo  # the undershoot side stays positive throughout

    _, sol = _shoot_once(dim_n, q, a_coef, w0, r_end, dense=True)
    w_traj = sol.y[0]
    good = w_traj > 1e-6 * w0
    i_match = int(np.argmax(~good)) - 1 if not good.all() else w_traj.size - 1
    i_match = max(i_match, 2)
    r_match = float(sol.t[i_match])
    w_match = float(sol.sol(r_match)[0])
    tail_coef = w_match * r_match ** ((dim_n - 1) / 2.0) * np.exp(r_match)

    # truncate the dense solution at the matching radius
    _, sol_cut = _shoot_once_dense_until(dim_n, q, a_coef, w0, r_match)
    residual = _ode_residual(sol_cut, dim_n, q, a_coef, w0, r_match)
    return ShootResult(dim_n, q, a_coef, float(w0), r_match, float(tail_coef),
                       sol_cut, residual)


def _shoot_once_dense_until(dim_n, q, a_coef, w0, r_stop):
    nd = dim_n

    def rhs(r, y):
        w, dw = y
        return [dw, w - a_coef * np.sign(w) * np.abs(w) ** (q - 1.0) - (nd - 1) / r * dw]

    r0 = 1e-8
    w2 = (w0 - a_coef * w0 ** (q - 1.0)) / nd
    y0 = [w0 + 0.5 * w2 * r0 ** 2, w2 * r0]
    sol = solve_ivp(rhs, (r0, r_stop), y0, method="DOP853",
                    rtol=1e-12, atol=1e-30, dense_output=True)
    return None, sol


def _ode_residual(sol, dim_n, q, a_coef, w0, r_match):
    """Sup defect of the dense interpolant.

    W'' is obtained by one 4th-order finite difference of the integrated
    derivative component, so only a single differentiation of the C^1
    interpolant is needed.
    """
    rr = np.linspace(0.1, r_match * 0.98, 400)
    h = 1e-3
    stenc = np.array([-2, -1, 0, 1, 2]) * h
    pts = (rr[None, :] + stenc[:, None]).ravel()
    y = sol.sol(pts)
    wv = y[0].reshape(5, rr.size)[2]
    dw = y[1].reshape(5, rr.size)
    d2 = (dw[0] - 8 * dw[1] + 8 * dw[3] - dw[4]) / (12 * h)
    res = d2 + (dim_n - 1) / rr * dw[2] - wv + a_coef * np.abs(wv) ** (q - 1.0)
    return float(np.max(np.abs(res)) / w0)


def constants(dim_n: int, alpha: float, q: float, a_coef: float,
              grid: RadialGrid, kernel: RieszKernel | None = None) -> ConstantsTable:
    """Compute the constants table on one grid.

    s1 from the calibrated lower extremal, s_alpha from the Talenti
    profile (its Rayleigh quotient is amplitude-free), sq from the shot
    local ground state with unit coupling.
    """
    nd = dim_n
    if kernel is None:
        kernel = build_kernel(grid, alpha)
    a0 = calibrate_a0(grid, alpha, kernel)
    u1 = lower_extremal(grid, 1.0, a0).field
    m_u1 = lp_norm(u1, 2) ** 2
    d_u1 = d_term(kernel, u1, (nd + alpha) / nd)
    s1 = m_u1 / d_u1 ** (nd / (nd + alpha))

    v1 = talenti(grid, 1.0).field
    g_v1 = grad_norm_sq(v1)
    d_v1 = d_term(kernel, v1, (nd + alpha) / (nd - 2))
    s_alpha = g_v1 / d_v1 ** ((nd - 2) / (nd + alpha))

    w_prof = shoot_w(nd, q, 1.0, grid)
    g_w = grad_norm_sq(w_prof.field)
    m_w = lp_norm(w_prof.field, 2) ** 2
    q_w = lp_norm(w_prof.field, q) ** q
    sq = (g_w + m_w) / q_w ** (2.0 / q)

    m_lower = alpha / (2.0 * (nd + alpha)) * s1 ** ((nd + alpha) / alpha)
    m_upper = (2.0 + alpha) / (2.0 * (nd + alpha)) * s_alpha ** ((nd + alpha) / (2.0 + alpha))
    extras = {
        "u1_l2_sq": m_u1, "u1_d": d_u1, "u1_grad_sq": grad_norm_sq(u1),
        "u1_lq_q": lp_norm(u1, q) ** q,
        "v1_grad_sq": g_v1, "v1_d": d_v1, "v1_lq_q": lp_norm(v1, q) ** q,
        "v1_l2_sq": lp_norm(v1, 2) ** 2,
        "w_grad_sq": g_w, "w_l2_sq": m_w, "w_lq_q": q_w,
        "w_center": w_prof.shoot.w0, "w_ode_residual": w_prof.shoot.residual,
    }
    return ConstantsTable(nd, float(alpha), float(q), float(a_coef),
                          float(s1), float(sq), float(s_alpha),
                          hls_sharp_constant(nd, alpha), float(a0),
                          float(m_lower), float(m_upper), extras)


def lower_q_border(dim_n: int, alpha: float) -> float:
    """Sub-regime boundary 2 + 4 alpha / (N (2 + alpha)) of the lower regime."""
    return 2.0 + 4.0 * alpha / (dim_n * (2.0 + alpha))


def rho0(regime: str, dim_n: int, alpha: float, q: float, a_coef: float,
         grid: RadialGrid, a0: float | None = None,
         kernel: RieszKernel | None = None) -> float:
    """Matching scale of the limiting profile family.

    lower:  rho0 = (2q |grad U1|_2^2 / (N A (q-2) |U1|_q^q))^{2/(4-N(q-2))},
            valid for q below the lower sub-regime border;
    upper:  rho0 = (A (2N-q(N-2)) |V1|_q^q / (2q |V1|_2^2))^{2/((N-2)(q-2))},
            valid for N >= 5 (so that V1 is square integrable).
    """
    nd = dim_n
    if regime == "lower":
        if not (2.0 < q < lower_q_border(nd, alpha)):
            raise RegimeError(
                f"lower-regime rho0 needs q in (2, {lower_q_border(nd, alpha):.6g})")
        if a0 is None:
            a0 = calibrate_a0(grid, alpha, kernel)
        u1 = lower_extremal(grid, 1.0, a0).field
        g1 = grad_norm_sq(u1)
        q1 = lp_norm(u1, q) ** q
        return float((2.0 * q * g1 / (nd * a_coef * (q - 2.0) * q1))
                     ** (2.0 / (4.0 - nd * (q - 2.0))))
    if regime == "upper":
        if nd < 5:
            raise RegimeError("upper-regime rho0 needs N >= 5 (V1 not in L^2 otherwise)")
        if not (2.0 < q < 2.0 * nd / (nd - 2)):
            raise RegimeError("upper-regime rho0 needs q in (2, 2N/(N-2))")
        v1 = talenti(grid, 1.0).field
        qv = lp_norm(v1, q) ** q
        mv = lp_norm(v1, 2) ** 2
        return float((a_coef * (2.0 * nd - q * (nd - 2.0)) * qv / (2.0 * q * mv))
                     ** (2.0 / ((nd - 2.0) * (q - 2.0))))
    raise RegimeError(f"unknown regime {regime!r}")


def rho0_upper_variant(dim_n: int, alpha: float, q: float, a_coef: float,
                       grid: RadialGrid) -> float:
    """Equivalent upper-regime formula with N(2*-q)/2* in place of (2N-q(N-2))/2."""
    nd = dim_n
    two_star = 2.0 * nd / (nd - 2.0)
    v1 = talenti(grid, 1.0).field
    qv = lp_norm(v1, q) ** q
    mv = lp_norm(v1, 2) ** 2
    return float((nd * a_coef * (two_star - q) * qv / (two_star * q * mv))
                 ** (2.0 / ((nd - 2.0) * (q - 2.0))))
