"""Ground states of  -Delta u + eps u = (I_alpha*|u|^p)|u|^{p-2}u + A|u|^{q-2}u.

The solver works in rescaled variables in which the solution stays O(1)
as eps grows; each regime has a frame

    -kappa_grad Delta y + eps_mass y
        = kappa_d (I_alpha*|y|^p)|y|^{p-2} y + a_local |y|^{q-2} y,

whose coefficients and the exact power-law transfers back to the
original unknowns are listed in `frame_for`.

Discretely, the unknown is a pair (values on a reference grid, grid
scale s).  All functionals are exactly homogeneous in s (the Riesz
kernel is dilation covariant), so the scale is a genuine degree of
freedom of the discrete problem.  The iteration is a preconditioned
descent on the action followed by an exact two-parameter fiber
projection (amplitude and dilation); at a converged point the discrete
Euler-Lagrange residual is small and the Nehari and dilation
derivatives of the action vanish to near machine precision, which is
what the nehari/pohozaev certificates report.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import solveh_banded

from . import closed_forms
from .errors import CollapseToZero, NonConvergence, RegimeError, SolverError
from .grid import RadialGrid, RadialField
from .riesz import RieszKernel, build_kernel

__all__ = [
    "ProblemParams",
    "SolveOptions",
    "GroundState",
    "Frame",
    "frame_for",
    "action",
    "euler_lagrange_residual",
    "pohozaev_residual",
    "nehari_project",
    "solve_ground_state",
    "default_initial_field",
]

LOWER = "lower"
UPPER = "upper"

SUB_RIESZ = "riesz-dominated"   # q below the lower sub-regime border
SUB_BORDER = "borderline"
SUB_LOCAL = "local-dominated"   # q above the border


@dataclass(frozen=True)
class ProblemParams:
    """Problem data (N, alpha, regime, q, A, eps) plus derived exponents."""

    dim_n: int
    alpha: float
    regime: str
    q: float
    a_coef: float
    epsilon: float

    def __post_init__(self):
        n, a, q = self.dim_n, self.alpha, self.q
        if n < 3:
            raise RegimeError("dim_n must be >= 3")
        if not (0.0 < a < n):
            raise RegimeError("alpha must lie in (0, N)")
        if not (self.epsilon > 0 and self.a_coef > 0):
            raise RegimeError("epsilon and a_coef must be positive")
        if self.regime == LOWER:
            if not (2.0 < q < 2.0 + 4.0 / n):
                raise RegimeError(
                    f"lower regime requires q in (2, 2+4/N) = (2, {2+4/n:.6g})")
        elif self.regime == UPPER:
            if n == 3 and not (4.0 < q < 6.0):
                raise RegimeError("upper regime with N = 3 requires q in (4, 6)")
            if n >= 4 and not (2.0 < q < 2.0 * n / (n - 2)):
                raise RegimeError(
                    f"upper regime requires q in (2, 2N/(N-2)) = (2, {2*n/(n-2):.6g})")
        else:
            raise RegimeError(f"unknown regime {self.regime!r}")

    @property
    def p(self) -> float:
        n, a = self.dim_n, self.alpha
        return (n + a) / n if self.regime == LOWER else (n + a) / (n - 2)

    @property
    def q_border(self) -> float:
        return closed_forms.lower_q_border(self.dim_n, self.alpha)

    @property
    def lower_subcase(self) -> str:
        if self.regime != LOWER:
            raise RegimeError("subcase is defined for the lower regime")
        qb = self.q_border
        if abs(self.q - qb) < 1e-12:
            return SUB_BORDER
        return SUB_RIESZ if self.q < qb else SUB_LOCAL

    @property
    def sigma(self) -> float:
        n, a, q = self.dim_n, self.alpha, self.q
        if self.regime == LOWER:
            return (4 * a - n * (2 + a) * (q - 2)) / (a * (4 - n * (q - 2)))
        return (2 * n - q * (n - 2)) / ((n - 2) * (q - 2))

    @property
    def tau(self) -> float:
        n, a, q = self.dim_n, self.alpha, self.q
        if self.regime == LOWER:
            return 2 * n / (a * (4 - n * (q - 2)))
        return 1.0 / (q - 2)


@dataclass(frozen=True)
class Frame:
    """Rescaled solve frame and exact transfers back to the original field.

    The original field is u(x) = eps^{amp_pow} y(eps^{len_pow} x) where y
    is the frame solution; any integral functional transfers by an exact
    power of eps recorded in `transfer`.
    """

    tag: str
    p: float
    q: float
    kappa_grad: float
    eps_mass: float
    kappa_d: float
    a_local: float
    amp_pow: float
    len_pow: float
    energy_pow: float
    epsilon: float
    # amplitude exponent of the nearly-invariant scaling family of the
    # critical term (N/2 for the lower regime, (N-2)/2 for the upper one);
    # used to aim the soft-mode Newton step
    soft_amp: float = 0.0

    def transfer(self, observable: str, dim_n: int, alpha: float) -> float:
        """eps-exponent carrying a frame functional to the u-level one."""
        t, th, n = self.amp_pow, self.len_pow, dim_n
        table = {
            "l2_sq": 2 * t - n * th,
            "grad_sq": 2 * t - (n - 2) * th,
            "lq_q": self.q * t - n * th,
            "d_term": 2 * self.p * t - (n + alpha) * th,
            "center": t,
            "energy": self.energy_pow,
        }
        return table[observable]


def frame_for(params: ProblemParams) -> Frame:
    n, a, q, A, eps = (params.dim_n, params.alpha, params.q,
                       params.a_coef, params.epsilon)
    if params.regime == LOWER:
        if params.lower_subcase == SUB_RIESZ:
            d4 = 4.0 - n * (q - 2.0)
            sig = params.sigma
            return Frame("lower-riesz", params.p, q,
                         kappa_grad=eps ** (-sig), eps_mass=1.0,
                         kappa_d=1.0, a_local=A * eps ** (-sig),
                         amp_pow=2 * n / (a * d4), len_pow=n * (q - 2) / (a * d4),
                         energy_pow=(n + a) / a, epsilon=eps, soft_amp=n / 2.0)
        eta = (n * (2 + a) * (q - 2) - 4 * a) / (2 * n * (q - 2))
        return Frame("lower-local", params.p, q,
                     kappa_grad=1.0, eps_mass=1.0,
                     kappa_d=eps ** (-eta), a_local=A,
                     amp_pow=1.0 / (q - 2.0), len_pow=0.5,
                     energy_pow=(2 * n - q * (n - 2)) / (2 * (q - 2)),
                     epsilon=eps, soft_amp=n / 2.0)
    sig = params.sigma
    return Frame("upper", params.p, q,
                 kappa_grad=1.0, eps_mass=eps ** (-sig),
                 kappa_d=1.0, a_local=A * eps ** (-sig),
                 amp_pow=1.0 / (q - 2.0),
                 len_pow=2.0 / ((n - 2.0) * (q - 2.0)),
                 energy_pow=0.0, epsilon=eps, soft_amp=(n - 2.0) / 2.0)


@dataclass
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 6000
    step0: float = 1.0
    step_growth: float = 1.2
    collapse_tol: float = 1e-12
    track_energy: bool = False
    # a stagnated iteration still counts as converged if the residual is
    # within stall_factor * tol (the achievable floor shrinks with the
    # soft-mode curvature, i.e. grows with epsilon)
    stall_factor: float = 100.0
    stall_window: int = 80


@dataclass(eq=False)
class GroundState:
    params: ProblemParams
    u: RadialField
    energy: float
    nehari_residual: float
    pohozaev_residual: float
    grad_residual: float
    iterations: int
    center_value: float
    # frame-level diagnostics
    frame: Frame = None
    frame_field: RadialField = None
    frame_scale: float = 1.0
    functionals: dict = dc_field(default_factory=dict)
    energy_history: list = dc_field(default_factory=list)

    def frame_value(self, observable: str) -> float:
        return self.functionals[observable]

    def u_value(self, observable: str) -> float:
        """u-level observable via the exact power transfer."""
        e = self.frame.transfer(observable, self.params.dim_n, self.params.alpha)
        return self.params.epsilon ** e * self.functionals[observable]


# ---------------------------------------------------------------------------
# generic discrete functionals on (values, scale)
# ---------------------------------------------------------------------------

class _Discretization:
    def __init__(self, grid: RadialGrid, kernel: RieszKernel):
        if kernel.grid is not grid and not (
                kernel.grid.same_family(grid)
                and abs(kernel.grid.r_max - grid.r_max) <= 1e-12 * grid.r_max):
            raise SolverError("kernel must be built on the solve grid")
        self.grid = grid
        self.kernel = kernel
        self.omega = grid.sphere_area
        self.w = grid.weights
        self.fs = grid.face_stiff
        # symmetric tridiagonal stiffness in banded (upper) storage;
        # includes the Dirichlet closure face at r_max (H^1_0 truncation)
        n = grid.node_count
        diag = np.zeros(n)
        diag[:-1] += self.fs
        diag[1:] += self.fs
        diag[-1] += grid.dirichlet_face
        self.l_diag = diag
        self.l_off = -self.fs
        self.bnd = grid.dirichlet_face

    def stiff_apply(self, v):
        out = self.l_diag * v
        out[:-1] += self.l_off * v[1:]
        out[1:] += self.l_off * v[:-1]
        return out

    def raw_quadform(self, v):
        d = np.diff(v)
        return float((self.fs * d * d).sum() + self.bnd * v[-1] ** 2)

    def functionals(self, v, s, p, q, alpha, kfp=None):
        nd = self.grid.dim_n
        if kfp is None:
            kfp = self.kernel.matrix @ np.abs(v) ** p
        fp = np.abs(v) ** p
        G = self.omega * s ** (nd - 2) * self.raw_quadform(v)
        M = self.omega * s ** nd * float(self.w @ (v * v))
        D = self.omega * s ** (nd + alpha) * float((self.w * fp) @ kfp)
        Q = self.omega * s ** nd * float(self.w @ np.abs(v) ** q)
        return G, M, D, Q, kfp


def _fiber_project_scalars(F, fr: Frame, dim_n: int, alpha: float, q: float):
    """Solve for (beta, t) zeroing the amplitude and dilation derivatives.

    Functionals transform exactly (G -> beta^2 t^{N-2} G etc.), so both
    conditions reduce to a 2x2 system in (log beta, log t).  For the
    lower-critical exponent the two fiber directions act degenerately on
    (M, D) (the mass-invariant rescaling family), leaving a soft mode
    broken only by the small coefficients, so the system is solved by a
    damped Newton iteration rather than alternation.
    """
    G0, M0, D0, Q0 = F
    if D0 <= 0 and Q0 <= 0:
        raise CollapseToZero("field has no nonlinear content")
    nd = dim_n
    p = fr.p
    c1, c2 = (nd - 2) / 2.0, nd / 2.0
    c3, c4 = (nd + alpha) / (2.0 * p), nd / q

    def terms(x, y):
        t1 = fr.kappa_grad * G0 * np.exp(2 * x + (nd - 2) * y)
        t2 = fr.eps_mass * M0 * np.exp(2 * x + nd * y)
        t3 = fr.kappa_d * D0 * np.exp(2 * p * x + (nd + alpha) * y)
        t4 = fr.a_local * Q0 * np.exp(q * x + nd * y)
        return t1, t2, t3, t4

    def residuals(x, y):
        t1, t2, t3, t4 = terms(x, y)
        scale = max(t1, t2, t3, t4)
        if not (np.isfinite(scale) and scale > 0):
            return np.nan, np.nan, (t1, t2, t3, t4), scale
        rn = (t1 + t2 - t3 - t4) / scale
        rp = (c1 * t1 + c2 * t2 - c3 * t3 - c4 * t4) / scale
        return rn, rp, (t1, t2, t3, t4), scale

    # globalize with one amplitude root, then Newton
    beta0 = _amp_root(G0, M0, D0, Q0, fr, p, q)
    x, y = float(np.log(beta0)), 0.0
    rn, rp, tt, scale = residuals(x, y)
    for _ in range(120):
        if abs(rn) < 1e-14 and abs(rp) < 1e-14:
            break
        t1, t2, t3, t4 = tt
        jac = np.array([
            [2 * t1 + 2 * t2 - 2 * p * t3 - q * t4,
             (nd - 2) * t1 + nd * t2 - (nd + alpha) * t3 - nd * t4],
            [2 * c1 * t1 + 2 * c2 * t2 - 2 * p * c3 * t3 - q * c4 * t4,
             (nd - 2) * c1 * t1 + nd * c2 * t2 - (nd + alpha) * c3 * t3
             - nd * c4 * t4],
        ]) / scale
        try:
            dx, dy = np.linalg.solve(jac, [-rn, -rp])
        except np.linalg.LinAlgError:
            raise CollapseToZero("fiber projection Jacobian is singular")
        # trust region along the soft direction
        norm_step = max(abs(dx), abs(dy))
        if norm_step > 2.0:
            dx, dy = dx * 2.0 / norm_step, dy * 2.0 / norm_step
        step = 1.0
        best = abs(rn) + abs(rp)
        for _ in range(60):
            rn2, rp2, tt2, scale2 = residuals(x + step * dx, y + step * dy)
            if np.isfinite(rn2) and np.isfinite(rp2) and abs(rn2) + abs(rp2) < best:
                x, y = x + step * dx, y + step * dy
                rn, rp, tt, scale = rn2, rp2, tt2, scale2
                break
            step *= 0.5
        else:
            break  # no further reduction possible at double precision
    if not (np.isfinite(x) and np.isfinite(y)):
        raise CollapseToZero("fiber projection diverged")
    if abs(rn) > 1e-10 or abs(rp) > 1e-10:
        raise CollapseToZero("fiber projection failed to converge")
    beta, t = float(np.exp(x)), float(np.exp(y))
    G = G0 * beta ** 2 * t ** (nd - 2)
    M = M0 * beta ** 2 * t ** nd
    D = D0 * beta ** (2 * p) * t ** (nd + alpha)
    Q = Q0 * beta ** q * t ** nd
    return beta, t, (G, M, D, Q)


def _amp_root(G, M, D, Q, fr, p, q):
    """Unique beta > 0 with d/dbeta I(beta y) = 0 (Nehari in amplitude)."""
    a = fr.kappa_grad * G + fr.eps_mass * M
    b = fr.kappa_d * D
    c = fr.a_local * Q
    if b <= 0 and c <= 0:
        raise CollapseToZero("field has no nonlinear content")

    def f(lb):
        beta = np.exp(lb)
        return b * beta ** (2 * p - 2.0) + c * beta ** (q - 2.0) - a

    lo, hi = -1.0, 1.0
    while f(lo) > 0:
        lo -= 2.0
        if lo < -500:
            raise CollapseToZero("amplitude projection ran away to zero")
    while f(hi) < 0:
        hi += 2.0
        if hi > 500:
            raise CollapseToZero("amplitude projection diverged")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15:
            break
    return float(np.exp(0.5 * (lo + hi)))


def _dilation_root(G, M, D, Q, fr, p, q, dim_n, alpha):
    """Unique t > 0 with d/dt I(y(./t)) = 0 (dilation stationarity)."""
    nd = dim_n
    a = fr.kappa_grad * (nd - 2) / 2.0 * G
    b = nd * (fr.eps_mass * M / 2.0 - fr.a_local * Q / q)
    c = fr.kappa_d * (nd + alpha) / (2.0 * p) * D
    if c <= 0:
        raise CollapseToZero("dilation projection lost the nonlocal term")
    if a <= 0:
        # N = 3 frames keep a > 0 through G; guard degenerate zero-gradient
        a = max(a, 1e-300)

    def f(lt):
        t = np.exp(lt)
        return a + b * t ** 2 - c * t ** (alpha + 2.0)

    lo, hi = -1.0, 1.0
    while f(hi) > 0:
        hi += 2.0
        if hi > 500:
            raise CollapseToZero("dilation projection diverged")
    while f(lo) < 0:
        lo -= 2.0
        if lo < -500:
            raise CollapseToZero("dilation projection collapsed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return float(np.exp(0.5 * (lo + hi)))


def _frame_action(F, fr: Frame, p, q):
    G, M, D, Q = F
    return (fr.kappa_grad * G / 2.0 + fr.eps_mass * M / 2.0
            - fr.kappa_d * D / (2.0 * p) - fr.a_local * Q / q)


def _soft_newton_step(disc, fr, p, q, alpha, v, s, F, i_act, gvec):
    """Directional Newton along the mass-preserving scaling tangent.

    The discrete action has one soft mode (the scaling family of the
    critical term, with curvature that vanishes as the perturbation
    coefficients shrink); plain descent crawls along it.  A secant
    estimate of the curvature along xi = (N/2) v + r v' gives the exact
    1-d Newton step, safeguarded by the projected action decrease.
    """
    nd = disc.grid.dim_n
    r = disc.grid.nodes
    xi = fr.soft_amp * v + r * np.gradient(v, r)
    nx = np.sqrt(float(disc.w @ (xi * xi)))
    if nx == 0:
        return v, s, F, i_act, False
    xi = xi / nx

    def grad_at(vv):
        fp = np.abs(vv) ** p
        kfp = disc.kernel.matrix @ fp
        return (fr.kappa_grad / s ** 2 * disc.stiff_apply(vv) / disc.w
                + fr.eps_mass * vv
                - fr.kappa_d * s ** alpha * kfp * np.abs(vv) ** (p - 1.0)
                - fr.a_local * np.abs(vv) ** (q - 1.0))

    g0 = float(disc.w @ (gvec * xi))
    delta = 1e-6 * np.sqrt(float(disc.w @ (v * v)))
    g1 = float(disc.w @ (grad_at(v + delta * xi) * xi))
    curv = (g1 - g0) / delta
    if not np.isfinite(curv) or curv <= 0:
        return v, s, F, i_act, False
    c = -g0 / curv
    v_new = np.maximum(v + c * xi, 0.0)
    if not np.any(v_new > 0):
        return v, s, F, i_act, False
    F_new = disc.functionals(v_new, s, p, q, alpha)[:4]
    try:
        b, t, F_p = _fiber_project_scalars(F_new, fr, nd, alpha, q)
    except CollapseToZero:
        return v, s, F, i_act, False
    i_new = _frame_action(F_p, fr, p, q)
    if i_new <= i_act + 1e-13 * abs(i_act):
        return v_new * b, s * t, F_p, i_new, True
    return v, s, F, i_act, False


def _drift_line_search(disc, fr, p, q, alpha, v, s, F, i_act, drift):
    """Projected expanding line search along the accumulated drift."""
    nd = disc.grid.dim_n
    ev = np.sum([d[0] for d in drift], axis=0)
    es = float(np.sum([d[1] for d in drift]))

    def probe(c):
        v_c = np.maximum(v + c * ev, 0.0)
        s_c = float(s * np.exp(c * es))
        if not (np.any(v_c > 0) and np.isfinite(s_c) and s_c > 0):
            return None
        F_c = disc.functionals(v_c, s_c, p, q, alpha)[:4]
        try:
            b, t, F_p = _fiber_project_scalars(F_c, fr, nd, alpha, q)
        except CollapseToZero:
            return None
        return (_frame_action(F_p, fr, p, q), v_c * b, s_c * t, F_p)

    best = (i_act, v, s, F)
    moved = False
    c_best, c_hi = 0.0, 1.0
    for _ in range(30):
        res = probe(c_hi)
        if res is None or res[0] > best[0]:
            break
        best = res
        c_best = c_hi
        moved = True
        c_hi *= 2.5
    if moved:
        # golden refinement of the bracket [c_best/2.5, c_hi]
        lo = c_best / 2.5
        hi = c_hi
        invphi = (np.sqrt(5.0) - 1.0) / 2.0
        c1 = hi - invphi * (hi - lo)
        c2 = lo + invphi * (hi - lo)
        r1, r2 = probe(c1), probe(c2)
        for _ in range(40):
            if r1 is None:
                lo, c1, r1 = c1, c2, r2
                c2 = lo + invphi * (hi - lo)
                r2 = probe(c2)
                continue
            if r2 is None or r1[0] < r2[0]:
                hi, c2, r2 = c2, c1, r1
                c1 = hi - invphi * (hi - lo)
                r1 = probe(c1)
            else:
                lo, c1, r1 = c1, c2, r2
                c2 = lo + invphi * (hi - lo)
                r2 = probe(c2)
            if hi - lo < 1e-3 * (1.0 + c_best):
                break
        for res in (r1, r2):
            if res is not None and res[0] < best[0]:
                best = res
    i_act, v, s, F = best
    return v, s, F, i_act, moved


def _nehari_value(F, fr, p, q):
    G, M, D, Q = F
    terms = (fr.kappa_grad * G, fr.eps_mass * M, fr.kappa_d * D, fr.a_local * Q)
    val = terms[0] + terms[1] - terms[2] - terms[3]
    return val, max(abs(x) for x in terms)


def _pohozaev_value(F, fr, p, q, dim_n, alpha):
    G, M, D, Q = F
    nd = dim_n
    terms = (fr.kappa_grad * (nd - 2) / 2.0 * G,
             fr.eps_mass * nd / 2.0 * M,
             fr.kappa_d * (nd + alpha) / (2.0 * p) * D,
             fr.a_local * nd / q * Q)
    val = terms[0] + terms[1] - terms[2] - terms[3]
    return val, max(abs(x) for x in terms)


def _solve_frame(disc: _Discretization, fr: Frame, q: float, alpha: float,
                 y0: np.ndarray, s0: float, opts: SolveOptions):
    """Projected quasi-Newton descent on the frame action.

    Preconditioned L-BFGS directions in the weighted inner product, an
    Armijo-type monotone line search, and the exact two-parameter fiber
    projection after every accepted step.  A directional Newton step
    along the critical scaling family deals with the soft mode that
    L-BFGS has not yet learned.
    """
    nd = disc.grid.dim_n
    p = fr.p
    v = np.maximum(np.asarray(y0, dtype=float), 0.0)
    if not np.any(v > 0):
        raise CollapseToZero("initial field is not positive")
    s = float(s0)

    F = disc.functionals(v, s, p, q, alpha)[:4]
    beta, t, F = _fiber_project_scalars(F, fr, nd, alpha, q)
    v = v * beta
    s = s * t

    inner = lambda a, b: float(disc.w @ (a * b))
    eta = opts.step0
    i_act = _frame_action(F, fr, p, q)
    history = [i_act] if opts.track_energy else None
    norm0 = None
    it = 0
    rel = np.inf
    mem = []                 # L-BFGS pairs (s_vec, y_vec, 1/<s,y>)
    mem_logs = np.log(s)
    v_prev = g_prev = None
    best_i, best_it = i_act, 0
    drift = []               # accepted (delta_v, delta_log_s) for the
    for it in range(1, opts.max_iter + 1):   # global valley fallback
        fp = np.abs(v) ** p
        kfp = disc.kernel.matrix @ fp
        g = (fr.kappa_grad / s ** 2 * disc.stiff_apply(v) / disc.w
             + fr.eps_mass * v
             - fr.kappa_d * s ** alpha * kfp * np.abs(v) ** (p - 1.0)
             - fr.a_local * np.abs(v) ** (q - 1.0))
        wnorm = lambda x: np.sqrt(disc.omega * s ** nd * float(disc.w @ (x * x)))
        denom = max(wnorm(fr.eps_mass * v),
                    wnorm(fr.kappa_d * s ** alpha * kfp * np.abs(v) ** (p - 1.0)),
                    wnorm(fr.a_local * np.abs(v) ** (q - 1.0)))
        rel = wnorm(g) / denom
        if norm0 is None:
            norm0 = wnorm(v)
        if rel < opts.tol:
            break
        if wnorm(v) < opts.collapse_tol * norm0:
            raise CollapseToZero("field norm collapsed during iteration")

        # curvature pair from the previous accepted move
        if v_prev is not None:
            sv = v - v_prev
            yv = g - g_prev
            c = inner(sv, yv)
            if c > 1e-12 * np.sqrt(inner(sv, sv) * inner(yv, yv)):
                mem.append((sv, yv, 1.0 / c))
                if len(mem) > 10:
                    mem.pop(0)
        if abs(np.log(s) - mem_logs) > 0.05:
            mem.clear()
            mem_logs = np.log(s)
        v_prev, g_prev = v, g

        # base metric: (kappa_grad/s^2 L + eps_mass W)^{-1} W
        ab = np.zeros((2, v.size))
        ab[0, 1:] = fr.kappa_grad / s ** 2 * disc.l_off
        ab[1] = fr.kappa_grad / s ** 2 * disc.l_diag + fr.eps_mass * disc.w
        h0 = lambda x: solveh_banded(ab, disc.w * x, lower=False)

        # two-loop recursion in the w-inner product
        qv = g.copy()
        coeffs = []
        for sv, yv, rho in reversed(mem):
            a_i = rho * inner(sv, qv)
            coeffs.append(a_i)
            qv = qv - a_i * yv
        d = h0(qv)
        for (sv, yv, rho), a_i in zip(mem, reversed(coeffs)):
            b_i = rho * inner(yv, d)
            d = d + (a_i - b_i) * sv
        if inner(g, d) <= 0:
            d = h0(g)
            mem.clear()
            mem_logs = np.log(s)
        step0 = 1.0 if mem else eta

        accepted = False
        trial = step0
        for _ in range(45):
            if trial <= 1e-14:
                break
            v_try = np.maximum(v - trial * d, 0.0)
            if not np.any(v_try > 0):
                trial *= 0.5
                continue
            F_try = disc.functionals(v_try, s, p, q, alpha)[:4]
            try:
                beta, t, F_proj = _fiber_project_scalars(F_try, fr, nd, alpha, q)
            except CollapseToZero:
                trial *= 0.5
                continue
            i_try = _frame_action(F_proj, fr, p, q)
            if i_try <= i_act + 1e-13 * abs(i_act):
                old_state = (v, np.log(s))
                v = v_try * beta
                s = s * t
                F = F_proj
                i_act = i_try
                if not mem:
                    eta = min(trial * opts.step_growth, 2.0)
                accepted = True
                break
            trial *= 0.5
        if accepted:
            v, s, F, i_act, _ = _soft_newton_step(
                disc, fr, p, q, alpha, v, s, F, i_act, g)
            drift.append((v - old_state[0], np.log(s) - old_state[1]))
            if len(drift) >= 20:
                v, s, F, i_act, moved = _drift_line_search(
                    disc, fr, p, q, alpha, v, s, F, i_act, drift)
                drift.clear()
                if moved:
                    mem.clear()
                    mem_logs = np.log(s)
        if history is not None:
            history.append(i_act)
        if i_act < best_i - 1e-13 * abs(best_i):
            best_i, best_it = i_act, it
        stagnated = it - best_it > opts.stall_window
        if not accepted or stagnated:
            if not accepted and mem:
                # retry from a fresh quasi-Newton state
                mem.clear()
                mem_logs = np.log(s)
                v_prev = g_prev = None
                continue
            # progress exhausted at double precision: accept the floor if
            # the residual is within the stall allowance
            if rel < opts.stall_factor * opts.tol:
                break
            raise NonConvergence("descent stalled before reaching tolerance",
                                 residual=rel, iterations=it)
    else:
        raise NonConvergence("iteration budget exhausted", residual=rel,
                             iterations=opts.max_iter)

    nehari, nehari_scale = _nehari_value(F, fr, p, q)
    poho, poho_scale = _pohozaev_value(F, fr, p, q, nd, alpha)
    out = {
        "values": v, "scale": s, "action": i_act,
        "G": F[0], "M": F[1], "D": F[2], "Q": F[3],
        "nehari_rel": abs(nehari) / nehari_scale,
        "poho_rel": abs(poho) / poho_scale,
        "grad_rel": rel, "iterations": it,
        "history": history,
    }
    return out


# ---------------------------------------------------------------------------
# public operations (direct, u-level)
# ---------------------------------------------------------------------------

def _direct_frame(params: ProblemParams) -> Frame:
    soft = params.dim_n / 2.0 if params.regime == LOWER else (params.dim_n - 2.0) / 2.0
    return Frame("direct", params.p, params.q, kappa_grad=1.0,
                 eps_mass=params.epsilon, kappa_d=1.0, a_local=params.a_coef,
                 amp_pow=0.0, len_pow=0.0, energy_pow=0.0,
                 epsilon=params.epsilon, soft_amp=soft)


def action(params: ProblemParams, u: RadialField, kernel: RieszKernel) -> float:
    """Action 1/2|grad u|^2 + eps/2|u|^2 - D_p(u)/(2p) - A/q |u|_q^q."""
    disc = _Discretization(u.grid, kernel)
    F = disc.functionals(u.values, 1.0, params.p, params.q, params.alpha)[:4]
    return _frame_action(F, _direct_frame(params), params.p, params.q)


def euler_lagrange_residual(params: ProblemParams, u: RadialField,
                            kernel: RieszKernel) -> RadialField:
    """Pointwise residual of the discrete Euler-Lagrange system.

    This is the exact gradient of the discrete action in the weighted
    L^2 pairing, i.e. -Delta u + eps u - (I*|u|^p)|u|^{p-2}u - A|u|^{q-2}u
    with the variational Laplacian.
    """
    disc = _Discretization(u.grid, kernel)
    v = u.values
    p, q = params.p, params.q
    fp = np.abs(v) ** p
    kfp = kernel.matrix @ fp
    g = (disc.stiff_apply(v) / disc.w + params.epsilon * v
         - kfp * np.abs(v) ** (p - 1.0) * np.sign(v)
         - params.a_coef * np.abs(v) ** (q - 2.0) * np.where(v != 0, v, 0.0))
    return RadialField(u.grid, g)


def pohozaev_residual(params: ProblemParams, u: RadialField,
                      kernel: RieszKernel) -> float:
    """|(N-2)/2 G + N eps/2 M - (N+alpha)/(2p) D - NA/q Q| over its largest term."""
    disc = _Discretization(u.grid, kernel)
    F = disc.functionals(u.values, 1.0, params.p, params.q, params.alpha)[:4]
    val, scale = _pohozaev_value(F, _direct_frame(params), params.p, params.q,
                                 params.dim_n, params.alpha)
    if scale == 0:
        return 0.0
    return abs(val) / scale


def nehari_project(params: ProblemParams, u: RadialField,
                   kernel: RieszKernel):
    """Unique t* > 0 with d/dt I(t u) = 0 and the projected field t* u."""
    if not np.any(u.values != 0):
        raise SolverError("cannot project the zero field")
    disc = _Discretization(u.grid, kernel)
    p, q = params.p, params.q
    F = disc.functionals(np.abs(u.values), 1.0, p, q, params.alpha)[:4]
    fr = _direct_frame(params)
    t_star = _amp_root(*F, fr, p, q)
    projected = u.copy_with(t_star * u.values)
    return t_star, projected


def default_initial_profile(params: ProblemParams, grid: RadialGrid,
                            kernel: RieszKernel):
    """Regime-appropriate limit profile as a callable of the radius."""
    nd, a = params.dim_n, params.alpha
    if params.regime == LOWER and params.lower_subcase == SUB_RIESZ:
        a0 = closed_forms.calibrate_a0(grid, a, kernel)
        rho = closed_forms.rho0(LOWER, nd, a, params.q, params.a_coef, grid,
                                a0=a0, kernel=kernel)
        return lambda r: rho ** (-nd / 2.0) * (
            a0 / (1.0 + (np.asarray(r) / rho) ** 2)) ** (nd / 2.0)
    if params.regime == LOWER:
        return closed_forms.shoot_w_dense(nd, params.q, params.a_coef,
                                          r_end=max(60.0, grid.r_max))
    if nd >= 5:
        rho = closed_forms.rho0(UPPER, nd, a, params.q, params.a_coef, grid)
    else:
        rho = 1.0
    amp = (nd * (nd - 2)) ** ((nd - 2) / 4.0) * rho ** (-(nd - 2) / 2.0)
    return lambda r: amp * (1.0 + (np.asarray(r) / rho) ** 2) ** (-(nd - 2) / 2.0)


def default_initial_field(params: ProblemParams, grid: RadialGrid,
                          kernel: RieszKernel) -> RadialField:
    """Regime-appropriate limit profile sampled on the grid."""
    prof = default_initial_profile(params, grid, kernel)
    return RadialField(grid, prof(grid.nodes))


def _gauge_scan(disc, fr, p, q, alpha, profile):
    """Pick the grid gauge (shape vs. scale split) with least projected action.

    The represented function is the same up to the projection; the scan
    finds where the graded grid resolves it best, which shortens the walk
    along the soft scaling mode considerably.
    """
    nd = disc.grid.dim_n
    r = disc.grid.nodes
    best = None
    for c in np.geomspace(0.15, 8.0, 19):
        v = np.maximum(np.asarray(profile(c * r), dtype=float), 0.0)
        if not np.any(v > 0):
            continue
        F = disc.functionals(v, c, p, q, alpha)[:4]
        try:
            b, t, F_p = _fiber_project_scalars(F, fr, nd, alpha, q)
        except CollapseToZero:
            continue
        i_c = _frame_action(F_p, fr, p, q)
        if best is None or i_c < best[0]:
            best = (i_c, v * b, c * t, F_p)
    if best is None:
        raise CollapseToZero("no usable gauge for the initial profile")
    return best[1], best[2], best[3], best[0]


def solve_ground_state(params: ProblemParams, init: RadialField | None = None,
                       opts: SolveOptions | None = None, *,
                       grid: RadialGrid | None = None,
                       kernel: RieszKernel | None = None) -> GroundState:
    """Compute the ground state; `init` is a frame-level positive field.

    The returned GroundState carries the original-variable field on its
    own (solution-adapted) grid plus the frame diagnostics.  Residual
    certificates: grad_residual is the relative norm of the discrete
    Euler-Lagrange gradient, nehari_residual and pohozaev_residual are
    the normalized amplitude/dilation derivatives of the action, which
    the final fiber projection drives to near machine precision.
    """
    opts = opts or SolveOptions()
    fr = frame_for(params)
    if init is None:
        if grid is None:
            raise SolverError("need an initial field or a grid")
        if kernel is None:
            kernel = build_kernel(grid, params.alpha)
        disc = _Discretization(grid, kernel)
        profile = default_initial_profile(params, grid, kernel)
        v0, s0, _, _ = _gauge_scan(disc, fr, fr.p, params.q, params.alpha,
                                   profile)
    else:
        if grid is None or init.grid is grid:
            grid = init.grid if grid is None else grid
            s0 = 1.0
        elif grid.same_family(init.grid):
            # warm start carried on a dilated copy of the solve grid
            s0 = init.grid.r_max / grid.r_max
        else:
            raise SolverError("initial field grid must be the solve grid "
                              "or a dilation of it")
        if kernel is None:
            kernel = build_kernel(grid, params.alpha)
        if np.any(init.values < 0):
            raise SolverError("initial field must be nonnegative")
        disc = _Discretization(grid, kernel)
        v0 = init.values

    res = _solve_frame(disc, fr, params.q, params.alpha, v0, s0, opts)

    s = res["scale"]
    eps = params.epsilon
    frame_grid = grid.scaled(s)
    frame_field = RadialField(frame_grid, res["values"])
    u_grid = grid.scaled(s * eps ** (-fr.len_pow))
    u_field = RadialField(u_grid, eps ** fr.amp_pow * res["values"])

    functionals = {
        "grad_sq": res["G"], "l2_sq": res["M"], "d_term": res["D"],
        "lq_q": res["Q"], "energy": res["action"],
        "center": frame_field.center_value(),
    }
    gs = GroundState(
        params=params,
        u=u_field,
        energy=eps ** fr.energy_pow * res["action"],
        nehari_residual=res["nehari_rel"],
        pohozaev_residual=res["poho_rel"],
        grad_residual=res["grad_rel"],
        iterations=res["iterations"],
        center_value=eps ** fr.amp_pow * frame_field.center_value(),
        frame=fr,
        frame_field=frame_field,
        frame_scale=s,
        functionals=functionals,
        energy_history=res["history"] or [],
    )
    return gs
