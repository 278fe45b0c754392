"""Rescaling maps between the original field and its limit-profile frames.

Each map has the form  y(x) = c * u(k x)  with (c, k) exact powers of
eps, so by default a map returns the field on the correspondingly
dilated grid (exact representation, no interpolation).  Passing a
target grid interpolates instead.

The free profile scale (zeta, and xi for the second scaling in low
dimensions) is fixed constructively by center matching: the rescaled
profile's value at the origin equals the limit profile's value there.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from .closed_forms import LimitProfile
from .errors import RegimeError, SolverError
from .grid import RadialField, grad_norm_sq, lp_norm, eval_at
from .riesz import RieszKernel, d_term
from .solver import LOWER, UPPER, SUB_RIESZ, ProblemParams

__all__ = [
    "RescalePlan",
    "map_w_lower",
    "map_v",
    "zeta_from_center",
    "second_scaling",
    "tau1",
    "tau2",
    "profile_distance",
]


@dataclass
class RescalePlan:
    regime: str
    sigma: float
    tau: float
    zeta: float
    xi: float
    amplitude: float
    # predicted scale law zeta ~ eps^{zeta_exponent} (ln eps)^{zeta_log_exponent}
    zeta_exponent: float
    zeta_log_exponent: float = 0.0


def _exact_rescale(u: RadialField, c_amp: float, k_arg: float) -> RadialField:
    """y(x) = c u(k x), represented exactly on the grid dilated by 1/k."""
    return RadialField(u.grid.scaled(1.0 / k_arg), c_amp * u.values)


def _interp_rescale(u: RadialField, c_amp: float, k_arg: float,
                    target_grid) -> RadialField:
    return RadialField(target_grid, c_amp * eval_at(u, k_arg * target_grid.nodes))


def _apply_map(u, c_amp, k_arg, target_grid):
    if target_grid is None:
        return _exact_rescale(u, c_amp, k_arg)
    return _interp_rescale(u, c_amp, k_arg, target_grid)


def map_w_lower(u: RadialField, params: ProblemParams,
                target_grid=None) -> RadialField:
    """w(x) = eps^{-2N/(a d)} u(eps^{-N(q-2)/(a d)} x), d = 4 - N(q-2).

    Valid in the lower regime below the sub-regime border; the map sends
    the ground state to the family converging to the nonlocal extremal.
    """
    if params.regime != LOWER or params.lower_subcase != SUB_RIESZ:
        raise RegimeError("map_w_lower needs the lower regime below the border")
    n, a, q, eps = params.dim_n, params.alpha, params.q, params.epsilon
    d = 4.0 - n * (q - 2.0)
    c = eps ** (-2.0 * n / (a * d))
    k = eps ** (-n * (q - 2.0) / (a * d))
    return _apply_map(u, c, k, target_grid)


def map_v(u: RadialField, params: ProblemParams, target_grid=None) -> RadialField:
    """The unit-coefficient frame map of the regime.

    lower (border and above): v(x) = eps^{-1/(q-2)} u(eps^{-1/2} x);
    upper: w(x) = eps^{-1/(q-2)} u(eps^{-2/((N-2)(q-2))} x).
    """
    n, q, eps = params.dim_n, params.q, params.epsilon
    c = eps ** (-1.0 / (q - 2.0))
    if params.regime == LOWER:
        if params.lower_subcase == SUB_RIESZ:
            raise RegimeError("map_v needs q at or above the sub-regime border")
        k = eps ** (-0.5)
    else:
        k = eps ** (-2.0 / ((n - 2.0) * (q - 2.0)))
    return _apply_map(u, c, k, target_grid)


def inverse_map(y: RadialField, params: ProblemParams, kind: str,
                target_grid=None) -> RadialField:
    """Invert map_w_lower / map_v: u(x) = c^{-1} y(x / k)."""
    n, a, q, eps = params.dim_n, params.alpha, params.q, params.epsilon
    if kind == "w_lower":
        d = 4.0 - n * (q - 2.0)
        c = eps ** (-2.0 * n / (a * d))
        k = eps ** (-n * (q - 2.0) / (a * d))
    elif kind == "v":
        c = eps ** (-1.0 / (q - 2.0))
        k = eps ** (-0.5) if params.regime == LOWER \
            else eps ** (-2.0 / ((n - 2.0) * (q - 2.0)))
    else:
        raise SolverError(f"unknown map kind {kind!r}")
    return _apply_map(y, 1.0 / c, 1.0 / k, target_grid)


def zeta_from_center(u: RadialField, params: ProblemParams,
                     limit: LimitProfile) -> RescalePlan:
    """Fix the profile scale by matching the rescaled value at the origin.

    lower:  zeta = (U(0)/u(0))^{2/N} eps^{1/alpha}, rescaled profile
            eps^{-N/(2 alpha)} zeta^{N/2} u(zeta x);
    upper:  zeta = (V(0)/u(0))^{2/(N-2)}, rescaled profile
            zeta^{(N-2)/2} u(zeta x).
    """
    u0 = u.center_value()
    if not u0 > 0:
        raise SolverError("center value must be positive")
    l0 = limit.field.center_value()
    n, a, q, eps = params.dim_n, params.alpha, params.q, params.epsilon
    if params.regime == LOWER:
        zeta = (l0 / u0) ** (2.0 / n) * eps ** (1.0 / a)
        amp = eps ** (-n / (2.0 * a)) * zeta ** (n / 2.0)
        d = 4.0 - n * (q - 2.0)
        expo = -n * (q - 2.0) / (a * d)
        return RescalePlan(LOWER, params.sigma, params.tau, float(zeta), 1.0,
                           float(amp), expo)
    zeta = (l0 / u0) ** (2.0 / (n - 2.0))
    amp = zeta ** ((n - 2.0) / 2.0)
    if n >= 5:
        expo, logexpo = -2.0 / ((n - 2.0) * (q - 2.0)), 0.0
    elif n == 4:
        expo = logexpo = -1.0 / (q - 2.0)
    else:
        expo, logexpo = -1.0 / (q - 4.0), 0.0
    return RescalePlan(UPPER, params.sigma, params.tau, float(zeta), 1.0,
                       float(amp), expo, logexpo)


def apply_plan(u: RadialField, plan: RescalePlan, target_grid=None) -> RadialField:
    """Materialize the center-matched rescaled profile amp * u(zeta x)."""
    return _apply_map(u, plan.amplitude, plan.zeta, target_grid)


def second_scaling(w: RadialField, xi: float = None, *, limit: LimitProfile = None,
                   dim_n: int = None, target_grid=None) -> RadialField:
    """Second rescaling  w~(x) = xi^{(N-2)/2} w(xi x)  (upper regime, N = 3, 4).

    If xi is not given it is fixed by center matching to the limit
    profile (the unscaled critical bubble).
    """
    nd = dim_n if dim_n is not None else w.grid.dim_n
    if xi is None:
        if limit is None:
            raise SolverError("second_scaling needs xi or a limit profile")
        w0 = w.center_value()
        if not w0 > 0:
            raise SolverError("center value must be positive")
        xi = (limit.field.center_value() / w0) ** (2.0 / (nd - 2.0))
    return _apply_map(w, xi ** ((nd - 2.0) / 2.0), xi, target_grid), xi


def _kernel_on(kernel: RieszKernel, grid) -> RieszKernel:
    if grid is kernel.grid:
        return kernel
    if not kernel.grid.same_family(grid):
        raise SolverError("field grid is not a dilation of the kernel grid")
    return kernel.scaled(grid.r_max / kernel.grid.r_max)


def tau1(w: RadialField, kernel: RieszKernel) -> float:
    """|w|_2^2 / D(w) at the lower-critical exponent (N+alpha)/N."""
    k = _kernel_on(kernel, w.grid)
    nd = w.grid.dim_n
    den = d_term(k, w, (nd + k.alpha) / nd)
    if den == 0:
        raise SolverError("tau1 denominator vanished")
    return lp_norm(w, 2) ** 2 / den


def tau2(w: RadialField, kernel: RieszKernel) -> float:
    """|grad w|_2^2 / D(w) at the upper-critical exponent (N+alpha)/(N-2)."""
    k = _kernel_on(kernel, w.grid)
    nd = w.grid.dim_n
    den = d_term(k, w, (nd + k.alpha) / (nd - 2))
    if den == 0:
        raise SolverError("tau2 denominator vanished")
    return grad_norm_sq(w) / den


def profile_distance(f: RadialField, g: RadialField, norm: str = "L2",
                     q: float = None) -> float:
    """Norm of f - g; fields on different grids are resampled to the finer one."""
    if f.grid is not g.grid:
        fine, coarse = (f, g) if f.grid.node_count >= g.grid.node_count else (g, f)
        resampled = RadialField(fine.grid, eval_at(coarse, fine.grid.nodes))
        f, g = (fine, resampled)
    diff = f.copy_with(f.values - g.values)
    if norm == "L2":
        return lp_norm(diff, 2)
    if norm == "Lq":
        if q is None:
            raise SolverError("Lq distance needs q")
        return lp_norm(diff, q)
    if norm == "D12":
        return float(np.sqrt(grad_norm_sq(diff)))
    if norm == "H1":
        return float(np.sqrt(grad_norm_sq(diff) + lp_norm(diff, 2) ** 2))
    raise SolverError(f"unknown norm {norm!r}")
