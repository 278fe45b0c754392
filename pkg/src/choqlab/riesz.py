"""Riesz potential I_alpha * f for radial fields, as a dense kernel matrix.

For radial f the convolution reduces to a one-dimensional integral

    (I_alpha * f)(r) = A_alpha(N) int_0^inf kappa(r, s) f(s) s^{N-1} ds,

where kappa(r, s) is the spherical average of |x - y|^{alpha - N} over
|x| = r, |y| = s.  kappa is homogeneous of degree alpha - N, so

    kappa(r, s) = max(r, s)^{alpha - N} * F(min(r, s) / max(r, s))

with a single angular profile F on [0, 1].  F is smooth on [0, 1) and has
a |1 - t|^{alpha - 1} singularity (log for alpha = 1) at the diagonal.

The kernel matrix is assembled as

    K[i, j] ~= A_alpha(N) * cell_mass[j] * kappa(r_i, r_j)

for well-separated pairs, while entries within a few cells of the
diagonal are replaced by the exact cell integral of kappa(r_i, .) s^{N-1}
with the singular factor absorbed by a power substitution.  The weighted
matrix w_i K[i, j] is symmetrized so the induced bilinear form is exactly
self-adjoint.

F itself is computed from the distance representation

    kappa(r, s) = 2 w_{N-2} / (2 r s)^{N-2} *
                  int_{|r-s|}^{r+s} [(u^2-m^2)((M^2-u^2)]^{(N-3)/2} u^{alpha-N+1} du

(m = |r-s|, M = r+s) by composite Gauss quadrature with dyadic grading
and endpoint substitutions, then cached in two spline pieces: plain in t
away from the diagonal, and in log(1 - t) coordinates near it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi, log

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import KernelError
from .grid import RadialGrid, RadialField, unit_sphere_area

__all__ = [
    "RieszKernel",
    "build_kernel",
    "riesz_apply",
    "d_term",
    "hls_sharp_constant",
    "riesz_normalization",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_GL_X01 = 0.5 * (_GL_X + 1.0)
_GL_W01 = 0.5 * _GL_W

_NEAR_BAND = 3           # half-width (in cells) of the cell-integrated band
_SPLIT_T = 0.95          # stitch point between the two F-spline pieces
_LOG_OMT_MIN = -36.0     # spline-B coverage: 1 - t down to ~2e-16


def riesz_normalization(dim_n: int, alpha: float) -> float:
    """A_alpha(N) = Gamma((N-a)/2) / (Gamma(a/2) pi^{N/2} 2^a)."""
    _check_order(dim_n, alpha)
    return gamma((dim_n - alpha) / 2.0) / (gamma(alpha / 2.0)
                                           * pi ** (dim_n / 2.0) * 2.0 ** alpha)


def hls_sharp_constant(dim_n: int, alpha: float) -> float:
    """Sharp constant of the diagonal Hardy-Littlewood-Sobolev inequality."""
    _check_order(dim_n, alpha)
    n, a = dim_n, alpha
    return (pi ** ((n - a) / 2.0) * gamma(a / 2.0) / gamma((n + a) / 2.0)
            * (gamma(n / 2.0) / gamma(float(n))) ** (-a / n))


def _check_order(dim_n, alpha):
    if not (np.isfinite(alpha) and 0.0 < alpha < dim_n):
        raise KernelError(f"alpha must lie in (0, N); got alpha={alpha}, N={dim_n}")


class _AngularProfile:
    """The reduced angular profile F(t) = kappa(1, t), t in [0, 1)."""

    def __init__(self, dim_n: int, alpha: float):
        self.dim_n = dim_n
        self.alpha = alpha
        self.beta = (dim_n - 3) / 2.0
        self.omega_nm2 = unit_sphere_area(dim_n - 1)
        self.f_zero = unit_sphere_area(dim_n)
        self._build_splines()

    # -- direct evaluation ------------------------------------------------

    def _kappa_hat(self, m: float, M: float) -> float:
        """int_m^M [(u-m)(u+m)]^beta [(M-u)(M+u)]^beta u^{alpha-N+1} du.

        Endpoint factors are absorbed by u = m + d z^2 (resp. M - d z^2);
        interior subintervals are graded dyadically away from u = m to
        resolve the u^{alpha-N+1} steepness when m << M.
        """
        beta = self.beta
        expo = self.alpha - self.dim_n + 1.0
        mid = 0.5 * (m + M)
        total = 0.0

        def left_piece(lo_off, hi_off):
            # u = m + off, off in [lo_off, hi_off]; endpoint sub if lo_off == 0
            if lo_off == 0.0:
                d = hi_off
                z = _GL_X01
                off = d * z * z
                u = m + off
                jac = 2.0 * d * z
                um = off  # u - m, exact
                vals = (um ** beta * (u + m) ** beta
                        * ((M - u) * (M + u)) ** beta * u ** expo * jac)
            else:
                off = lo_off + (hi_off - lo_off) * _GL_X01
                u = m + off
                jac = hi_off - lo_off
                vals = (off ** beta * (u + m) ** beta
                        * ((M - u) * (M + u)) ** beta * u ** expo * jac)
            return float(vals @ _GL_W01)

        # left half [m, mid]: dyadic from the endpoint outward
        span = mid - m
        n_lev = max(4, min(64, int(np.ceil(np.log2(max(span / max(m, 1e-300), 1.0)))) + 4))
        offs = span * 2.0 ** (-np.arange(n_lev, -1, -1, dtype=float))
        total += left_piece(0.0, offs[0])
        for lo, hi in zip(offs[:-1], offs[1:]):
            total += left_piece(lo, hi)

        # right half [mid, M]: single endpoint substitution u = M - d z^2
        d = M - mid
        z = _GL_X01
        off = d * z * z
        u = M - off
        jac = 2.0 * d * z
        vals = (((u - m) * (u + m)) ** beta
                * off ** beta * (M + u) ** beta * u ** expo * jac)
        total += float(vals @ _GL_W01)
        return total

    def raw(self, one_minus_t: float) -> float:
        """F(t) by direct quadrature, parametrized by 1 - t for stability."""
        omt = one_minus_t
        if omt >= 1.0:
            return self.f_zero
        t = 1.0 - omt
        m, M = omt, 1.0 + t
        k = self._kappa_hat(m, M)
        return 2.0 * self.omega_nm2 / (2.0 * t) ** (self.dim_n - 2) * k

    # -- spline cache ------------------------------------------------------

    def _build_splines(self):
        # piece A: plain t on [0, SPLIT_T]
        t_a = np.linspace(0.0, _SPLIT_T, 1201)
        f_a = np.empty_like(t_a)
        f_a[0] = self.f_zero
        for i in range(1, t_a.size):
            f_a[i] = self.raw(1.0 - t_a[i])
        self._spline_a = CubicSpline(t_a, f_a, bc_type=((1, 0.0), "not-a-knot"))

        # piece B: xi = log(1 - t) on [LOG_OMT_MIN, log(1 - SPLIT_T)];
        # for alpha < 1 interpolate H = F * (1-t)^{1-alpha} (bounded).
        xi = np.linspace(_LOG_OMT_MIN, log(1.0 - _SPLIT_T), 1500)
        self._sing_pow = max(1.0 - self.alpha, 0.0)
        h = np.empty_like(xi)
        for i, x in enumerate(xi):
            omt = np.exp(x)
            h[i] = self.raw(omt) * omt ** self._sing_pow
        self._spline_b = CubicSpline(xi, h)
        self._xi_min = xi[0]

    def eval(self, t: np.ndarray, one_minus_t: np.ndarray) -> np.ndarray:
        """Vectorized F(t); callers supply 1 - t computed without cancellation."""
        t = np.asarray(t, dtype=float)
        omt = np.asarray(one_minus_t, dtype=float)
        out = np.empty_like(t)
        near = t > _SPLIT_T
        out[~near] = self._spline_a(t[~near])
        if np.any(near):
            xi = np.log(np.maximum(omt[near], 1e-300))
            xi = np.maximum(xi, self._xi_min)  # clamp: H is flat at depth 2e-16
            out[near] = self._spline_b(xi) * np.exp(-self._sing_pow * xi)
        return out


_PROFILE_CACHE: dict[tuple[int, float], _AngularProfile] = {}


def _profile(dim_n: int, alpha: float) -> _AngularProfile:
    key = (int(dim_n), float(alpha))
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = _AngularProfile(*key)
    return _PROFILE_CACHE[key]


@dataclass(eq=False)
class RieszKernel:
    grid: RadialGrid
    alpha: float
    matrix: np.ndarray   # K[i, j]: (I_alpha * f)(r_i) ~= sum_j K[i, j] f(r_j)
    a_alpha: float

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values

    def scaled(self, s: float) -> "RieszKernel":
        """Kernel on the dilated grid; exact covariance K(s g) = s^alpha K(g)."""
        return RieszKernel(self.grid.scaled(s), self.alpha,
                           np.array(self.matrix) * s ** self.alpha, self.a_alpha)


def _cell_integral(prof: _AngularProfile, y: float, a: float, b: float,
                   dim_n: int, alpha: float) -> float:
    """int_a^b F(t(s)) max(y, s)^{alpha-N} s^{N-1} ds with target radius y.

    The integrand is singular (or kinked) at s = y.  Each monotone piece is
    parametrized as s = y +/- L z^gamma with gamma = max(2, 2/alpha), which
    absorbs the |s - y|^{alpha-1} factor analytically; the z-interval is
    split dyadically toward z = 0.
    """
    gam = max(2.0, 2.0 / alpha)
    nd = dim_n

    def piece(sign: float, lo: float, hi: float) -> float:
        # integrates over s between y + sign*lo and y + sign*hi, 0 <= lo < hi
        if hi <= lo:
            return 0.0
        acc = 0.0
        if lo == 0.0:
            # z-parametrization with dyadic split toward z = 0
            z_edges = np.concatenate([[0.0], 2.0 ** np.arange(-6, 1, dtype=float)])
            zl, zh = z_edges[:-1], z_edges[1:]
            z = zl[:, None] + (zh - zl)[:, None] * _GL_X01[None, :]
            jacz = (zh - zl)[:, None] * _GL_W01[None, :]
            dist = (hi * z ** gam).ravel()
            jac = (hi * gam * z ** (gam - 1.0) * jacz).ravel()
            s = y + sign * dist
            acc += float((_eval_chunk(prof, y, s, dist, nd, alpha) * jac).sum())
        else:
            # smooth region: dyadic growth from lo
            edges = [lo]
            while edges[-1] < hi:
                edges.append(min(2.0 * edges[-1], hi))
            edges = np.asarray(edges)
            l, h = edges[:-1], edges[1:]
            dist = (l[:, None] + (h - l)[:, None] * _GL_X01[None, :]).ravel()
            wq = ((h - l)[:, None] * _GL_W01[None, :]).ravel()
            s = y + sign * dist
            acc += float((_eval_chunk(prof, y, s, dist, nd, alpha) * wq).sum())
        return acc

    total = 0.0
    if a < y < b:
        total += piece(-1.0, 0.0, y - a)
        total += piece(+1.0, 0.0, b - y)
    elif y <= a:
        total += piece(+1.0, a - y, b - y)
    else:
        total += piece(-1.0, y - b, y - a)
    return total


def _eval_chunk(prof, y, s, dist, dim_n, alpha):
    """Integrand F(t) max(y,s)^{alpha-N} s^{N-1} with exact |s - y| = dist."""
    mx = np.maximum(s, y)
    mn = np.minimum(s, y)
    t = mn / mx
    omt = dist / mx
    return prof.eval(t, omt) * mx ** (alpha - dim_n) * s ** (dim_n - 1)


def build_kernel(grid: RadialGrid, alpha: float) -> RieszKernel:
    """Assemble the dense radial Riesz kernel matrix for (grid, alpha)."""
    _check_order(grid.dim_n, alpha)
    if grid.node_count < 16:
        raise KernelError("kernel needs a grid with at least 16 nodes")
    nd = grid.dim_n
    prof = _profile(nd, alpha)
    a_const = riesz_normalization(nd, alpha)

    # symmetric kernel values kbar[i, j] ~= kappa(r_i, r_j); near the
    # diagonal, the symmetrized mass-average of kappa over the source cell
    r = grid.nodes
    n = r.size
    mx = np.maximum(r[:, None], r[None, :])
    mn = np.minimum(r[:, None], r[None, :])
    diff = np.abs(r[:, None] - r[None, :])
    kbar = prof.eval(mn / mx, diff / mx) * mx ** (alpha - nd)

    edges = grid.edges
    cm = grid.cell_mass
    for i in range(n):
        jhi = min(n - 1, i + _NEAR_BAND)
        for j in range(i, jhi + 1):
            kij = _cell_integral(prof, r[i], edges[j], edges[j + 1], nd, alpha) / cm[j]
            if j == i:
                kbar[i, i] = kij
            else:
                kji = _cell_integral(prof, r[j], edges[i], edges[i + 1],
                                     nd, alpha) / cm[i]
                kbar[i, j] = kbar[j, i] = 0.5 * (kij + kji)

    # K[i, j] = A w_j kbar[i, j]; w_i K[i, j] = w_j K[j, i] holds exactly
    K = a_const * grid.weights[None, :] * kbar
    return RieszKernel(grid=grid, alpha=float(alpha), matrix=K, a_alpha=a_const)


_KERNEL_CACHE: dict = {}


def cached_kernel(grid: RadialGrid, alpha: float) -> RieszKernel:
    """Session cache of built kernels, keyed by the grid layout and alpha.

    Grids with identical construction parameters produce bitwise-equal
    kernels, so the cache returns a kernel bound to the given grid object.
    """
    key = (grid.dim_n, grid.node_count, float(grid.r_max), float(grid.stretch),
           float(alpha))
    hit = _KERNEL_CACHE.get(key)
    if hit is None:
        hit = build_kernel(grid, alpha)
        _KERNEL_CACHE[key] = hit
        return hit
    if hit.grid is grid:
        return hit
    # rebind the cached matrix to the caller's (identical) grid object
    return RieszKernel(grid=grid, alpha=hit.alpha, matrix=np.array(hit.matrix),
                       a_alpha=hit.a_alpha)


def riesz_apply(kernel: RieszKernel, f: RadialField) -> RadialField:
    """Matrix-vector application of I_alpha to a radial field."""
    if f.grid is not kernel.grid and not (
            f.grid.same_family(kernel.grid) and f.grid.r_max == kernel.grid.r_max):
        raise KernelError("field grid does not match kernel grid")
    return RadialField(kernel.grid, kernel.matrix @ f.values)


def d_term(kernel: RieszKernel, f: RadialField, p: float) -> float:
    """int (I_alpha * |f|^p) |f|^p over R^N by the grid quadrature."""
    if not p > 1:
        raise KernelError("p must be > 1")
    fp = np.abs(f.values) ** p
    g = kernel.grid
    return float(g.sphere_area * (g.weights * fp) @ (kernel.matrix @ fp))
