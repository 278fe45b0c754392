"""choqlab: radial ground states of Choquard-type equations with a local
power perturbation, and a harness verifying their large-frequency scaling
laws at desk scale."""

__version__ = "0.1.0"

from .grid import RadialGrid, RadialField, make_grid, lp_norm, grad_norm_sq, eval_at
from .riesz import (RieszKernel, build_kernel, cached_kernel, riesz_apply,
                    d_term, hls_sharp_constant, riesz_normalization)
from .closed_forms import (LimitProfile, ConstantsTable, talenti,
                           lower_extremal, calibrate_a0, shoot_w, constants,
                           rho0)
from .solver import (ProblemParams, SolveOptions, GroundState, action,
                     euler_lagrange_residual, pohozaev_residual,
                     nehari_project, solve_ground_state)
from .rescale import (RescalePlan, map_w_lower, map_v, zeta_from_center,
                      second_scaling, tau1, tau2, profile_distance)
from .asymptotics import (SweepConfig, GridSpec, SweepResult, ScalingReport,
                          sweep, predicted_exponents, fit_power_law,
                          fit_log_corrected, mass_curve, compare)
