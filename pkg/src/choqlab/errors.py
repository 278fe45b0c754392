"""Exception types shared across the package."""


class ChoqlabError(Exception):
    pass


class GridError(ChoqlabError, ValueError):
    """Invalid grid construction arguments or broken grid invariants."""


class KernelError(ChoqlabError, ValueError):
    """Invalid Riesz kernel arguments (order out of range, grid mismatch)."""


class RegimeError(ChoqlabError, ValueError):
    """Problem parameters outside the admissible exponent ranges."""


class CalibrationError(ChoqlabError, RuntimeError):
    """Amplitude calibration could not bracket a residual minimum."""


class ShootingError(ChoqlabError, RuntimeError):
    """Shooting bisection could not establish a bracket."""


class SolverError(ChoqlabError, RuntimeError):
    """Base class for ground-state solver failures; carries a kind tag."""

    kind = "solver-error"


class NonConvergence(SolverError):
    """Iteration budget exhausted with residual above tolerance."""

    kind = "non-convergence"

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CollapseToZero(SolverError):
    """Iterates collapsed to the zero field (parameters outside existence range)."""

    kind = "collapse-to-zero"


class ConfigError(ChoqlabError, ValueError):
    """Malformed or out-of-range run configuration."""
