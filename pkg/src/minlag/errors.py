"""Exception types shared across the package."""


class MinlagError(Exception):
    """Base class for all package errors."""


class GeometryError(MinlagError):
    """Invalid or unusable domain geometry."""


class DomainExceededError(GeometryError):
    """Evaluation point outside the region where a defining function is usable."""


class ConstructionError(GeometryError):
    """A defining-function builder could not satisfy its contract."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SolverError(MinlagError):
    """Base class for nonlinear-solver failures."""


class ObliquenessLostError(SolverError):
    """Boundary obliqueness <= 0 at some boundary node; linearization refused."""


class SafeguardError(SolverError):
    """Line search exhausted without restoring convexity, obliqueness, or descent."""


class NonConvergenceError(SolverError):
    """Newton iteration budget exhausted. Carries the residual-norm history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class ContinuationStuckError(SolverError):
    """Step bisection exhausted during parameter marching."""

    def __init__(self, message, last_good_t=None):
        super().__init__(message)
        self.last_good_t = last_good_t


class RayMissesTarget(MinlagError):
    """Signal: a probe ray never enters the target domain."""


class ConfigError(MinlagError):
    """Bad run configuration (unparsable file, unknown key, wrong type)."""
