"""Exception types shared across the package."""


class DbsFiberError(Exception):
    """Base class for all package errors."""


class GeometryError(DbsFiberError):
    """A geometric object does not fit the grid or is degenerate."""


class ResolutionError(GeometryError):
    """The voxel grid is too coarse to represent a requested feature."""


class ProgramError(DbsFiberError):
    """A contact program is invalid (e.g. no cathode, unknown contact)."""


class ValidationError(DbsFiberError):
    """A configuration block violates its invariants.

    Carries the list of individual diagnostics in ``problems``.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SolverError(DbsFiberError):
    """The linear solver failed to converge. Carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SamplingError(DbsFiberError):
    """A sample point lies outside the solved grid."""


class NumericalError(DbsFiberError):
    """A time integration blew up. Names the compartment and time."""

    def __init__(self, message, compartment=None, time_s=None):
        super().__init__(message)
        self.compartment = compartment
        self.time_s = time_s


class CalibrationError(DbsFiberError):
    """Input calibration could not bracket a firing threshold."""


class ConfigError(DbsFiberError):
    """A run configuration file is missing, malformed, or has unknown keys."""
