"""Exception hierarchy for the stmca package.

Config errors map to CLI exit code 2, numerical errors to exit code 3.
"""


class StmcaError(Exception):
    """Base class for all package errors."""


class ConfigError(StmcaError):
    """Invalid or inconsistent run configuration."""


class NumericalError(StmcaError):
    """Base class for numerical failures (quadrature, root finding, ...)."""


class QuadratureError(NumericalError):
    """Quadrature failed or integrand is non-finite at an interior point."""


class InvalidCoefficientError(NumericalError):
    """SDE coefficients violate their contract (e.g. sigma <= 0 inside the domain)."""


class ClassificationError(NumericalError):
    """Boundary classification integrals neither stabilized nor clearly diverged."""


class TuningError(NumericalError):
    """Grid tuning root search failed to converge."""


class DegenerateGridError(StmcaError):
    """Grid construction produced fewer than three points."""


class UnsupportedMethodError(StmcaError):
    """Requested closed forms for a spec that has none."""


class RunawaySimulationError(NumericalError):
    """A single path exceeded the step budget before reaching the horizon."""
