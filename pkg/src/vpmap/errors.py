"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""


class VpmapError(Exception):
    exit_code = 1


class ConfigError(VpmapError):
    """Run configuration failed schema or semantic validation."""

    exit_code = 2


class ValidationError(VpmapError, ValueError):
    """An in-memory object violates its contract (shape, flags, symmetry)."""

    exit_code = 2


class DomainError(ValidationError):
    """A scalar argument lies outside the support of a density."""


class ElicitationError(ConfigError, ValueError):
    """PC prior tail statement (U, a) is not admissible."""


class DataError(VpmapError):
    exit_code = 3


class ParseError(DataError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphValidationError(DataError, ValueError):
    pass


class DatasetError(DataError, ValueError):
    pass


class NumericalError(VpmapError, ArithmeticError):
    exit_code = 4


class DegenerateStructureError(NumericalError):
    """Structure matrix has no usable row space (e.g. isolated areas)."""


class ConstraintViolationError(NumericalError):
    """A vector has a null-space component beyond tolerance."""


class SupportError(NumericalError):
    """Two singular covariances do not share their column space."""


class InitializationError(NumericalError):
    pass


class VerificationFailure(VpmapError):
    exit_code = 5


class SizeError(ValidationError):
    """Requested dimensions are too small or exceed the configured cap."""
