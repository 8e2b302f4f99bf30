"""Exception hierarchy shared across the package."""


class DRCoreError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DRCoreError, ValueError):
    """Invalid game, sampling plan or experiment configuration."""


class InputError(DRCoreError, ValueError):
    """Malformed argument (dimension mismatch, out-of-range probability, ...)."""


class UnsupportedDimensionError(DRCoreError, ValueError):
    pass


class DegenerateTruncationError(DRCoreError, ValueError):
    pass


class InvalidConfidenceError(DRCoreError, ValueError):
    pass


class NumericalError(DRCoreError, ArithmeticError):
    """A numerical routine failed to converge or hit an ill-conditioned system."""


class InfeasibleProblemError(NumericalError):
    """An LP that should be feasible and bounded was not."""


class EmptyRegionError(DRCoreError):
    pass


class EmptyCoreError(EmptyRegionError):
    """The core polyhedron has no allocation for the given thresholds."""
