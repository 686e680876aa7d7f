"""Exception hierarchy shared by all modules."""


class CalogeroError(Exception):
    """Base class for every error raised by the package."""


class CapabilityError(CalogeroError):
    """Requested family, rank, form or automorphism is not supported."""


class ConstructionError(CalogeroError):
    """A constructed object failed one of its defining invariants."""


class PreconditionError(CalogeroError):
    """An input violates the documented precondition of an operation."""


class SingularityError(CalogeroError):
    """The base point lies too close to the singular set of the r-matrix."""

    def __init__(self, message, singular_value=None):
        super().__init__(message)
        self.singular_value = singular_value


class CayleyDomainError(CalogeroError):
    """R - 1/2 is not invertible, so the Cayley transform is undefined."""


class FactorizationError(CalogeroError):
    """Polar factorization failed (Newton divergence or iteration cap)."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BranchError(FactorizationError):
    """The principal matrix logarithm is undefined (eigenvalue on the cut)."""


class ConfigError(CalogeroError):
    """A run configuration could not be parsed or validated."""
