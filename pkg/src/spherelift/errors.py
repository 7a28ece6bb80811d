"""Exception hierarchy shared by every module of the package."""


class SphereliftError(Exception):
    """Base class for all package errors."""


class ValidationError(SphereliftError, ValueError):
    """Input data failed a structural or domain check."""


class NonSquare(ValidationError):
    pass


class AsymmetryTooLarge(ValidationError):
    pass


class NotOverparameterized(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class OutOfSupport(ValidationError):
    pass


class CostGuard(ValidationError):
    pass


class NotPositiveDefinite(SphereliftError, ArithmeticError):
    """A Cholesky factorization failed on a matrix that must be PD."""


class RankDeficient(SphereliftError, ArithmeticError):
    pass


class SolverError(SphereliftError, RuntimeError):
    """Base for failures of the regularized SDP solver.

    ``report`` carries the last iterate so callers can still inspect or
    serialize it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MaxIterExceeded(SolverError):
    pass


class LineSearchStalled(SolverError):
    pass


class MonotonicityViolation(SolverError):
    """Energy along a beta schedule decreased beyond round-off."""


class DegenerateInterval(SphereliftError, ArithmeticError):
    pass
