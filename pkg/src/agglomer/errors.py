"""Exception types shared across the package."""


class AgglomerError(Exception):
    """Base class; the CLI maps these to exit code 2."""


class ValidationError(AgglomerError):
    pass


class OutOfRange(ValidationError):
    pass


class MissingRegion(ValidationError):
    pass


class UnknownOccupation(ValidationError):
    pass


class EmptyAfterFilter(ValidationError):
    pass


class EmptyDistribution(ValidationError):
    pass


class DegenerateMatrix(ValidationError):
    pass


class InconsistentExpectation(ValidationError):
    pass


class IsolatedRegion(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class TooFewClusters(ValidationError):
    pass


class UnknownVariable(ValidationError):
    pass


class MissingAdjacentCentury(ValidationError):
    pass


class EmptySubset(ValidationError):
    pass


class PerfectSeparation(AgglomerError):
    pass


class NonConvergence(AgglomerError):
    """Estimation failed to converge; the CLI maps this to exit code 3."""

    def __init__(self, message, last_coefficients=None, gradient_norm=None):
        super().__init__(message)
        self.last_coefficients = last_coefficients
        self.gradient_norm = gradient_norm
