"""Exception types raised across the package."""


class BMTVError(Exception):
    """Base class for all package errors."""


class NonIntegrable(BMTVError):
    pass


class NotCentered(BMTVError):
    pass


class AllBelowTolerance(BMTVError):
    pass


class ShiftExceedsTruncation(BMTVError):
    pass


class NotEmbeddable(BMTVError):
    """Circulant embedding has an eigenvalue below the negative threshold."""


class LagTooLarge(BMTVError):
    pass


class NonSummable(BMTVError):
    pass


class CapExceeded(BMTVError):
    pass


class LengthMismatch(BMTVError):
    pass


class DegenerateSample(BMTVError):
    pass


class NonPositiveValue(BMTVError):
    pass


class EmptyRange(BMTVError):
    pass


class OutOfRegime(BMTVError):
    pass


class RankMismatch(BMTVError):
    pass


class LatticeTooLarge(BMTVError):
    pass


class ConditionViolated(BMTVError):
    pass


class InconsistentRefinement(BMTVError):
    pass


class NonPositiveVariation(BMTVError):
    pass


class ConfigInvalid(BMTVError):
    pass


class RegimeViolation(UserWarning):
    """Parameters fall outside the range covered by the consistency result."""
