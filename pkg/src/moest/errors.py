"""Exception types shared across the package."""


class MoestError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(MoestError, ValueError):
    """Operands have incompatible or out-of-range dimensions."""


class ParameterError(MoestError, ValueError):
    """A scalar parameter or configuration value is invalid."""


class DegenerateRankError(MoestError, RuntimeError):
    """A matrix has fewer numerically nonzero singular values than required."""


class StallError(MoestError, RuntimeError):
    """Backtracking line search exhausted its budget without sufficient decrease."""


class UndefinedMetricError(MoestError, ValueError):
    """A performance metric is undefined for the given inputs (e.g. zero reference)."""
