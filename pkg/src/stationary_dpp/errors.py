"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`StationaryDPPError`, so callers (the command line runner in
particular) can separate contract violations from programming bugs.
"""


class StationaryDPPError(Exception):
    """Base class for all package errors."""


class InvalidSymbolError(StationaryDPPError, ValueError):
    """Symbol description violates 0 <= f <= 1 or 0 < sigma < 1."""


class SpectrumOutOfRangeError(StationaryDPPError):
    """Kernel eigenvalue outside [-tol, 1 + tol]."""


class WindowTooLargeError(StationaryDPPError, ValueError):
    """Window exceeds the configured cardinality cap."""


class DuplicatePointsError(StationaryDPPError, ValueError):
    """Point list contains a repeated site."""


class WindowTooLargeForExactDistributionError(StationaryDPPError, ValueError):
    """Exhaustive subset enumeration requested on too many sites."""


class NotASubsetError(StationaryDPPError, ValueError):
    """Requested subset is not contained in the window."""


# name used by the operation contract
SNotSubsetOfWError = NotASubsetError


class DegenerateProjectionError(StationaryDPPError, ArithmeticError):
    """Projection sampler lost its rank (numerical breakdown)."""


class LagExceedsWindowError(StationaryDPPError, ValueError):
    """Covariance lag does not fit inside the sampled box."""


class NegativeQuadraticFormError(StationaryDPPError, ArithmeticError):
    """Analytic squared norm came out clearly negative."""


class OverflowGuardError(StationaryDPPError, OverflowError):
    """Exponential moment would overflow double precision."""


class IndicatorSymbolError(StationaryDPPError, ValueError):
    """Operation needs c_f > 0 but the symbol is an indicator."""


class DegreeTooLargeError(StationaryDPPError, ValueError):
    """Polynomial degree above the supported cap."""


class MExceedsWError(StationaryDPPError, ValueError):
    """Coverage radius larger than the sampled box."""


class EmptyConfigurationError(StationaryDPPError, ValueError):
    """Configuration has no points where at least one is needed."""


class ConfigInvalidError(StationaryDPPError, ValueError):
    """Run configuration failed validation.

    Parameters
    ----------
    field : str
        Dotted name of the offending field.
    reason : str
        Human readable explanation.
    """

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class NotASweepError(StationaryDPPError, ValueError):
    """Plot data requested for a report that is not a sweep."""
