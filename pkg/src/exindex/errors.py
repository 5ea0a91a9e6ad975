"""Exception types shared across the package.

Every domain error carries a stable machine-readable ``code`` so the CLI can
report failures in a scriptable way (printed to stderr, exit status 1).
"""


class ExindexError(Exception):
    """Base class for domain errors raised by this package."""

    code = "ERROR"


class NoExceedances(ExindexError):
    """No observation exceeds the threshold, so a ratio estimate is 0/0."""

    code = "NO_EXCEEDANCES"


class TiesDetected(ExindexError):
    """Tied sample values make the top-k exceedance set ambiguous.

    Reported rather than silently broken; continuous models produce ties with
    probability zero, so this normally signals discretized input data.
    """

    code = "TIES_DETECTED"


class MeasureConditionError(ExindexError):
    """Raised when a signed measure fails a structural condition (M1/M2/M3)."""

    def __init__(self, message, code="MEASURE_INVALID"):
        super().__init__(message)
        self.code = code


class DegenerateDenominator(ExindexError):
    """The combining denominator of the corrected estimator is numerically zero.

    This happens exactly when the input curve is flat (already bias-free), in
    which case the combination is 0/0.  ``fallback`` carries the plain estimate
    at the largest atom coordinate so callers can still report a value.
    """

    code = "DEGENERATE_DENOMINATOR"

    def __init__(self, message: str, fallback: float | None = None):
        super().__init__(message)
        self.fallback = fallback
