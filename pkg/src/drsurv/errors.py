"""Exception hierarchy shared by every drsurv module."""


class DrsurvError(Exception):
    """Base class for all errors raised by drsurv."""


class ValidationError(DrsurvError, ValueError):
    """Input data violates a dataset invariant.

    ``index`` is the offending record (row) index when one can be named.
    """

    def __init__(self, message, index=None):
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)
        self.index = index


class EmptyDataset(ValidationError):
    pass


class NegativeTime(ValidationError):
    pass


class NonBinaryEvent(ValidationError):
    pass


class RaggedCovariates(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class DimensionMismatch(DrsurvError, ValueError):
    pass


class FitError(DrsurvError, ArithmeticError):
    """Numerical failure while fitting or evaluating an estimator."""


class NoEventsForRole(FitError):
    pass


class SingularInformation(FitError):
    pass


class NotConverged(FitError):
    """Newton-Raphson did not reach a stationary point.

    ``fit`` holds the last iterate as an unconverged ``CoxModelFit``.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class DegenerateRiskSet(FitError):
    pass
