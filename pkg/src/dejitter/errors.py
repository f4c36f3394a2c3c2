"""Exception hierarchy shared by the estimators, samplers and CLI."""


class DejitterError(Exception):
    """Base class for all package errors."""


class ConfigError(DejitterError, ValueError):
    """Invalid problem dimensions, noise levels or settings."""


class NumericalError(DejitterError, ArithmeticError):
    """A computation could not be completed reliably."""


class RankDeficientError(NumericalError):
    pass


class NotPositiveDefiniteError(NumericalError):
    pass


class SingularFisherError(NumericalError):
    """Fisher estimate is singular; increase the number of mixture draws."""


class SamplerError(NumericalError):
    """A one-dimensional sampler failed (envelope violation, degenerate slice)."""


class EnvelopeError(SamplerError):
    pass


class AcceptanceTooLowError(SamplerError):
    """Rejection sampling hit its proposal budget without an acceptance."""


class NoComparableRangeError(DejitterError):
    """Two MSE curves never attain a common MSE level."""


class TimeBudgetExceeded(DejitterError):
    """An estimator ran past its wall-clock budget."""
