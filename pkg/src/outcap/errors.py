"""Exception types raised by outcap."""


class OutcapError(ValueError):
    """Base class; ``code`` is a stable machine-readable tag."""

    code = "outcap-error"


class DomainError(OutcapError):
    code = "domain-error"


class UnsupportedExactCdfError(OutcapError):
    code = "unsupported-exact-cdf"


class GaInvalidRegimeError(OutcapError):
    code = "ga-invalid-regime"


class ConvergenceError(OutcapError):
    code = "no-convergence"


class NonMonotoneError(OutcapError):
    code = "non-monotone"


class AsymptoticRegimeError(OutcapError):
    code = "asymptotic-regime"
