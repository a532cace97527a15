"""Exception hierarchy shared across the package."""


class CubemixError(Exception):
    """Base class for all package errors."""


class InvalidModelError(CubemixError):
    """Model parameters violate a type invariant (weights, ranges, shapes)."""


class ZeroProbabilityError(CubemixError):
    """Conditioning on an event of probability zero."""


class InsufficientSamplesError(CubemixError):
    """An empirical statistic was requested from an empty sample multiset."""


class BruteForceCapError(CubemixError):
    """A 2^n enumeration was requested above the configured dimension cap."""


class NotIllConditionedError(CubemixError):
    """collapse_ill_conditioned called on a matrix above the conditioning gate."""


class LPError(CubemixError):
    """The dense simplex failed (infeasible system or iteration cap)."""
