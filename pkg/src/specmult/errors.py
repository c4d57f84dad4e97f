"""Exception hierarchy shared by all modules."""


class SpecmultError(Exception):
    """Base class for library errors."""


class ParameterError(SpecmultError, ValueError):
    """An argument is outside its admissible range."""


class ClassMembershipError(SpecmultError):
    """A potential fails a numerical class-membership test."""


class ThresholdError(SpecmultError):
    """A threshold search exhausted its ladder."""


class DivergenceError(SpecmultError):
    """A Neumann-type series guard failed."""


class SpectralAssumptionError(SpecmultError):
    """A resolvent inversion is singular or ill-conditioned."""


class SymbolError(SpecmultError):
    """A symbol cannot be evaluated where it is needed."""


class RegimeError(SpecmultError):
    """A dyadic piece cannot be assembled in the requested regime."""


class NoContractionError(SpecmultError):
    """The fixed-point iteration left the ball or failed to contract."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record or {}


class GridError(SpecmultError):
    """The grid cannot support the requested computation."""
