"""Exception hierarchy shared by all coopreg modules."""


class CoopRegError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(CoopRegError):
    """A numerical precondition failed (maps to CLI exit code 3)."""


class ValidationError(CoopRegError):
    """Inputs are well-formed but violate a modelling requirement (exit code 2)."""


class ParseError(CoopRegError):
    """Scenario file could not be read or is missing fields (exit code 4)."""


class DimensionMismatch(ValidationError, ValueError):
    pass


class NonSquare(DimensionMismatch):
    pass


class NonConformable(DimensionMismatch):
    pass


class DegenerateNode(ValidationError):
    """A follower has d_i + k_i = 0, so the normalisation matrix is undefined."""


class MissingMeasurement(ValidationError):
    pass


class MissingGains(ValidationError):
    pass


class NotHurwitz(NumericalError):
    pass


class SpectraOverlap(NumericalError):
    pass


class NotStabilizable(NumericalError):
    pass


class NotDetectable(NumericalError):
    pass


class NoStabilizingSolution(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class Unbounded(NumericalError):
    pass
