"""Exception hierarchy."""


class StokesDNError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(StokesDNError, ValueError):
    pass


class MuTooSmall(StokesDNError, ValueError):
    """A decay rate does not exceed the weight ``a``; the weighted norm is infinite."""


class TermCapExceeded(StokesDNError):
    pass


class DivergentIntegral(StokesDNError, ValueError):
    pass


class NonzeroConstantSource(StokesDNError, ValueError):
    pass


class GuardViolation(StokesDNError):
    """``sup |(|D| eta)(x)| >= 1``: the flattening map is not a diffeomorphism."""


class SeriesDivergence(StokesDNError):
    pass


class NoContraction(StokesDNError):
    pass


class SymmetryViolation(StokesDNError):
    pass


class NotInRange(StokesDNError, ValueError):
    pass


class NewtonDivergence(StokesDNError):
    pass


class TooFewModes(StokesDNError, ValueError):
    pass
