"""Exception and warning types raised across the package."""


class SpdError(ValueError):
    """Base class for validation and numerical errors."""


class NotSymmetric(SpdError):
    pass


class NotPositiveDefinite(SpdError):
    pass


class NumericalBreakdown(SpdError):
    pass


class EigFailure(SpdError):
    pass


class DimensionMismatch(SpdError):
    pass


class ParseError(SpdError):
    pass


class RiccatiNotPD(SpdError):
    pass


class InvalidBeta(SpdError):
    pass


class CoefficientsNotZeroSum(SpdError):
    pass


class SingularActiveSet(SpdError):
    pass


class TooLarge(SpdError):
    pass


class UnknownLabel(SpdError):
    pass


class TooFewSamples(SpdError):
    pass


class ImageTooSmall(SpdError):
    pass


class ConfigError(SpdError):
    pass


class AtomUnused(SpdError):
    """No sample puts weight on the atom; the atom is left as is."""


class DegenerateDenominator(SpdError):
    """The scalar normaliser of the Stein atom update vanished."""


class IndexOutOfRange(IndexError):
    pass


class ConvergenceWarning(RuntimeWarning):
    """An iterative routine stopped on its iteration budget."""
