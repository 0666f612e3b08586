"""Exception hierarchy shared by all randbell modules."""


class BellError(ValueError):
    """Base class for all library errors."""


class InvalidIndexError(BellError):
    pass


class DegenerateCoefficientsError(BellError):
    pass


class SizeLimitError(BellError):
    """Raised when an input exceeds an enumeration or memory guard."""


class DomainError(BellError):
    pass


class UnsupportedConfigurationError(BellError):
    pass


class ShapeError(BellError):
    pass


class NumericError(BellError):
    pass


class ConvergenceError(BellError):
    pass


class NotSignFunctionError(BellError):
    """The inverse transform of a coefficient vector is not a +-1 function."""


class ConfigError(BellError):
    pass
