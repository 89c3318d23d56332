"""Exception types shared across the package."""


class HHNError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(HHNError):
    """Operand shapes are incompatible."""


class ConfigError(HHNError):
    """Invalid or unknown configuration value."""


class ValidationError(HHNError):
    """Input data violates a documented precondition."""


class FormatError(HHNError):
    """A file does not conform to its expected layout."""


class NumericError(HHNError):
    """A computation produced or encountered non-finite or degenerate values."""
