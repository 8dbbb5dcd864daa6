"""Exception hierarchy shared by the library and the CLI."""


class PlmError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PlmError, ValueError):
    pass


class ShapeError(PlmError, ValueError):
    pass


class NumericError(PlmError, ArithmeticError):
    """Non-finite values in a loss, gradient or parameter (divergence)."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class FormatError(PlmError, ValueError):
    """A file did not match the expected binary layout."""


class RangeError(PlmError, IndexError):
    pass
