"""Exception hierarchy shared by the library and the CLI."""


class GnaqError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GnaqError, ValueError):
    """Bad user input: indices out of range, empty data, bad config."""


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SamplingError(InputError):
    """A user has no valid negative item to sample."""


class FormatError(InputError):
    """Malformed or truncated model file."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"offset {offset}: {message}"
        super().__init__(message)


class NumericError(GnaqError, ArithmeticError):
    """Non-finite loss or parameters during training."""
