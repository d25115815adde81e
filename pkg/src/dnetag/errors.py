"""Exception hierarchy; each class maps to one CLI exit code."""


class DneTagError(Exception):
    category = "error"
    exit_code = 1


class UsageError(DneTagError):
    category = "usage"
    exit_code = 2


class DataFormatError(DneTagError):
    """Malformed corpus, gazetteer, config or model file."""

    category = "data-format"
    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(DneTagError):
    """Non-finite loss or gradient during training."""

    category = "numeric"
    exit_code = 4
