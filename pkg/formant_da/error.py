import typing as t
import typing_extensions as te

ErrorType: te.TypeAlias = t.Literal["Usage", "Data", "Numeric"]

__all__ = [
    "ErrorType",
    "FormantError",
    "UsageError",
    "DataError",
    "NumericError",
]


class FormantError(Exception):
    """Base class of every error raised by `formant_da`.

    The `error_type` tag decides how the command line reports the failure:
    `Usage` exits with 2, `Data` with 3 and `Numeric` with 4.
    """
    error_type: ErrorType
    msg: str

    def __init__(self, etype: ErrorType, msg: str):
        super().__init__(msg)
        self.error_type = etype
        self.msg = msg

    def __str__(self):
        if self.error_type == 'Usage':
            return f'UsageError: {self.msg}'
        elif self.error_type == 'Data':
            return f'DataError: {self.msg}'
        elif self.error_type == 'Numeric':
            return f'NumericError: {self.msg}'
        else:
            raise TypeError(f'Unknown error type: {self.error_type}')


class UsageError(FormantError):
    """Invalid configuration or command-line usage."""

    def __init__(self, msg: str):
        super().__init__('Usage', msg)


class DataError(FormantError):
    """Unreadable, malformed or insufficient input data."""

    def __init__(self, msg: str):
        super().__init__('Data', msg)


class NumericError(FormantError):
    """A numerical routine could not produce a valid result."""

    def __init__(self, msg: str):
        super().__init__('Numeric', msg)
