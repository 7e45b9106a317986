"""Exception hierarchy shared by all modules.

The CLI maps each family to an exit code: parameter errors to 1,
data/format errors to 2, numerical failures to 3.
"""


class AHGRError(Exception):
    exit_code = 2


class ParameterError(AHGRError, ValueError):
    exit_code = 1


class DataError(AHGRError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class ParseError(DataError):
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class IdRangeError(DataError):
    pass


class IncompleteLabelsError(DataError):
    pass


class DuplicateLabelError(DataError):
    pass


class FormatError(DataError):
    pass


class DegenerateGraphError(DataError):
    pass


class NumericalError(AHGRError, ArithmeticError):
    exit_code = 3
