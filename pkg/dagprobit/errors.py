class DagProbitError(Exception):
    """
    Base class for every error raised by the library.
    """

    exit_code = 1


class ValidationError(DagProbitError, ValueError):
    exit_code = 2


class InvalidOperatorError(ValidationError):
    pass


class HyperparameterError(ValidationError):
    pass


class DataValidationError(ValidationError):
    """
    Malformed input data. `row` and `column` are 1-based positions in the
    source file when known.
    """

    def __init__(self, message: str, row: int = None, column: str = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ProprietyError(ValidationError):
    """
    The response holds a single class, so the threshold posterior is improper.
    """

    def __init__(self, message: str = None):
        if message is None:
            message = (
                "response y must contain at least one 0 and one 1; "
                "with a single class the posterior of theta0 is improper"
            )
        super().__init__(message)


class NumericalError(DagProbitError, ArithmeticError):
    exit_code = 3
