"""Exception hierarchy shared across the package."""


class FreqbinError(Exception):
    """Base class for all package errors."""


class ValidationError(FreqbinError, ValueError):
    """An input violates the documented range or shape of an operation."""


class BasisMismatchError(FreqbinError, ValueError):
    """A state was passed to an operation expecting a different basis."""


class InfeasibleWavelengthError(ValidationError):
    """Energy conservation admits no positive wavelength for the request."""


class UndefinedCARError(FreqbinError, ZeroDivisionError):
    """CAR requested with zero accidental rate."""


class DegenerateFitError(FreqbinError, ArithmeticError):
    """Normal equations of a fit are singular or ill-conditioned."""


class SchemaError(ValidationError):
    """A dataset or report file does not follow its schema.

    ``row`` and ``column`` locate the offending cell when known.
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(ValidationError):
    """Invalid experiment configuration; ``line`` and ``field`` locate it."""

    def __init__(self, message, field=None, line=None):
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)
        self.field = field
        self.line = line
