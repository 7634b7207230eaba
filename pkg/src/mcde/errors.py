"""Exception hierarchy.

The CLI maps the three branches to exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class McdeError(Exception):
    """Base class for all package errors."""


class ConfigError(McdeError):
    """Invalid configuration, option, or argument."""


class DataError(McdeError):
    """Input data violates a contract (schema, parse, range)."""


class NumericError(McdeError):
    """Numerical computation failed or produced invalid values."""


class HeaderMismatch(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = ""
        if row is not None:
            loc += f" at row {row}"
        if column is not None:
            loc += f" column {column!r}"
        super().__init__(message + loc)
        self.row = row
        self.column = column


class UnknownCategory(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class DegenerateColumn(DataError):
    pass


class EmptyTrain(DataError):
    pass


class NoContinuousColumns(DataError):
    pass


class ZeroMassCondition(DataError):
    pass


class LengthMismatch(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class InfeasibleRate(DataError):
    pass


class ShapeMismatch(NumericError):
    pass


class NonFinite(NumericError):
    pass


class LineSearchFailed(NumericError):
    pass


class QuadratureFailure(NumericError):
    pass


class TvBoundExceeded(NumericError):
    pass
