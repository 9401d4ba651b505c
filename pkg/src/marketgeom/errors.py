"""Exception hierarchy.

Data problems (bad files, invalid panels, degenerate inputs) derive from
:class:`DataError`; floating-point integrity failures derive from
:class:`NumericalIntegrityError`. The CLI maps the two families to distinct
exit codes.
"""


class MarketGeometryError(Exception):
    """Base class for all errors raised by this package."""


class DataError(MarketGeometryError):
    pass


class ParseError(DataError):
    pass


class ValidationError(DataError):
    pass


class StructureError(DataError):
    pass


class EmptyPanelError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateAssetError(DataError):
    """A stock has zero return variance inside a window."""

    def __init__(self, message, tickers=()):
        super().__init__(message)
        self.tickers = tuple(tickers)


class ParameterError(MarketGeometryError, ValueError):
    pass


class DimensionError(ParameterError):
    pass


class CalibrationError(DataError):
    pass


class DegenerateBaselineError(CalibrationError):
    pass


class NumericalIntegrityError(MarketGeometryError, ArithmeticError):
    pass


class NonEuclideanError(NumericalIntegrityError):
    pass


class SingularCovarianceError(NumericalIntegrityError):
    """Scatter matrix too ill-conditioned to invert reliably."""
