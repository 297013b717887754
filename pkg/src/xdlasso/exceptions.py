"""Exception and warning types raised across the package."""

from __future__ import annotations


class XDlassoError(Exception):
    """Base class for all package errors."""


class DomainError(XDlassoError, ValueError):
    """A parameter lies outside its admissible range."""


class DegenerateColumn(XDlassoError, ValueError):
    def __init__(self, column: int, sd: float = 0.0):
        self.column = column
        self.sd = sd
        super().__init__(f"column {column} has (near) zero standard deviation ({sd:.3g})")


class DegenerateInstrument(XDlassoError, ValueError):
    """The IVX instrument has (near) zero sample standard deviation."""


class InsufficientData(XDlassoError, ValueError):
    """Too few rows for the requested fold structure or fit."""


class NotConvergedWarning(RuntimeWarning):
    """Coordinate descent hit its iteration cap before meeting the tolerance."""


class SingularScore(XDlassoError, ArithmeticError):
    """The score vector is (numerically) orthogonal to the regressor of interest."""


class RankDeficient(XDlassoError, ArithmeticError):
    """A low-dimensional design matrix is singular."""


class ExperimentAborted(XDlassoError, RuntimeError):
    """Too many Monte Carlo replications failed."""


class FormatError(XDlassoError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class MissingTcodeRow(FormatError):
    pass


class NonPositiveForLog(XDlassoError, ValueError):
    pass


class InsufficientObservations(XDlassoError, ValueError):
    pass


class MissingSeries(XDlassoError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"series {name!r} not found in dataset")

    def __str__(self) -> str:
        return self.args[0]


class EmptyWindow(XDlassoError, ValueError):
    pass
