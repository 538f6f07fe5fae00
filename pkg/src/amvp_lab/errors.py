"""Exception hierarchy shared by every module.

The CLI maps the three top-level families onto exit codes:
``ConfigError`` -> 1, ``DataError`` -> 2, ``NumericalError`` -> 3.
"""

from __future__ import annotations

from typing import Any


class AmvpLabError(Exception):
    """Base class for all library errors."""


class ConfigError(AmvpLabError):
    """Invalid configuration or argument values."""


class DataError(AmvpLabError):
    """Input data that cannot be ingested or is structurally unusable."""


class LoadError(DataError):
    """A price CSV could not be parsed into a valid panel.

    ``row`` and ``column`` locate the offending cell when known (row numbers are
    1-based file lines, the header being line 1).
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        full = f"{message} ({', '.join(loc)})" if loc else message
        super().__init__(full)
        self.row = row
        self.column = column


class NumericalError(AmvpLabError):
    """A numerical routine failed to produce a trustworthy answer."""


class SingularCovarianceError(NumericalError):
    def __init__(self, condition: float):
        super().__init__(f"covariance matrix is numerically singular (condition estimate {condition:.3e})")
        self.condition = condition


class SolverError(NumericalError):
    """Optimizer failure; ``best`` holds the best iterate found, if any."""

    def __init__(self, message: str, best: Any = None, iteration: int | None = None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.best = best
        self.iteration = iteration


class EstimationError(NumericalError):
    """Model fitting failure; ``best_loglik`` is the best objective reached."""

    def __init__(self, message: str, best_loglik: float | None = None):
        super().__init__(message)
        self.best_loglik = best_loglik
