"""Exception hierarchy shared across the package.

The CLI maps :class:`UsageError` to exit code 2 and every other
:class:`EpitrendError` to exit code 1.
"""


class EpitrendError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(EpitrendError):
    """A file or byte stream does not match its declared format."""


class RowParseError(DataFormatError):
    """A single record could not be parsed; carries the offending row index."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class ConflictError(DataFormatError):
    """Duplicate keys where uniqueness is required."""


class IntegrityError(EpitrendError):
    """A value violates an internal invariant (e.g. non-monotone quantiles)."""


class InsufficientHistoryError(EpitrendError):
    """Not enough observations to carry out the requested computation."""


class UsageError(EpitrendError):
    """Bad command-line arguments or an empty selection."""
