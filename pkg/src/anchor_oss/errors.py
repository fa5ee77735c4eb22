"""Exception types. Every error carries a stable machine-readable ``code``."""

from __future__ import annotations


class AnchorError(Exception):
    """Base class for all computation errors raised by the package."""

    code = "ERROR"

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class ParseError(AnchorError):
    def __init__(self, code: str, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(code, message)
        self.row = row


class PanelError(AnchorError):
    def __init__(self, code: str, message: str, week: int | None = None):
        super().__init__(code, message)
        self.week = week


class NetworkError(AnchorError):
    pass


class GroupError(AnchorError):
    pass


class RegressionError(AnchorError):
    def __init__(self, code: str, message: str, columns: tuple[str, ...] = ()):
        super().__init__(code, message)
        self.columns = columns


class CounterfactualError(AnchorError):
    pass


class UsageError(AnchorError):
    """Bad command-line input (unknown group, unreadable config)."""
