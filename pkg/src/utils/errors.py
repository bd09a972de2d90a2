"""Exception hierarchy shared by every package in the project."""
from typing import Optional, Sequence


class NBNetError(Exception):
    """Base class for all errors raised by this project."""


class ConfigurationError(NBNetError, ValueError):
    """Invalid configuration or incompatible tensor shapes."""


class NumericalError(NBNetError, ArithmeticError):
    """Non-finite values, failed linear solves or NaN gradients."""

    def __init__(self, message: str, batch_index: Optional[int] = None, parameter: Optional[str] = None):
        details = []
        if batch_index is not None:
            details.append(f"batch_index={batch_index}")
        if parameter is not None:
            details.append(f"parameter={parameter}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.batch_index = batch_index
        self.parameter = parameter


class FormatError(NBNetError, ValueError):
    """Malformed image, manifest or tensor container file."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)
        self.offset = offset


class DatasetError(NBNetError, FileNotFoundError):
    """Dataset records pointing at files that do not exist."""

    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        listing = "\n  ".join(self.missing)
        super().__init__(f"{len(self.missing)} dataset file(s) missing:\n  {listing}")
