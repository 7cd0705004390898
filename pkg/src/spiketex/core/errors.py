"""
Exception hierarchy for spiketex

All errors raised on purpose by the package derive from SpiketexError so the
command-line front end can map them to exit codes in one place.
"""

from typing import Any, Dict, Optional


class SpiketexError(Exception):
    """Base class for every error raised by spiketex"""


class ArgumentError(SpiketexError, ValueError):
    """An argument violates an operation's precondition"""


class FormatError(SpiketexError):
    """An artifact file has a malformed header or body"""


class EventFormatError(FormatError):
    """An event, spike tensor or index file is malformed"""


class TruncationError(EventFormatError):
    """A binary artifact ends in the middle of a record"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class NumericError(SpiketexError, ArithmeticError):
    """Non-finite values appeared in a computation"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrainingDivergedError(NumericError):
    """Training produced a non-finite loss; carries the last good parameters"""

    def __init__(self, message: str, checkpoint: Any, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message, diagnostics)
        self.checkpoint = checkpoint


class IncompatibleModelError(SpiketexError):
    """A parameter file was produced for a different network spec"""


class CalibrationError(SpiketexError):
    """Power model calibration cannot be carried out on the given observations"""


class UsageError(SpiketexError):
    """The command line could not be interpreted"""
