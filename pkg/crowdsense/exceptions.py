"""
Custom exception classes for the crowdsense package.

Every exception carries a human readable message and a stable error code.
The category bases (configuration, I/O, format, degenerate data) decide the
CLI exit code of a failed stage.
"""

from typing import Iterable, List, Optional


class CrowdSenseException(Exception):
    """Base exception class for all crowdsense exceptions."""

    exit_code = 1

    def __init__(self, message: str, error_code: Optional[str] = None):
        self.message = message
        self.error_code = error_code
        super().__init__(self.message)


# Validation / configuration exceptions
class ConfigurationException(CrowdSenseException):
    """Raised when a configuration value is invalid or missing."""

    exit_code = 2


class ValidationException(ConfigurationException):
    """Base class for invalid arguments handed to an operation."""
    pass


class InvalidGeoPointException(ValidationException):
    """Raised when latitude/longitude are out of range or not finite."""
    pass


class InvalidRegionException(ValidationException):
    """Raised when a region has a non-positive radius or side."""
    pass


class EmptyInputException(ValidationException):
    """Raised when an operation receives an empty collection."""
    pass


class DegenerateWeightsException(ValidationException):
    """Raised when midpoint weights sum to zero or do not match the points."""
    pass


# Data access exceptions
class FileIOException(CrowdSenseException):
    """Raised when an input file cannot be read or an output cannot be written."""

    exit_code = 3


class IoError(FileIOException):
    """Raised when a post file is unreadable."""
    pass


class DataPersistenceException(FileIOException):
    """Raised when the run ledger cannot be written."""
    pass


# Format exceptions
class FormatException(CrowdSenseException):
    """Raised when a file does not have the expected structure."""

    exit_code = 4


class FormatError(FormatException):
    """Raised when too many rows of a post file are malformed."""
    pass


# Degenerate data exceptions
class DegenerateDataException(CrowdSenseException):
    """Raised when the data cannot support the requested computation."""

    exit_code = 5


class EmptySlotException(DegenerateDataException):
    """Raised when a time slot has no posts."""
    pass


class DegenerateSlotException(DegenerateDataException):
    """Raised when DBSCAN finds fewer clusters than requested representatives."""

    def __init__(self, message: str, error_code: Optional[str] = None, found: int = 0, wanted: int = 0):
        super().__init__(message, error_code)
        self.found = found
        self.wanted = wanted


class UndefinedSilhouetteException(DegenerateDataException):
    """Raised when the silhouette is requested for fewer than two clusters."""
    pass


class TooShortException(DegenerateDataException):
    """Raised when a sequence or trace is too short for the requested estimate."""
    pass


class LabelMismatchException(DegenerateDataException):
    """Raised when labeled special days fall outside the scored dates."""

    def __init__(self, message: str, offenders: Iterable = (), error_code: Optional[str] = "LABEL_MISMATCH"):
        self.offenders: List = sorted(offenders)
        super().__init__(message, error_code)


class StageFailedException(CrowdSenseException):
    """Raised when a stage another stage depends on failed; keeps that stage's exit code."""

    def __init__(self, message: str, error_code: Optional[str] = None, exit_code: int = 1):
        super().__init__(message, error_code)
        self.exit_code = exit_code
