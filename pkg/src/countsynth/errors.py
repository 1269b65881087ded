"""Exception types shared across the package."""


class CountsynthError(Exception):
    """Base class for all countsynth errors."""


class ValidationError(CountsynthError):
    """Invalid input data or parameters (bad schema, malformed CSV, domain violations)."""


class CalibrationError(CountsynthError):
    """Calibration target cannot be met within the given bounds."""
