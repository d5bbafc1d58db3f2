"""Exception types shared across the package."""


class SeaQuganError(Exception):
    """Base class for package errors."""


class ConfigurationError(SeaQuganError, ValueError):
    """Invalid configuration value or model layout."""


class PortFileError(SeaQuganError, ValueError):
    """Malformed or invalid ports CSV."""


class InfeasibleSamplingError(SeaQuganError, RuntimeError):
    """Rejection sampling could not find an acceptable port quadruple."""


class DegenerateInputError(SeaQuganError, ValueError):
    """Input too degenerate to normalize or fit."""


class CorruptDatasetError(SeaQuganError, ValueError):
    """Persisted dataset violates its invariants."""
