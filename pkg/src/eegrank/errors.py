"""Exception types shared across the toolkit, mapped to CLI exit codes."""


class EegRankError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 4


class ConfigurationError(EegRankError):
    """Invalid configuration: bad cutoffs, unknown channels, malformed configs."""

    exit_code = 2


class DataError(EegRankError):
    """Invalid or inconsistent data: shape mismatches, unknown ids, bad files."""

    exit_code = 3


class TrainingError(DataError):
    """A model cannot be trained from the given data (e.g. single-class labels)."""
