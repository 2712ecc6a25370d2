"""Exception hierarchy shared across the toolkit.

ConfigError maps to CLI exit code 2, DataError (and subclasses) to exit code 3.
"""


class ConfigError(Exception):
    """Invalid configuration: bad JSON, unknown option, missing required field."""


class DataError(Exception):
    """Invalid input data: missing files, misaligned predictions, bad labels."""


class FormatError(DataError):
    """Malformed interchange file; message carries the offending line number."""
