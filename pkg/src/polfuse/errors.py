"""Exception taxonomy shared across the toolkit.

Two top-level families matter for the CLI exit-code contract:
ValidationError (and subclasses) exit with code 1, DataError and plain
OSError exit with code 2.
"""


class PolfuseError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PolfuseError):
    """Bad arguments, shapes, configuration or values (CLI exit code 1)."""


class ShapeError(ValidationError):
    """Operand shapes are inconsistent with the operation's contract."""


class ConfigError(ValidationError):
    """Malformed or unknown configuration content."""


class MetricError(ValidationError):
    """A metric was asked to evaluate a degenerate input."""


class DataError(PolfuseError):
    """File content could not be read or decoded (CLI exit code 2)."""


class ChecksumError(DataError):
    """Stored checksum does not match the file content."""


class NumericError(PolfuseError):
    """Non-finite values appeared where the contract forbids them."""
