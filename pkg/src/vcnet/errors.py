"""Exception types shared across the package.

The CLI maps these onto process exit codes, so raising the right family
matters more than the message text: configuration problems exit 1, data and
checkpoint problems exit 2, numeric failures exit 3.
"""


class VcnetError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(VcnetError):
    """Invalid configuration value or inconsistent flag combination."""


class DataError(VcnetError):
    """Malformed dataset, record, or checkpoint content."""


class CheckpointError(DataError):
    """Checkpoint file is missing fields, corrupt, or shape-incompatible."""


class NumericError(VcnetError):
    """A non-finite value (NaN or Inf) appeared where finite math is required."""
