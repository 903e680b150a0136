"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericError -> 3,
DataIOError -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration, arguments, or shapes supplied by the caller."""


class DimensionError(ConfigError):
    """Shape mismatch between a batch and a layer, or between tensors."""

    def __init__(self, message, layer_index=None):
        super().__init__(message)
        self.layer_index = layer_index


class NumericError(ArithmeticError):
    """Non-finite values or a failed numerical solve."""


class DataIOError(OSError):
    """Malformed or unreadable data files / checkpoints."""
