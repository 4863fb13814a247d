"""Exception hierarchy shared by every mumkit module."""


class MumkitError(Exception):
    """Base class for all mumkit errors."""


class ConfigurationError(MumkitError, ValueError):
    """Invalid configuration value or tile/stride divisibility violation."""


class ShapeError(MumkitError, ValueError):
    """Array shapes or group indices do not agree."""


class CorruptDataError(MumkitError, IOError):
    """A dataset or checkpoint file has a bad header or is truncated."""


class StaleTraceError(MumkitError, RuntimeError):
    """A forward trace was reused after the network parameters changed."""


class NumericError(MumkitError, ArithmeticError):
    """Training produced a non-finite loss, or a gradient check failed."""

    def __init__(self, message: str, dump_path: str | None = None) -> None:
        super().__init__(message)
        self.dump_path = dump_path
