"""Exception types shared across the package.

The CLI maps these onto exit codes: validation/config/dimension problems
exit 2, I/O and unreadable-input problems exit 1.
"""


class AnomaeError(Exception):
    """Base class for all package errors."""


class DimensionError(AnomaeError):
    """Tensor shapes do not conform; the message names both shapes."""


class ValidationError(AnomaeError):
    """Input values violate a documented precondition."""


class ConfigError(AnomaeError):
    """A model or run configuration is inconsistent."""


class UnsupportedOperationError(AnomaeError):
    """Operation requires a feature the model was built without."""


class PgmParseError(AnomaeError):
    """Malformed PGM bytes; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class CheckpointError(AnomaeError):
    """Base for malformed checkpoint files."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic."""


class UnsupportedVersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class PayloadLengthError(CheckpointError):
    """File is shorter than its declared contents."""


class TrailingBytesError(CheckpointError):
    """File has extra bytes after the checkpoint payload."""


class ChecksumError(CheckpointError):
    """CRC32 of the checkpoint body does not match the stored value."""
