"""Exception types for bitstream and model handling.

Argument validation errors raise plain :class:`ValueError`; the classes here
cover failures while consuming serialized data, where the caller needs to
distinguish "not ours", "broken", and "too new".
"""


class BitstreamError(Exception):
    """Base class for errors raised while reading serialized data."""


class NotABitstreamError(BitstreamError):
    """The buffer does not start with the expected magic bytes."""


class UnsupportedVersionError(BitstreamError):
    """The stream declares a format version this build cannot read."""


class CorruptStreamError(BitstreamError):
    """The stream is truncated or contains out-of-range values."""


class IncompatibleModelError(Exception):
    """A stream's header does not match the model it is decoded against."""
