"""Exception hierarchy.

``InputError`` covers unusable inputs (bad files, bad flags, bad schemas) and
maps to CLI exit code 1; ``DomainError`` covers inputs the pipeline rejects by
design (too-short songs, no detectable onsets) and maps to exit code 2.
"""


class DrumgenError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DrumgenError):
    """Unreadable or malformed input."""


class DomainError(DrumgenError):
    """Valid input rejected by a pipeline rule."""


class DecodeError(InputError):
    """Audio file could not be decoded."""


class UnsupportedCodec(DecodeError):
    """Audio format has no built-in or plugged-in decoder."""


class ClipTooShort(DomainError):
    """Clip shorter than the 2-minute minimum for window sampling."""


class NoOnsets(DomainError):
    """No percussive onsets detected in the analysis window."""


class GridUndefined(DomainError):
    """A rhythm grid cannot be fitted (no onsets)."""


class WindowTooShort(DomainError):
    """Step grid shorter than one 32-step window."""


class AnnotationError(InputError):
    """Malformed annotation file."""


class EmbeddingError(InputError):
    """Missing or malformed phrase embedding."""


class ModelFileError(InputError):
    """Model file is missing, malformed, or has mismatched shapes."""


class NumericError(DrumgenError):
    """Non-finite value surfaced during training or inference."""
