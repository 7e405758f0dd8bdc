"""Exception hierarchy shared across the package.

Two broad families matter for callers: `FormatError` (the input is not a
well-formed file / argument, CLI exit 2) and `IntegrityError` (the input is
well-formed but violates a data invariant, CLI exit 3).
"""


class RefShieldError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(RefShieldError, ValueError):
    """Two vectors/matrices that must share a dimension do not."""


class NonFiniteError(RefShieldError, ValueError):
    """NaN or Inf encountered where a finite value is required."""


class NearSingularTimeError(RefShieldError, ValueError):
    """Noise-form pseudo-clean estimate requested below the time floor."""


class ConfigError(RefShieldError, ValueError):
    """Invalid configuration detected at construction time."""


class SamplingBudgetError(RefShieldError, RuntimeError):
    """Rejection sampling exhausted its retry budget."""


class FormatError(RefShieldError):
    """A file or argument does not match its expected format."""


class BadMagicError(FormatError):
    """Index file does not start with the expected magic bytes."""


class BadVersionError(FormatError):
    """Index file declares an unsupported format version."""


class TruncatedFileError(FormatError):
    """Index file ends before its declared payload does."""


class IntegrityError(RefShieldError):
    """Well-formed data violating a content invariant."""


class ChecksumMismatchError(IntegrityError):
    """Stored checksum does not match the file contents."""


class NormInvariantError(IntegrityError):
    """A reference row is not unit-norm within tolerance."""
