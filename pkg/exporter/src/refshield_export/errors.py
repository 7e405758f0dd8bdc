"""Exporter exception hierarchy."""


class ExportError(Exception):
    """Base class for all exporter failures."""


class NoImagesError(ExportError):
    """The input directory contained no usable images."""


class DuplicateIdError(ExportError):
    """Two files map to the same reference id (e.g. a case collision)."""


class EncoderUnavailableError(ExportError):
    """The requested encoder cannot run (missing weights or dependencies)."""
