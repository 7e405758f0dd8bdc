"""Offline reference-image embedding exporter.

Runs an image encoder over a directory of reference images and writes the
binary index file format consumed by the refshield runtime filter.  The file
format is the only coupling to the runtime package; this exporter carries its
own independent writer so each side of the contract is implemented twice.
"""

from .errors import (
    DuplicateIdError,
    EncoderUnavailableError,
    ExportError,
    NoImagesError,
)
from .export import ExportJob, ExportSummary, run_export
from .registry import ENCODER_REGISTRY, ImageEncoder, get_encoder
from .writer import fnv1a64, write_index_file

__version__ = "0.1.0"

__all__ = [
    "DuplicateIdError",
    "ENCODER_REGISTRY",
    "EncoderUnavailableError",
    "ExportError",
    "ExportJob",
    "ExportSummary",
    "ImageEncoder",
    "NoImagesError",
    "fnv1a64",
    "get_encoder",
    "run_export",
    "write_index_file",
]
