"""Independent writer for the ``EDGSHLD1`` reference-index file format.

Deliberately not imported from the runtime package: the binary layout is the
interchange contract between the two components, and implementing it on both
sides means the round-trip tests actually exercise that contract.

Layout (all integers little-endian):

    8 bytes   magic ``EDGSHLD1``
    u32       format version (1)
    u32       n, number of rows
    u32       d, embedding dimension
    n times:  u16 id length, UTF-8 id bytes, d float32 values
    u64       FNV-1a hash of everything before it
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ExportError

MAGIC = b"EDGSHLD1"
FORMAT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def write_index_file(path: str | Path, ids: list[str], rows: np.ndarray) -> int:
    """Write unit-normalized ``rows`` with their ``ids``; returns the checksum.

    Rows are l2-normalized here in float64 before the float32 cast, so the
    file always satisfies the on-disk norm invariant regardless of what the
    encoder produced.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] != len(ids):
        raise ExportError(
            f"rows shape {rows.shape} does not match {len(ids)} ids"
        )
    if not np.all(np.isfinite(rows)):
        raise ExportError("embedding matrix contains non-finite values")
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        bad = int(np.nonzero(norms[:, 0] == 0.0)[0][0])
        raise ExportError(f"embedding for {ids[bad]!r} has zero norm")
    unit = (rows / norms).astype(np.float32)
    # cast to f32 can nudge the norm off 1; renormalize once more in f32
    unit /= np.linalg.norm(unit.astype(np.float64), axis=1, keepdims=True).astype(
        np.float32
    )

    body = bytearray()
    body += MAGIC
    body += struct.pack("<III", FORMAT_VERSION, len(ids), unit.shape[1])
    for id_, row in zip(ids, unit):
        raw = id_.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ExportError(f"id {id_!r} exceeds 65535 bytes")
        body += struct.pack("<H", len(raw))
        body += raw
        body += row.astype("<f4").tobytes()
    checksum = fnv1a64(bytes(body))
    body += struct.pack("<Q", checksum)
    Path(path).write_bytes(bytes(body))
    return checksum
