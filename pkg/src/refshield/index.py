"""Cached reference-embedding matrix: build, score, persist.

Rows are l2-normalized float32; a query is scored against all rows with one
matrix-vector product, so per-query cost is independent of how much work went
into building the index.  The on-disk format (magic ``EDGSHLD1``) is the
interchange contract with external embedding exporters.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import Embedding
from .errors import (
    BadMagicError,
    BadVersionError,
    ChecksumMismatchError,
    ConfigError,
    DimensionMismatchError,
    NormInvariantError,
    TruncatedFileError,
)

MAGIC = b"EDGSHLD1"
FORMAT_VERSION = 1
NORM_TOL = 1e-6

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of ``data``."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class SimilarityReport:
    """Per-reference cosine scores for one query."""

    scores: np.ndarray = field(repr=False)
    p_max: float
    argmax_id: str


@dataclass(frozen=True)
class ReferenceIndex:
    rows: np.ndarray = field(repr=False)  # n x d float32, unit rows
    ids: tuple[str, ...]
    build_meta: dict = field(default_factory=dict, hash=False, compare=False)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def rows_f64(self) -> np.ndarray:
        """Float64 copy used for scoring; cached so score() stays allocation-light."""
        cached = self.__dict__.get("_rows_f64")
        if cached is None:
            cached = self.rows.astype(np.float64)
            cached.setflags(write=False)
            self.__dict__["_rows_f64"] = cached
        return cached


def _validate_rows(rows: np.ndarray, ids: tuple[str, ...]) -> None:
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    bad = np.nonzero(np.abs(norms - 1.0) > NORM_TOL)[0]
    if bad.size:
        raise NormInvariantError(
            f"row {bad[0]} (id {ids[bad[0]]!r}) has norm {norms[bad[0]]:.8f}, expected 1"
        )


def build_index(embeddings: list[Embedding], build_meta: dict | None = None) -> ReferenceIndex:
    """Normalize and stack embeddings into a scoring matrix; order is preserved."""
    if not embeddings:
        raise ConfigError("cannot build an index from zero embeddings")
    d = embeddings[0].dim
    ids: list[str] = []
    rows = np.empty((len(embeddings), d), dtype=np.float32)
    seen: set[str] = set()
    for i, emb in enumerate(embeddings):
        vec = np.asarray(emb.vec, dtype=np.float64)
        if vec.shape[0] != d:
            raise DimensionMismatchError(
                f"embedding {emb.id!r} has dim {vec.shape[0]}, expected {d}"
            )
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise ConfigError(f"embedding {emb.id!r} has zero norm")
        if emb.id in seen:
            raise ConfigError(f"duplicate embedding id {emb.id!r}")
        seen.add(emb.id)
        rows[i] = (vec / norm).astype(np.float32)
        ids.append(emb.id)
    # float32 rounding can leave the norm a hair off 1; renormalize in f32
    rows /= np.linalg.norm(rows.astype(np.float64), axis=1, keepdims=True).astype(np.float32)
    meta = dict(build_meta or {})
    meta.setdefault("built_at", time.time())
    return ReferenceIndex(rows=rows, ids=tuple(ids), build_meta=meta)


def score(index: ReferenceIndex, query: Embedding) -> SimilarityReport:
    """Cosine scores of ``query`` against every row, via one matvec."""
    q = np.asarray(query.vec, dtype=np.float64)
    if q.shape[0] != index.d:
        raise DimensionMismatchError(f"query dim {q.shape[0]} vs index d {index.d}")
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise ConfigError("query has zero norm")
    scores = index.rows_f64 @ (q / norm)
    arg = int(np.argmax(scores))  # ties resolve to the lowest row index
    return SimilarityReport(scores=scores, p_max=float(scores[arg]), argmax_id=index.ids[arg])


def save_index(index: ReferenceIndex, path: str | Path) -> None:
    """Serialize to the little-endian binary format, checksum included."""
    body = bytearray()
    body += MAGIC
    body += struct.pack("<II", FORMAT_VERSION, index.n)
    body += struct.pack("<I", index.d)
    for i, id_ in enumerate(index.ids):
        raw = id_.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ConfigError(f"id {id_!r} exceeds 65535 bytes")
        body += struct.pack("<H", len(raw))
        body += raw
        body += index.rows[i].astype("<f4").tobytes()
    body += struct.pack("<Q", fnv1a64(bytes(body)))
    Path(path).write_bytes(bytes(body))


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"{self.path}: need {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def load_index(path: str | Path) -> ReferenceIndex:
    """Load and fully validate an index file (magic, checksum, norm invariant)."""
    path = Path(path)
    data = path.read_bytes()
    r = _Reader(data, path)
    magic = r.take(8)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    version, n = struct.unpack("<II", r.take(8))
    if version != FORMAT_VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    (d,) = struct.unpack("<I", r.take(4))
    if n < 1 or d < 1:
        raise TruncatedFileError(f"{path}: invalid header n={n}, d={d}")
    ids: list[str] = []
    rows = np.empty((n, d), dtype=np.float32)
    for i in range(n):
        (id_len,) = struct.unpack("<H", r.take(2))
        ids.append(r.take(id_len).decode("utf-8"))
        rows[i] = np.frombuffer(r.take(4 * d), dtype="<f4")
    (stored,) = struct.unpack("<Q", r.take(8))
    if r.pos != len(data):
        raise TruncatedFileError(f"{path}: {len(data) - r.pos} trailing bytes")
    actual = fnv1a64(data[: len(data) - 8])
    if stored != actual:
        raise ChecksumMismatchError(
            f"{path}: checksum {stored:#018x} != computed {actual:#018x}"
        )
    _validate_rows(rows, tuple(ids))
    if len(set(ids)) != len(ids):
        raise NormInvariantError(f"{path}: duplicate ids in file")
    return ReferenceIndex(rows=rows, ids=tuple(ids), build_meta={"loaded_from": str(path)})
