"""Deterministic surrogate encoders/decoders for latent vectors.

Real pretrained image encoders never enter this package; they only show up
through index files produced elsewhere.  The encoders here are cheap, fully
deterministic stand-ins whose random projection matrix comes from a fixed
PRNG (SplitMix64 feeding Box-Muller) so golden vectors hold across platforms
and languages.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DimensionMismatchError, NonFiniteError

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of a SplitMix64 generator seeded with ``seed``."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _SPLITMIX_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    return z ^ (z >> np.uint64(31))


def seeded_normals(seed: int, count: int) -> np.ndarray:
    """Standard normals via Box-Muller over the SplitMix64 stream.

    Output k uses stream words 2k (radius) and 2k+1 (angle); pairs share a
    radius, so the sequence is reproducible for any prefix length.
    """
    pairs = (count + 1) // 2
    words = splitmix64_stream(seed, 2 * pairs)
    # map to (0, 1]: the +1 keeps log() finite
    u = ((words >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


class EncoderKind(enum.Enum):
    IDENTITY = "identity"
    DOWNSAMPLE = "downsample"
    RANDOM_PROJECTION = "random_projection"


class DecoderKind(enum.Enum):
    IDENTITY = "identity"
    FIXED_LINEAR = "fixed_linear"


@dataclass(frozen=True)
class EncoderSpec:
    kind: EncoderKind
    out_dim: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.out_dim < 1:
            raise ConfigError(f"out_dim must be positive, got {self.out_dim}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")

    def cache_key(self) -> str:
        return f"{self.kind.value}:{self.out_dim}:{self.seed}"


@dataclass(frozen=True)
class DecoderSpec:
    kind: DecoderKind = DecoderKind.IDENTITY
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind is DecoderKind.FIXED_LINEAR:
            if self.matrix is None:
                raise ConfigError("fixed_linear decoder requires a matrix")
            m = np.asarray(self.matrix, dtype=np.float64)
            if m.ndim != 2:
                raise ConfigError("decoder matrix must be 2-D")
            if np.linalg.matrix_rank(m) < m.shape[1]:
                raise ConfigError("decoder matrix must have full column rank")


@dataclass(frozen=True)
class Embedding:
    id: str
    vec: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return int(np.asarray(self.vec).shape[0])


@lru_cache(maxsize=64)
def _projection_matrix(seed: int, out_dim: int, in_dim: int) -> np.ndarray:
    normals = seeded_normals(seed, out_dim * in_dim)
    p = normals.reshape(out_dim, in_dim) / np.sqrt(out_dim)
    p.setflags(write=False)
    return p


def projection_matrix(spec: EncoderSpec, in_dim: int) -> np.ndarray:
    """The seeded Gaussian projection for ``spec``, generated once and cached."""
    if spec.kind is not EncoderKind.RANDOM_PROJECTION:
        raise ConfigError("projection_matrix only applies to random_projection encoders")
    return _projection_matrix(spec.seed, spec.out_dim, in_dim)


def encode(input: np.ndarray, spec: EncoderSpec, id: str = "") -> Embedding:
    """Map a latent/pixel vector to a d-dimensional embedding, deterministically."""
    v = np.asarray(input, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError(f"encode expects a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("encode: non-finite input")
    if spec.kind is EncoderKind.IDENTITY:
        if v.shape[0] != spec.out_dim:
            raise DimensionMismatchError(
                f"identity encoder with out_dim={spec.out_dim} got input of length {v.shape[0]}"
            )
        out = v.copy()
    elif spec.kind is EncoderKind.DOWNSAMPLE:
        if v.shape[0] % spec.out_dim != 0:
            raise DimensionMismatchError(
                f"input length {v.shape[0]} not divisible by out_dim {spec.out_dim}"
            )
        out = v.reshape(spec.out_dim, -1).mean(axis=1)
    else:
        out = projection_matrix(spec, v.shape[0]) @ v
    return Embedding(id=id, vec=out)


def decode(latent: np.ndarray, spec: DecoderSpec) -> np.ndarray:
    """Surrogate for the pixel-space decode step: identity or a fixed linear map."""
    v = np.asarray(latent, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("decode: non-finite input")
    if spec.kind is DecoderKind.IDENTITY:
        return v
    m = np.asarray(spec.matrix, dtype=np.float64)
    if m.shape[1] != v.shape[0]:
        raise DimensionMismatchError(f"decoder matrix {m.shape} vs latent {v.shape}")
    return m @ v
