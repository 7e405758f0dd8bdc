"""Linear-schedule interpolation math and pseudo-clean latent estimation.

Time runs from t=0 (pure noise) to t=1 (clean data); callers working in the
opposite convention must convert before entering this module.  Only the
linear schedule (alpha_t = t, sigma_t = 1 - t) is supported; the two kinds
differ in what the model predicts (velocity vs. noise), not in the path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    NearSingularTimeError,
    NonFiniteError,
)

DEFAULT_T_FLOOR = 0.05


class ScheduleKind(enum.Enum):
    LINEAR_FLOW = "linear_flow"
    LINEAR_NOISE = "linear_noise"


class PredictionKind(enum.Enum):
    VELOCITY = "velocity"
    NOISE = "noise"


@dataclass(frozen=True)
class Schedule:
    """Linear noise schedule.  ``t_floor`` guards only the noise-form division."""

    kind: ScheduleKind = ScheduleKind.LINEAR_FLOW
    t_floor: float = DEFAULT_T_FLOOR

    def __post_init__(self) -> None:
        if not 0.0 < self.t_floor < 1.0:
            raise ConfigError(f"t_floor must be in (0, 1), got {self.t_floor}")

    def alpha(self, t: float) -> float:
        return t

    def sigma(self, t: float) -> float:
        return 1.0 - t


@dataclass(frozen=True)
class LatentState:
    """A latent vector together with its interpolation time."""

    z: np.ndarray
    t: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise ConfigError(f"t must be in [0, 1], got {self.t}")
        if not np.all(np.isfinite(self.z)):
            raise NonFiniteError("latent contains NaN/Inf")


@dataclass(frozen=True)
class Prediction:
    """Model output: either a velocity field sample or a noise estimate."""

    kind: PredictionKind
    value: np.ndarray = field(repr=False)


def _check_same_dim(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{what}: shapes {a.shape} vs {b.shape}")


def interpolate(x: np.ndarray, eps: np.ndarray, t: float) -> LatentState:
    """Linear interpolation z_t = t*x + (1-t)*eps between data and noise."""
    x = np.asarray(x)
    eps = np.asarray(eps)
    _check_same_dim(x, eps, "interpolate")
    if not 0.0 <= t <= 1.0:
        raise ConfigError(f"t must be in [0, 1], got {t}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(eps))):
        raise NonFiniteError("interpolate: non-finite endpoint")
    dtype = np.result_type(x, eps, np.float32)
    x = x.astype(dtype, copy=False)
    eps = eps.astype(dtype, copy=False)
    z = dtype.type(t) * x + dtype.type(1.0 - t) * eps
    return LatentState(z=z, t=t)


def true_velocity(x: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Time derivative of the linear path: v = x - eps, constant in t."""
    x = np.asarray(x)
    eps = np.asarray(eps)
    _check_same_dim(x, eps, "true_velocity")
    return x - eps


def x_pred(state: LatentState, pred: Prediction, schedule: Schedule | None = None) -> np.ndarray:
    """Estimate the clean latent from an intermediate state and a model prediction.

    Velocity form:  x_hat = z_t + (1 - t) * v_hat
    Noise form:     x_hat = (z_t - (1 - t) * eps_hat) / t,  defined for t >= t_floor.
    """
    if schedule is None:
        schedule = Schedule()
    value = np.asarray(pred.value)
    _check_same_dim(state.z, value, "x_pred")
    t = state.t
    dtype = np.result_type(state.z, value, np.float32)
    if pred.kind is PredictionKind.VELOCITY:
        out = state.z + dtype.type(1.0 - t) * value
    else:
        if t < schedule.t_floor:
            raise NearSingularTimeError(
                f"noise-form estimate at t={t} below t_floor={schedule.t_floor}"
            )
        out = (state.z - dtype.type(1.0 - t) * value) / dtype.type(t)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("x_pred produced non-finite values")
    return out
