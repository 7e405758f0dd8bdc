"""Deterministic Euler sampling loop with synthetic velocity oracles.

The oracles stand in for a text-to-image backbone at desk scale: each one
knows a hidden clean latent (the "target") and reports a velocity toward it.
With the exact oracle the ODE is linear with constant velocity, so Euler
integrates it without error; the perturbed oracle adds seeded noise that
decays toward t=1, emulating early-step uncertainty.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigError, FormatError, NonFiniteError, SamplingBudgetError
from .schedule import LatentState

UNRELATED_MAX_COSINE = 0.5
_REJECTION_BUDGET = 1000


class OracleKind(enum.Enum):
    EXACT = "exact"
    PERTURBED = "perturbed"
    DISTRACTOR = "distractor"


@dataclass(frozen=True)
class VelocityOracle:
    """Synthetic velocity model pulling the trajectory toward ``target``."""

    kind: OracleKind
    target: np.ndarray = field(repr=False)
    noise_scale: float = 0.0
    decay: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be >= 0")
        if not 0.0 <= self.decay <= 1.0:
            raise ConfigError("decay must be in [0, 1]")

    def velocity(self, state: LatentState, eps0: np.ndarray, step_index: int) -> np.ndarray:
        """Velocity at ``state``; ``eps0`` is the trajectory's initial noise draw."""
        base = np.asarray(self.target, dtype=np.float64) - eps0
        if self.kind is OracleKind.EXACT:
            return base
        scale = self.noise_scale * (1.0 - state.t) ** self.decay
        if self.kind is OracleKind.PERTURBED:
            rng = np.random.default_rng([self.seed, step_index])
            return base + scale * rng.standard_normal(base.shape[0])
        # distractor: fixed seeded off-target direction instead of fresh noise
        rng = np.random.default_rng([self.seed])
        pull = rng.standard_normal(base.shape[0])
        pull /= np.linalg.norm(pull)
        return base + scale * np.sqrt(base.shape[0]) * pull


@dataclass(frozen=True)
class ScenarioSpec:
    """One labeled benchmark run: label 1 means the hidden target is a corpus member."""

    id: str
    label: int
    steps: int
    latent_dim: int
    oracle: VelocityOracle
    seed: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ConfigError(f"label must be 0 or 1, got {self.label}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    states: tuple[LatentState, ...]
    step_times: tuple[float, ...]
    seed: int

    @property
    def final(self) -> LatentState:
        return self.states[-1]


def euler_step(state: LatentState, velocity: np.ndarray, dt: float) -> LatentState:
    """One explicit Euler update; the new time is clamped to 1."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if state.t + dt > 1.0 + 1e-9:
        raise ConfigError(f"step from t={state.t} by dt={dt} overshoots t=1")
    v = np.asarray(velocity)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("euler_step: non-finite velocity")
    return LatentState(z=state.z + dt * v, t=min(state.t + dt, 1.0))


def initial_state(spec: ScenarioSpec) -> tuple[LatentState, np.ndarray]:
    """Draw z_0 = eps from a standard normal with the scenario seed."""
    eps0 = np.random.default_rng(spec.seed).standard_normal(spec.latent_dim)
    return LatentState(z=eps0, t=0.0), eps0


def step_iter(spec: ScenarioSpec) -> Iterator[tuple[int, LatentState, np.ndarray, LatentState]]:
    """Yield (step_index, state_before, velocity, state_after) for steps 1..K.

    The velocity is the oracle's prediction at ``state_before``; the filter
    engine consumes this stream so it can observe mid-run without perturbing it.
    """
    state, eps0 = initial_state(spec)
    times = np.linspace(0.0, 1.0, spec.steps + 1)
    for i in range(1, spec.steps + 1):
        v = spec.oracle.velocity(state, eps0, i)
        nxt = euler_step(state, v, float(times[i] - times[i - 1]))
        # land exactly on the grid: clamp accumulated float error
        nxt = LatentState(z=nxt.z, t=float(times[i]))
        yield i, state, v, nxt
        state = nxt


def run_trajectory(spec: ScenarioSpec) -> Trajectory:
    """Integrate the full trajectory on a uniform K-step grid."""
    states = [initial_state(spec)[0]]
    for _, _, _, nxt in step_iter(spec):
        states.append(nxt)
    times = tuple(float(t) for t in np.linspace(0.0, 1.0, spec.steps + 1))
    return Trajectory(states=tuple(states), step_times=times, seed=spec.seed)


# ---------------------------------------------------------------------------
# benchmark suite generation

K_PRESET_TURBO = 9
K_PRESET_FULL = 50


@dataclass(frozen=True)
class BenchmarkSuite:
    """A labeled scenario set plus the latent-space corpus the labels refer to."""

    seed: int
    corpus: tuple[np.ndarray, ...]
    corpus_ids: tuple[str, ...]
    scenarios: tuple[ScenarioSpec, ...]
    matched_fraction: float
    latent_dim: int
    steps: int
    oracle_kind: OracleKind
    noise_scale: float
    decay: float
    # per-scenario provenance for compact serialization
    target_refs: tuple[tuple, ...] = ()


def _corpus_vectors(seed: int, corpus_size: int, latent_dim: int) -> list[np.ndarray]:
    rng = np.random.default_rng([seed, 0])
    return [rng.standard_normal(latent_dim) for _ in range(corpus_size)]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _unrelated_target(seed: int, j: int, latent_dim: int, corpus: list[np.ndarray]) -> tuple[np.ndarray, int]:
    for attempt in range(_REJECTION_BUDGET):
        cand = np.random.default_rng([seed, 2, j, attempt]).standard_normal(latent_dim)
        if all(_cosine(cand, c) < UNRELATED_MAX_COSINE for c in corpus):
            return cand, attempt
    raise SamplingBudgetError(
        f"could not draw an unrelated target after {_REJECTION_BUDGET} attempts "
        f"(latent_dim={latent_dim} too small?)"
    )


def _unrelated_target_at(seed: int, j: int, attempt: int, latent_dim: int) -> np.ndarray:
    return np.random.default_rng([seed, 2, j, attempt]).standard_normal(latent_dim)


def make_benchmark_suite(
    corpus_size: int,
    matched_fraction: float,
    seed: int,
    *,
    latent_dim: int = 256,
    steps: int = K_PRESET_TURBO,
    oracle_kind: OracleKind = OracleKind.EXACT,
    noise_scale: float = 0.0,
    decay: float = 1.0,
) -> BenchmarkSuite:
    """Build a labeled scenario suite over a fresh random corpus.

    Matched scenarios (label 1) target a corpus member; unmatched ones target a
    rejection-sampled vector with cosine < 0.5 to every corpus entry.
    """
    if corpus_size < 1:
        raise ConfigError("corpus_size must be >= 1")
    if not 0.0 <= matched_fraction <= 1.0:
        raise ConfigError("matched_fraction must be in [0, 1]")
    corpus = _corpus_vectors(seed, corpus_size, latent_dim)
    corpus_ids = [f"ref/{i:04d}" for i in range(corpus_size)]
    n_matched = round(matched_fraction * corpus_size)
    seed_rng = np.random.default_rng([seed, 1])

    scenarios: list[ScenarioSpec] = []
    target_refs: list[tuple] = []
    unrelated_count = 0
    for i in range(corpus_size):
        label = 1 if i < n_matched else 0
        if label == 1:
            target = corpus[i]
            target_refs.append(("corpus", i))
        else:
            target, attempt = _unrelated_target(seed, unrelated_count, latent_dim, corpus)
            target_refs.append(("unrelated", unrelated_count, attempt))
            unrelated_count += 1
        scen_seed = int(seed_rng.integers(2**63))
        oracle_seed = int(seed_rng.integers(2**63))
        oracle = VelocityOracle(
            kind=oracle_kind,
            target=target,
            noise_scale=noise_scale,
            decay=decay,
            seed=oracle_seed,
        )
        scenarios.append(
            ScenarioSpec(
                id=f"scen/{i:04d}",
                label=label,
                steps=steps,
                latent_dim=latent_dim,
                oracle=oracle,
                seed=scen_seed,
            )
        )
    return BenchmarkSuite(
        seed=seed,
        corpus=tuple(corpus),
        corpus_ids=tuple(corpus_ids),
        scenarios=tuple(scenarios),
        matched_fraction=matched_fraction,
        latent_dim=latent_dim,
        steps=steps,
        oracle_kind=oracle_kind,
        noise_scale=noise_scale,
        decay=decay,
        target_refs=tuple(target_refs),
    )


def save_suite(suite: BenchmarkSuite, path: str | Path) -> None:
    """Write the suite as line-delimited JSON: one header line, one line per scenario.

    Targets are stored by provenance (corpus index or rejection-sampling
    coordinates), so files stay small and loads are bit-reproducible.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "type": "refshield-suite",
            "version": 1,
            "seed": suite.seed,
            "corpus_size": len(suite.corpus),
            "matched_fraction": suite.matched_fraction,
            "latent_dim": suite.latent_dim,
            "steps": suite.steps,
            "oracle_kind": suite.oracle_kind.value,
            "noise_scale": suite.noise_scale,
            "decay": suite.decay,
        }
        fh.write(json.dumps(header) + "\n")
        for scen, ref in zip(suite.scenarios, suite.target_refs):
            rec = {
                "id": scen.id,
                "label": scen.label,
                "steps": scen.steps,
                "latent_dim": scen.latent_dim,
                "seed": scen.seed,
                "oracle_seed": scen.oracle.seed,
                "target_ref": list(ref),
            }
            fh.write(json.dumps(rec) + "\n")


def load_suite(path: str | Path) -> BenchmarkSuite:
    """Reload a suite saved by :func:`save_suite`, regenerating target vectors."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty suite file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: not JSON: {exc}") from exc
    if header.get("type") != "refshield-suite" or header.get("version") != 1:
        raise FormatError(f"{path}: not a version-1 suite file")
    seed = header["seed"]
    latent_dim = header["latent_dim"]
    oracle_kind = OracleKind(header["oracle_kind"])
    corpus = _corpus_vectors(seed, header["corpus_size"], latent_dim)

    scenarios: list[ScenarioSpec] = []
    target_refs: list[tuple] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: not JSON: {exc}") from exc
        ref = tuple(rec["target_ref"])
        if ref[0] == "corpus":
            target = corpus[ref[1]]
        elif ref[0] == "unrelated":
            target = _unrelated_target_at(seed, ref[1], ref[2], latent_dim)
        else:
            raise FormatError(f"{path}:{lineno}: unknown target_ref kind {ref[0]!r}")
        oracle = VelocityOracle(
            kind=oracle_kind,
            target=target,
            noise_scale=header["noise_scale"],
            decay=header["decay"],
            seed=rec["oracle_seed"],
        )
        scenarios.append(
            ScenarioSpec(
                id=rec["id"],
                label=rec["label"],
                steps=rec["steps"],
                latent_dim=rec["latent_dim"],
                oracle=oracle,
                seed=rec["seed"],
            )
        )
        target_refs.append(ref)
    return BenchmarkSuite(
        seed=seed,
        corpus=tuple(corpus),
        corpus_ids=tuple(f"ref/{i:04d}" for i in range(header["corpus_size"])),
        scenarios=tuple(scenarios),
        matched_fraction=header["matched_fraction"],
        latent_dim=latent_dim,
        steps=header["steps"],
        oracle_kind=oracle_kind,
        noise_scale=header["noise_scale"],
        decay=header["decay"],
        target_refs=tuple(target_refs),
    )


def with_oracle(suite: BenchmarkSuite, **overrides) -> BenchmarkSuite:
    """Copy of the suite with oracle parameters replaced on every scenario."""
    scenarios = tuple(
        replace(s, oracle=replace(s.oracle, **overrides)) for s in suite.scenarios
    )
    kind = overrides.get("kind", suite.oracle_kind)
    return replace(
        suite,
        scenarios=scenarios,
        oracle_kind=kind,
        noise_scale=overrides.get("noise_scale", suite.noise_scale),
        decay=overrides.get("decay", suite.decay),
    )
