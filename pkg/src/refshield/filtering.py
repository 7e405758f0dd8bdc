"""In-loop decision engine: observe a sampling run, score it, maybe stop it.

At each configured check step the current latent is turned into a pseudo-clean
query (x-pred), pushed through decode/encode, and scored against the reference
index.  A score above gamma rejects the run; in early-stop mode that also
halts sampling and banks the remaining steps.  Latency is tracked either on a
monotonic wall clock or on a synthetic per-step cost model so that latency
claims stay deterministic in CI.
"""

from __future__ import annotations

import enum
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import DecoderSpec, EncoderSpec, decode, encode
from .errors import ConfigError, FormatError
from .index import ReferenceIndex, score
from .sampler import BenchmarkSuite, ScenarioSpec, run_trajectory, step_iter
from .schedule import LatentState, Prediction, PredictionKind, Schedule, x_pred


class FilterMode(enum.Enum):
    EARLY_STOP = "early_stop"
    SCORE_ONLY = "score_only"


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class FilterConfig:
    gamma: float
    check_steps: tuple[int, ...]
    mode: FilterMode = FilterMode.EARLY_STOP
    # synthetic cost model (durations in ms); None means wall-clock timing
    per_step_cost_ms: float | None = None
    score_cost_ms: float = 0.0
    use_x_pred: bool = True

    def __post_init__(self) -> None:
        if not np.isfinite(self.gamma):
            raise ConfigError("gamma must be finite")
        if not -1.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [-1, 1], got {self.gamma}")
        steps = tuple(self.check_steps)
        if not steps:
            raise ConfigError("check_steps must be non-empty")
        if list(steps) != sorted(set(steps)) or steps[0] < 1:
            raise ConfigError("check_steps must be strictly increasing and >= 1")
        object.__setattr__(self, "check_steps", steps)


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    p: float
    step_decided: int
    argmax_id: str


@dataclass(frozen=True)
class LatencyLedger:
    t_start: float
    t_score_ready: float
    t_generation_end: float
    steps_executed: int
    steps_saved: int


@dataclass(frozen=True)
class RunResult:
    scenario_id: str
    label: int
    decision: Decision
    ledger: LatencyLedger
    final_latent: np.ndarray | None = field(default=None, repr=False)
    step_scores: dict[int, float] = field(default_factory=dict)


class _Clock:
    """Monotonic wall clock, or a deterministic simulated one (cost model)."""

    def __init__(self, per_step_ms: float | None, score_ms: float):
        self.per_step_ms = per_step_ms
        self.score_ms = score_ms
        self.sim = 0.0 if per_step_ms is not None else None
        self.t0 = self.now()

    def now(self) -> float:
        if self.sim is not None:
            return self.sim
        return time.perf_counter() * 1e3

    def add_step(self) -> None:
        if self.sim is not None:
            self.sim += self.per_step_ms

    def add_score(self) -> None:
        if self.sim is not None:
            self.sim += self.score_ms


def _query_embedding(
    state: LatentState,
    velocity: np.ndarray,
    enc: EncoderSpec,
    dec: DecoderSpec,
    use_x_pred: bool,
):
    if use_x_pred:
        latent = x_pred(state, Prediction(PredictionKind.VELOCITY, velocity), Schedule())
    else:
        latent = state.z
    return encode(decode(latent, dec), enc)


def run_filtered(
    spec: ScenarioSpec,
    index: ReferenceIndex,
    enc: EncoderSpec,
    dec: DecoderSpec,
    cfg: FilterConfig,
) -> RunResult:
    """Run one scenario under the filter; see :class:`FilterConfig` for modes."""
    if cfg.check_steps[-1] > spec.steps:
        raise ConfigError(
            f"check step {cfg.check_steps[-1]} beyond trajectory length {spec.steps}"
        )
    checks = set(cfg.check_steps)
    clock = _Clock(cfg.per_step_cost_ms, cfg.score_cost_ms)
    t_start = clock.now()

    best_p = -np.inf
    best_step = cfg.check_steps[0]
    best_id = ""
    t_score_ready: float | None = None
    step_scores: dict[int, float] = {}
    final_z: np.ndarray | None = None

    for i, state, velocity, nxt in step_iter(spec):
        clock.add_step()
        if i in checks:
            query = _query_embedding(state, velocity, enc, dec, cfg.use_x_pred)
            report = score(index, query)
            clock.add_score()
            step_scores[i] = report.p_max
            if report.p_max > best_p:
                best_p, best_step, best_id = report.p_max, i, report.argmax_id
            if report.p_max > cfg.gamma:
                t_score_ready = clock.now()
                if cfg.mode is FilterMode.EARLY_STOP:
                    decision = Decision(Verdict.REJECT, report.p_max, i, report.argmax_id)
                    ledger = LatencyLedger(
                        t_start=t_start,
                        t_score_ready=t_score_ready,
                        t_generation_end=clock.now(),
                        steps_executed=i,
                        steps_saved=spec.steps - i,
                    )
                    return RunResult(spec.id, spec.label, decision, ledger, None, step_scores)
            elif t_score_ready is None and i == cfg.check_steps[-1]:
                t_score_ready = clock.now()
        final_z = nxt.z

    t_end = clock.now()
    if t_score_ready is None:
        t_score_ready = t_end
    if best_p > cfg.gamma:
        decision = Decision(Verdict.REJECT, best_p, best_step, best_id)
    else:
        decision = Decision(Verdict.ACCEPT, best_p, best_step, best_id)
    ledger = LatencyLedger(
        t_start=t_start,
        t_score_ready=t_score_ready,
        t_generation_end=t_end,
        steps_executed=spec.steps,
        steps_saved=0,
    )
    return RunResult(spec.id, spec.label, decision, ledger, final_z, step_scores)


def run_unfiltered_then_check(
    spec: ScenarioSpec,
    index: ReferenceIndex,
    enc: EncoderSpec,
    dec: DecoderSpec,
    gamma: float,
    *,
    per_step_cost_ms: float | None = None,
    score_cost_ms: float = 0.0,
) -> RunResult:
    """Generate-then-classify baseline: full trajectory, one score at the end."""
    clock = _Clock(per_step_cost_ms, score_cost_ms)
    t_start = clock.now()
    traj = run_trajectory(spec)
    for _ in range(spec.steps):
        clock.add_step()
    t_gen_end = clock.now()
    query = encode(decode(traj.final.z, dec), enc)
    report = score(index, query)
    clock.add_score()
    t_score_ready = clock.now()
    verdict = Verdict.REJECT if report.p_max > gamma else Verdict.ACCEPT
    decision = Decision(verdict, report.p_max, spec.steps, report.argmax_id)
    ledger = LatencyLedger(
        t_start=t_start,
        t_score_ready=t_score_ready,
        t_generation_end=t_gen_end,
        steps_executed=spec.steps,
        steps_saved=0,
    )
    return RunResult(spec.id, spec.label, decision, ledger, traj.final.z,
                     {spec.steps: report.p_max})


def build_suite_index(suite: BenchmarkSuite, enc: EncoderSpec, dec: DecoderSpec) -> ReferenceIndex:
    """Encode the suite's latent corpus through the same decode/encode path as queries."""
    from .index import build_index

    embeddings = [
        encode(decode(vec, dec), enc, id=id_)
        for id_, vec in zip(suite.corpus_ids, suite.corpus)
    ]
    return build_index(embeddings, build_meta={"encoder": enc.cache_key()})


def latent_hash(z: np.ndarray | None) -> str:
    if z is None:
        return ""
    return hashlib.sha256(np.ascontiguousarray(z, dtype=np.float64).tobytes()).hexdigest()


def write_records(results: list[RunResult], path: str | Path) -> None:
    """Export run results as line-delimited JSON for the evaluation harness."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in results:
            rec = {
                "scenario_id": r.scenario_id,
                "label": r.label,
                "p": r.decision.p,
                "verdict": r.decision.verdict.value,
                "step_decided": r.decision.step_decided,
                "argmax_id": r.decision.argmax_id,
                "t_start": r.ledger.t_start,
                "t_score_ready": r.ledger.t_score_ready,
                "t_generation_end": r.ledger.t_generation_end,
                "steps_executed": r.ledger.steps_executed,
                "steps_saved": r.ledger.steps_saved,
                "final_hash": latent_hash(r.final_latent),
                "step_scores": {str(k): v for k, v in sorted(r.step_scores.items())},
            }
            fh.write(json.dumps(rec) + "\n")


def read_records(path: str | Path) -> list[dict]:
    """Parse a run-record file; raises :class:`FormatError` with the line number."""
    out = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: malformed record: {exc}") from exc
            for key in ("scenario_id", "label", "p", "verdict"):
                if key not in rec:
                    raise FormatError(f"{path}:{lineno}: missing field {key!r}")
            out.append(rec)
    return out
