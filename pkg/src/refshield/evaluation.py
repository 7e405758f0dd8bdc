"""Threshold-free metrics and the two benchmark harnesses.

ROC-AUC uses the rank (Mann-Whitney) formulation with half credit for ties,
which is identical to the trapezoid over the tie-grouped ROC curve.  PR-AUC
uses the step-wise precision-recall integral (average precision) with tied
scores processed as one threshold group, never linear interpolation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .encoders import DecoderSpec, EncoderKind, EncoderSpec, decode, encode
from .errors import ConfigError
from .filtering import FilterConfig, FilterMode, RunResult, build_suite_index, run_filtered
from .index import Embedding, build_index, score
from .sampler import BenchmarkSuite, OracleKind, make_benchmark_suite


@dataclass(frozen=True)
class EvalSample:
    label: int
    score: float

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ConfigError(f"label must be 0 or 1, got {self.label}")
        if not np.isfinite(self.score):
            raise ConfigError("score must be finite")


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    tpr: float
    fpr: float
    precision: float
    recall: float
    accuracy: float


@dataclass(frozen=True)
class CurveSummary:
    roc_auc: float
    pr_auc: float
    curve_points: tuple[CurvePoint, ...] = field(repr=False)


@dataclass(frozen=True)
class ScalabilityRecord:
    n_refs: int
    roc_auc: float
    median_score_latency_ms: float
    median_end_to_end_latency_ms: float
    naive_median_score_latency_ms: float


def _split(samples: Sequence[EvalSample]) -> tuple[np.ndarray, np.ndarray]:
    labels = np.array([s.label for s in samples])
    scores = np.array([s.score for s in samples], dtype=np.float64)
    if labels.size == 0 or labels.min() == labels.max():
        raise ConfigError("need at least one positive and one negative sample")
    return labels, scores


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, tied values sharing their average rank."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [scores.size]))
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = (a + b + 1) / 2.0
    return ranks


def roc_auc(samples: Sequence[EvalSample]) -> float:
    """Probability a random positive outscores a random negative; ties count half."""
    labels, scores = _split(samples)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(samples: Sequence[EvalSample]) -> float:
    """Step-interpolated area under the precision-recall curve."""
    labels, scores = _split(samples)
    order = np.argsort(-scores, kind="mergesort")
    labels = labels[order]
    scores = scores[order]
    n_pos = int(labels.sum())
    area = 0.0
    tp = 0
    total = 0
    i = 0
    n = labels.size
    while i < n:
        j = i
        while j < n and scores[j] == scores[i]:
            j += 1
        prev_tp = tp
        tp += int(labels[i:j].sum())
        total = j
        precision = tp / total
        area += precision * (tp - prev_tp) / n_pos
        i = j
    return area


def threshold_sweep(
    samples: Sequence[EvalSample], grid: Iterable[float]
) -> list[tuple[float, float]]:
    """Accuracy of the rule ``score > gamma`` at each grid threshold."""
    grid = list(grid)
    if not grid:
        raise ConfigError("threshold grid must be non-empty")
    labels = np.array([s.label for s in samples])
    scores = np.array([s.score for s in samples], dtype=np.float64)
    out = []
    for g in grid:
        pred = (scores > g).astype(int)
        out.append((float(g), float(np.mean(pred == labels))))
    return out


def curve_summary(samples: Sequence[EvalSample]) -> CurveSummary:
    """Full ROC/PR/accuracy curve over the distinct observed scores."""
    labels, scores = _split(samples)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    points = []
    for thr in np.unique(scores)[::-1]:
        pred = scores > thr
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        precision = tp / max(tp + fp, 1)
        points.append(
            CurvePoint(
                threshold=float(thr),
                tpr=tp / n_pos,
                fpr=fp / n_neg,
                precision=precision,
                recall=tp / n_pos,
                accuracy=float(np.mean(pred.astype(int) == labels)),
            )
        )
    return CurveSummary(
        roc_auc=roc_auc(samples), pr_auc=pr_auc(samples), curve_points=tuple(points)
    )


def samples_from_records(records: Iterable[dict], step: int | None = None) -> list[EvalSample]:
    """(label, score) pairs from run records; ``step`` selects a per-step score."""
    out = []
    for rec in records:
        if step is None:
            out.append(EvalSample(label=int(rec["label"]), score=float(rec["p"])))
        else:
            out.append(
                EvalSample(label=int(rec["label"]), score=float(rec["step_scores"][str(step)]))
            )
    return out


# ---------------------------------------------------------------------------
# benchmark harnesses


def run_ablation(
    suite: BenchmarkSuite,
    enc: EncoderSpec,
    dec: DecoderSpec,
    steps_grid: Sequence[int] | None = None,
) -> list[tuple[int, str, float]]:
    """Per-step ROC-AUC with and without the pseudo-clean query transformation.

    Returns rows (step, variant, roc_auc) suitable for a plot-data table.
    """
    if steps_grid is None:
        steps_grid = list(range(1, suite.steps + 1))
    index = build_suite_index(suite, enc, dec)
    rows: list[tuple[int, str, float]] = []
    per_variant: dict[str, list[RunResult]] = {}
    for variant, use_x_pred in (("x_pred", True), ("raw", False)):
        cfg = FilterConfig(
            gamma=1.0,
            check_steps=tuple(steps_grid),
            mode=FilterMode.SCORE_ONLY,
            use_x_pred=use_x_pred,
        )
        per_variant[variant] = [
            run_filtered(s, index, enc, dec, cfg) for s in suite.scenarios
        ]
    for step in steps_grid:
        for variant in ("x_pred", "raw"):
            samples = [
                EvalSample(r.label, r.step_scores[step]) for r in per_variant[variant]
            ]
            rows.append((step, variant, roc_auc(samples)))
    return rows


def _random_embeddings(n: int, d: int, seed: int) -> list[Embedding]:
    rng = np.random.default_rng(seed)
    return [Embedding(id=f"ref/{i:04d}", vec=rng.standard_normal(d)) for i in range(n)]


def _timed_median_ms(fn, calls: int) -> float:
    durations = np.empty(calls)
    for i in range(calls):
        t0 = time.perf_counter_ns()
        fn()
        durations[i] = time.perf_counter_ns() - t0
    return float(np.median(durations)) / 1e6


def cached_score_latency_ms(n: int, d: int, calls: int = 1000, seed: int = 7) -> float:
    """Median wall-clock of one cached-index score() call at (n, d)."""
    index = build_index(_random_embeddings(n, d, seed))
    query = Embedding(id="q", vec=np.random.default_rng(seed + 1).standard_normal(d))
    score(index, query)  # warm up
    return _timed_median_ms(lambda: score(index, query), calls)


def naive_score_latency_ms(
    n: int, d: int, raw_dim: int = 256, calls: int = 200, seed: int = 7
) -> float:
    """Median wall-clock of a per-reference re-encoding baseline at (n, d).

    Deliberately naive: every call re-encodes all n raw references before
    comparing, so the cost grows linearly in n.
    """
    rng = np.random.default_rng(seed)
    refs_raw = [rng.standard_normal(raw_dim) for _ in range(n)]
    query_raw = rng.standard_normal(raw_dim)
    enc = EncoderSpec(kind=EncoderKind.RANDOM_PROJECTION, out_dim=d, seed=seed)
    dec = DecoderSpec()

    def one_call() -> float:
        q = encode(decode(query_raw, dec), enc).vec
        q = q / np.linalg.norm(q)
        best = -np.inf
        for r in refs_raw:
            e = encode(decode(r, dec), enc).vec
            best = max(best, float(e @ q / np.linalg.norm(e)))
        return best

    one_call()  # warm up
    return _timed_median_ms(one_call, calls)


def run_scalability(
    sizes: Sequence[int],
    *,
    d: int = 512,
    latent_dim: int = 256,
    calls: int = 1000,
    naive_calls: int = 50,
    seed: int = 11,
    noise_scale: float = 0.3,
) -> list[ScalabilityRecord]:
    """Reference-count sweep: AUC plus cached and naive scoring latencies per size."""
    enc = EncoderSpec(kind=EncoderKind.RANDOM_PROJECTION, out_dim=d, seed=seed)
    dec = DecoderSpec()
    records = []
    for n in sizes:
        suite = make_benchmark_suite(
            n, 0.5, seed + n, latent_dim=latent_dim,
            oracle_kind=OracleKind.PERTURBED, noise_scale=noise_scale,
        )
        index = build_suite_index(suite, enc, dec)
        cfg = FilterConfig(
            gamma=1.0, check_steps=(suite.steps,), mode=FilterMode.SCORE_ONLY
        )
        results = [run_filtered(s, index, enc, dec, cfg) for s in suite.scenarios]
        auc = roc_auc([EvalSample(r.label, r.decision.p) for r in results])
        e2e = float(np.median([r.ledger.t_score_ready - r.ledger.t_start for r in results]))
        records.append(
            ScalabilityRecord(
                n_refs=n,
                roc_auc=auc,
                median_score_latency_ms=cached_score_latency_ms(n, d, calls, seed),
                median_end_to_end_latency_ms=e2e,
                naive_median_score_latency_ms=naive_score_latency_ms(
                    n, d, latent_dim, naive_calls, seed
                ),
            )
        )
    return records


# ---------------------------------------------------------------------------
# plot-data / summary writers (tab-separated text; plotting is out of scope)


def write_ablation_table(rows: list[tuple[int, str, float]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("step\tvariant\troc_auc\n")
        for step, variant, auc in rows:
            fh.write(f"{step}\t{variant}\t{auc:.6f}\n")


def write_scalability_table(records: list[ScalabilityRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(
            "n_refs\troc_auc\tmedian_score_latency_ms\t"
            "median_end_to_end_latency_ms\tnaive_median_score_latency_ms\n"
        )
        for r in records:
            fh.write(
                f"{r.n_refs}\t{r.roc_auc:.6f}\t{r.median_score_latency_ms:.6f}\t"
                f"{r.median_end_to_end_latency_ms:.6f}\t"
                f"{r.naive_median_score_latency_ms:.6f}\n"
            )


def write_summary(summary: CurveSummary, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"roc_auc\t{summary.roc_auc:.9f}\n")
        fh.write(f"pr_auc\t{summary.pr_auc:.9f}\n")
        fh.write("threshold\ttpr\tfpr\tprecision\trecall\taccuracy\n")
        for p in summary.curve_points:
            fh.write(
                f"{p.threshold:.9g}\t{p.tpr:.6f}\t{p.fpr:.6f}\t"
                f"{p.precision:.6f}\t{p.recall:.6f}\t{p.accuracy:.6f}\n"
            )

