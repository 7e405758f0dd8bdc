"""Command-line surface: build-index, make-suite, run, eval, bench-scalability.

Exit codes: 0 ok, 2 user/input error, 3 data-integrity error, 4 internal
invariant failure.  Every run writes a manifest with the resolved seeds and
configuration; timestamps are isolated to one manifest field so reruns stay
byte-comparable otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .encoders import DecoderSpec, EncoderKind, EncoderSpec, encode
from .errors import FormatError, IntegrityError, RefShieldError
from .evaluation import (
    curve_summary,
    run_scalability,
    samples_from_records,
    write_scalability_table,
    write_summary,
)
from .filtering import (
    FilterConfig,
    FilterMode,
    build_suite_index,
    latent_hash,
    read_records,
    run_filtered,
    write_records,
)
from .index import Embedding, build_index, load_index, save_index, fnv1a64
from .sampler import OracleKind, load_suite, make_benchmark_suite, save_suite

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTEGRITY = 3
EXIT_INTERNAL = 4

OUT_DIR_ENV = "REFSHIELD_OUT_DIR"


def _out_path(path: str) -> Path:
    base = os.environ.get(OUT_DIR_ENV)
    p = Path(path)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write_manifest(out: Path, args: argparse.Namespace, extra: dict | None = None) -> None:
    manifest = {
        "command": args.command,
        "version": __version__,
        "config": {k: v for k, v in vars(args).items() if k not in ("command", "func")},
        "output_dir": str(out.parent),
        "timestamps": {"written_at": time.time()},
    }
    manifest.update(extra or {})
    out.with_suffix(out.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8"
    )


def _encoder_from_args(args: argparse.Namespace) -> EncoderSpec:
    return EncoderSpec(
        kind=EncoderKind(args.encoder),
        out_dim=args.encoder_dim,
        seed=args.encoder_seed,
    )


def _add_encoder_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--encoder", default="random_projection",
                   choices=[k.value for k in EncoderKind])
    p.add_argument("--encoder-dim", type=int, default=256)
    p.add_argument("--encoder-seed", type=int, default=0)


def cmd_build_index(args: argparse.Namespace) -> int:
    src = Path(args.embeddings)
    if not src.exists():
        print(f"error: {src} does not exist", file=sys.stderr)
        return EXIT_INPUT
    if src.is_dir():
        files = sorted(p for p in src.rglob("*") if p.is_file())
        if not files:
            print(f"error: {src} contains no vector files", file=sys.stderr)
            return EXIT_INPUT
        embeddings = []
        for f in files:
            try:
                vec = np.loadtxt(f, dtype=np.float64, ndmin=1)
            except ValueError as exc:
                print(f"error: {f}: not a vector file: {exc}", file=sys.stderr)
                return EXIT_INPUT
            embeddings.append(Embedding(id=str(f.relative_to(src)), vec=vec))
        index = build_index(embeddings)
    else:
        index = load_index(src)  # re-validate an existing index file
    out = _out_path(args.out)
    save_index(index, out)
    checksum = fnv1a64(out.read_bytes()[:-8])
    print(f"n={index.n} d={index.d} checksum={checksum:#018x}")
    _write_manifest(out, args)
    return EXIT_OK


def cmd_make_suite(args: argparse.Namespace) -> int:
    suite = make_benchmark_suite(
        args.corpus_size,
        args.matched_fraction,
        args.seed,
        latent_dim=args.latent_dim,
        steps=args.steps,
        oracle_kind=OracleKind(args.oracle),
        noise_scale=args.noise_scale,
        decay=args.decay,
    )
    out = _out_path(args.out)
    save_suite(suite, out)
    if args.corpus_embeddings_out:
        enc = _encoder_from_args(args)
        dest = _out_path(args.corpus_embeddings_out)
        dest.mkdir(parents=True, exist_ok=True)
        for id_, vec in zip(suite.corpus_ids, suite.corpus):
            emb = encode(vec, enc, id=id_)
            f = dest / (id_.replace("/", "_") + ".txt")
            np.savetxt(f, emb.vec, fmt="%.9e")
    print(f"scenarios={len(suite.scenarios)} matched={sum(s.label for s in suite.scenarios)}")
    _write_manifest(out, args)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    index = load_index(args.index)
    suite = load_suite(args.scenario_suite)
    check_steps = tuple(int(s) for s in args.check_steps.split(","))
    cfg = FilterConfig(
        gamma=args.gamma,
        check_steps=check_steps,
        mode=FilterMode(args.mode),
        per_step_cost_ms=args.per_step_cost_ms,
        score_cost_ms=args.score_cost_ms,
        use_x_pred=not args.no_x_pred,
    )
    enc = _encoder_from_args(args)
    dec = DecoderSpec()
    results = [run_filtered(s, index, enc, dec, cfg) for s in suite.scenarios]
    out = _out_path(args.out)
    write_records(results, out)
    rejected = sum(r.decision.verdict.value == "reject" for r in results)
    print(f"runs={len(results)} rejected={rejected}")
    _write_manifest(out, args, {
        "final_hashes": {r.scenario_id: latent_hash(r.final_latent) for r in results},
    })
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    records = read_records(args.records)
    summary = curve_summary(samples_from_records(records))
    out = _out_path(args.out)
    write_summary(summary, out)
    print(f"roc_auc={summary.roc_auc:.6f} pr_auc={summary.pr_auc:.6f}")
    _write_manifest(out, args)
    return EXIT_OK


def _parse_sizes(text: str) -> list[int]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise FormatError(f"bad sizes spec {text!r}, expected start:stop:step")
        start, stop, step = (int(p) for p in parts)
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",")]


def cmd_bench_scalability(args: argparse.Namespace) -> int:
    sizes = _parse_sizes(args.sizes)
    records = run_scalability(sizes, calls=args.calls, naive_calls=args.naive_calls,
                              seed=args.seed)
    out = _out_path(args.out)
    write_scalability_table(records, out)
    for r in records:
        print(f"n={r.n_refs} roc_auc={r.roc_auc:.4f} "
              f"score_ms={r.median_score_latency_ms:.4f} "
              f"naive_ms={r.naive_median_score_latency_ms:.4f}")
    _write_manifest(out, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refshield")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="build or re-validate an index file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("make-suite", help="generate a labeled scenario suite")
    p.add_argument("--corpus-size", type=int, required=True)
    p.add_argument("--matched-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latent-dim", type=int, default=256)
    p.add_argument("--steps", type=int, default=9)
    p.add_argument("--oracle", default="exact", choices=[k.value for k in OracleKind])
    p.add_argument("--noise-scale", type=float, default=0.0)
    p.add_argument("--decay", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus-embeddings-out", default=None,
                   help="also write encoded corpus vectors for build-index")
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_make_suite)

    p = sub.add_parser("run", help="run the filter over a suite")
    p.add_argument("--index", required=True)
    p.add_argument("--scenario-suite", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--check-steps", default="1")
    p.add_argument("--mode", default="early_stop", choices=[m.value for m in FilterMode])
    p.add_argument("--per-step-cost-ms", type=float, default=None)
    p.add_argument("--score-cost-ms", type=float, default=0.0)
    p.add_argument("--no-x-pred", action="store_true")
    p.add_argument("--out", required=True)
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="summarize run records into metric curves")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-scalability", help="reference-count latency sweep")
    p.add_argument("--sizes", default="10:140:10")
    p.add_argument("--calls", type=int, default=1000)
    p.add_argument("--naive-calls", type=int, default=50)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_scalability)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RefShieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
