"""Command line entry point mirroring the ExportJob fields."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ExportError
from .export import ExportJob, run_export
from .registry import ENCODER_REGISTRY

EXIT_OK = 0
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refshield-export",
        description="Export a directory of reference images to a refshield "
        "index file.",
    )
    parser.add_argument("--input-dir", required=True, help="directory of images")
    parser.add_argument(
        "--encoder",
        default="pixel-stats",
        choices=sorted(ENCODER_REGISTRY),
        help="registered image encoder",
    )
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu", help="device hint, e.g. cpu")
    parser.add_argument("--out", required=True, help="output index file path")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    job = ExportJob(
        input_dir=args.input_dir,
        encoder=args.encoder,
        batch_size=args.batch_size,
        device=args.device,
        output_path=args.out,
    )
    try:
        summary = run_export(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(
        f"wrote {job.output_path}: n={summary.n_written} d={summary.dim} "
        f"skipped={summary.n_skipped} checksum={summary.checksum:#018x}"
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
