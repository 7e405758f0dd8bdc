"""Directory-of-images to index-file export pipeline."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DuplicateIdError, NoImagesError
from .registry import ImageEncoder, get_encoder
from .writer import write_index_file

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tiff"}


@dataclass(frozen=True)
class ExportJob:
    input_dir: Path
    encoder: str = "pixel-stats"
    batch_size: int = 16
    device: str = "cpu"
    output_path: Path = Path("references.idx")

    def __post_init__(self):
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "output_path", Path(self.output_path))
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ExportSummary:
    n_written: int
    n_skipped: int
    dim: int
    checksum: int
    skipped_paths: tuple[str, ...] = field(default=())


def _reference_id(path: Path, root: Path) -> str:
    """Relative path without the file extension, e.g. ``logos/acme``."""
    return path.relative_to(root).with_suffix("").as_posix()


def discover_images(input_dir: Path) -> list[Path]:
    """All image files under ``input_dir``, sorted for determinism."""
    return sorted(
        p
        for p in input_dir.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def _check_id_collisions(paths: list[Path], root: Path) -> None:
    # ids must stay unique even on case-insensitive filesystems, so the
    # collision check is done casefolded and before any encoding work
    seen: dict[str, Path] = {}
    for p in paths:
        key = _reference_id(p, root).casefold()
        if key in seen:
            raise DuplicateIdError(
                f"{p} collides with {seen[key]}: both map to reference id "
                f"{key!r}"
            )
        seen[key] = p


def run_export(job: ExportJob, encoder: ImageEncoder | None = None) -> ExportSummary:
    """Encode every readable image under ``job.input_dir`` and write the index.

    Unreadable files are skipped with a warning and counted in the summary;
    an input directory with no usable images is a hard error.  A sidecar
    ``<output>.manifest.json`` pins the encoder preprocessing so the export
    is reproducible.
    """
    if not job.input_dir.is_dir():
        raise NoImagesError(f"{job.input_dir} is not a directory")
    paths = discover_images(job.input_dir)
    if not paths:
        raise NoImagesError(f"no image files found under {job.input_dir}")
    _check_id_collisions(paths, job.input_dir)

    if encoder is None:
        encoder = get_encoder(job.encoder, job.device)

    ids: list[str] = []
    chunks: list[np.ndarray] = []
    batch_imgs: list[Image.Image] = []
    skipped: list[str] = []

    def flush() -> None:
        if batch_imgs:
            chunks.append(encoder.encode_batch(batch_imgs))
            for img in batch_imgs:
                img.close()
            batch_imgs.clear()

    for path in paths:
        try:
            img = Image.open(path)
            img.load()
        except (UnidentifiedImageError, OSError) as exc:
            log.warning("skipping unreadable image %s: %s", path, exc)
            skipped.append(str(path))
            continue
        ids.append(_reference_id(path, job.input_dir))
        batch_imgs.append(img)
        if len(batch_imgs) >= job.batch_size:
            flush()
    flush()

    if not ids:
        raise NoImagesError(
            f"all {len(paths)} image files under {job.input_dir} were unreadable"
        )

    rows = np.vstack(chunks)
    job.output_path.parent.mkdir(parents=True, exist_ok=True)
    checksum = write_index_file(job.output_path, ids, rows)
    manifest = {
        "format": "EDGSHLD1",
        "n": len(ids),
        "d": int(rows.shape[1]),
        "checksum": f"{checksum:#018x}",
        "skipped": skipped,
        **encoder.manifest(),
    }
    job.output_path.with_name(job.output_path.name + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n"
    )
    return ExportSummary(
        n_written=len(ids),
        n_skipped=len(skipped),
        dim=int(rows.shape[1]),
        checksum=checksum,
        skipped_paths=tuple(skipped),
    )
