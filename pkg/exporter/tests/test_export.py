import json
import logging

import numpy as np
import pytest
from PIL import Image

from refshield.errors import ChecksumMismatchError
from refshield.encoders import Embedding
from refshield.index import load_index, score
from refshield_export.cli import EXIT_INPUT, EXIT_OK, main
from refshield_export.errors import (
    DuplicateIdError,
    EncoderUnavailableError,
    NoImagesError,
)
from refshield_export.export import ExportJob, discover_images, run_export
from refshield_export.registry import PixelStatsEncoder, get_encoder
from refshield_export.writer import fnv1a64, write_index_file


def make_image(seed: int, size=(40, 30)) -> Image.Image:
    rng = np.random.default_rng(seed)
    return Image.fromarray(rng.integers(0, 256, (*size[::-1], 3), dtype=np.uint8))


@pytest.fixture()
def image_dir(tmp_path):
    root = tmp_path / "refs"
    for cat, count in (("logos", 4), ("faces", 4), ("misc", 4)):
        (root / cat).mkdir(parents=True)
        for i in range(count):
            make_image(hash((cat, i)) % 2**32).save(root / cat / f"img_{i}.png")
    return root


class TestDiscovery:
    def test_sorted_and_filtered(self, image_dir):
        (image_dir / "notes.txt").write_text("not an image")
        paths = discover_images(image_dir)
        assert len(paths) == 12
        assert paths == sorted(paths)

    def test_ids_follow_category_item_convention(self, image_dir, tmp_path):
        out = tmp_path / "refs.idx"
        run_export(ExportJob(input_dir=image_dir, output_path=out))
        index = load_index(out)
        assert "logos/img_0" in index.ids
        assert all("/" in id_ for id_ in index.ids)


class TestExport:
    def test_header_counts_match_inputs(self, image_dir, tmp_path):
        out = tmp_path / "refs.idx"
        summary = run_export(ExportJob(input_dir=image_dir, output_path=out))
        enc = PixelStatsEncoder()
        assert summary.n_written == 12
        assert summary.dim == enc.dim
        index = load_index(out)
        assert (index.n, index.d) == (12, enc.dim)

    def test_deterministic_byte_identical(self, image_dir, tmp_path):
        a, b = tmp_path / "a.idx", tmp_path / "b.idx"
        run_export(ExportJob(input_dir=image_dir, output_path=a))
        run_export(ExportJob(input_dir=image_dir, output_path=b))
        assert a.read_bytes() == b.read_bytes()

    def test_batch_size_does_not_change_output(self, image_dir, tmp_path):
        a, b = tmp_path / "a.idx", tmp_path / "b.idx"
        run_export(ExportJob(input_dir=image_dir, output_path=a, batch_size=1))
        run_export(ExportJob(input_dir=image_dir, output_path=b, batch_size=64))
        assert a.read_bytes() == b.read_bytes()

    def test_case_collision_errors_before_writing(self, image_dir, tmp_path):
        make_image(1).save(image_dir / "logos" / "IMG_0.png")
        out = tmp_path / "refs.idx"
        with pytest.raises(DuplicateIdError):
            run_export(ExportJob(input_dir=image_dir, output_path=out))
        assert not out.exists()

    def test_unreadable_image_skipped_with_warning(self, image_dir, tmp_path, caplog):
        (image_dir / "misc" / "broken.png").write_bytes(b"this is not a png")
        out = tmp_path / "refs.idx"
        with caplog.at_level(logging.WARNING):
            summary = run_export(ExportJob(input_dir=image_dir, output_path=out))
        assert summary.n_skipped == 1
        assert summary.n_written == 12
        assert any("broken.png" in r.message for r in caplog.records)
        assert "misc/broken" not in load_index(out).ids

    def test_empty_directory_is_hard_error(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(NoImagesError):
            run_export(ExportJob(input_dir=empty, output_path=tmp_path / "o.idx"))

    def test_all_unreadable_is_hard_error(self, tmp_path):
        root = tmp_path / "bad"
        root.mkdir()
        (root / "a.png").write_bytes(b"nope")
        with pytest.raises(NoImagesError):
            run_export(ExportJob(input_dir=root, output_path=tmp_path / "o.idx"))

    def test_manifest_sidecar_pins_preprocessing(self, image_dir, tmp_path):
        out = tmp_path / "refs.idx"
        summary = run_export(ExportJob(input_dir=image_dir, output_path=out))
        manifest = json.loads((tmp_path / "refs.idx.manifest.json").read_text())
        assert manifest["encoder"] == "pixel-stats"
        assert manifest["n"] == summary.n_written
        assert "resize" in manifest["preprocess"]
        assert int(manifest["checksum"], 16) == summary.checksum


class TestWriter:
    def test_checksum_matches_runtime_hash(self, tmp_path):
        rng = np.random.default_rng(0)
        path = tmp_path / "w.idx"
        checksum = write_index_file(path, ["a/b", "c/d"], rng.standard_normal((2, 8)))
        data = path.read_bytes()
        assert fnv1a64(data[:-8]) == checksum
        # the runtime side recomputes the same hash on load
        load_index(path)

    def test_tampered_file_rejected_by_runtime(self, tmp_path):
        rng = np.random.default_rng(1)
        path = tmp_path / "w.idx"
        write_index_file(path, ["x/y"], rng.standard_normal((1, 8)))
        data = bytearray(path.read_bytes())
        data[-12] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(ChecksumMismatchError):
            load_index(path)


class TestRegistry:
    def test_unknown_encoder(self):
        with pytest.raises(EncoderUnavailableError):
            get_encoder("resnet-9000")

    def test_pixel_stats_black_image_still_normalizes(self, tmp_path):
        root = tmp_path / "refs"
        root.mkdir()
        Image.new("RGB", (32, 32), (0, 0, 0)).save(root / "black.png")
        run_export(ExportJob(input_dir=root, output_path=tmp_path / "o.idx"))
        index = load_index(tmp_path / "o.idx")
        assert index.n == 1

    @pytest.mark.parametrize("name", ["clip", "siglip", "siglip2", "qwen3-vl-embedding"])
    def test_pretrained_encoders_when_weights_available(self, name, tmp_path):
        enc = get_encoder(name)
        try:
            vecs = enc.encode_batch([make_image(7)])
        except EncoderUnavailableError as exc:
            pytest.skip(f"weights not available offline: {exc}")
        assert vecs.shape[0] == 1 and vecs.shape[1] >= 256


class TestCli:
    def test_export_and_validate(self, image_dir, tmp_path, capsys):
        out = tmp_path / "cli.idx"
        code = main(["--input-dir", str(image_dir), "--out", str(out)])
        assert code == EXIT_OK
        assert "n=12" in capsys.readouterr().out
        load_index(out)

    def test_empty_dir_exit_code(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(["--input-dir", str(empty), "--out", str(tmp_path / "o.idx")])
        assert code == EXIT_INPUT
        assert "error:" in capsys.readouterr().err


def test_acceptance_cross_component_roundtrip(image_dir, tmp_path):
    """Exported index loads in the runtime package and self-scores ~1."""
    out = tmp_path / "accept.idx"
    summary = run_export(ExportJob(input_dir=image_dir, output_path=out))
    assert summary.n_written >= 10

    index = load_index(out)  # checksum and norm validation happen here
    norms = np.linalg.norm(index.rows.astype(np.float64), axis=1)
    worst_norm = float(np.max(np.abs(norms - 1.0)))

    worst_p = 1.0
    ids_ok = True
    for i, id_ in enumerate(index.ids):
        report = score(index, Embedding(id=id_, vec=index.rows[i]))
        worst_p = min(worst_p, report.p_max)
        ids_ok &= report.argmax_id == id_

    ok = worst_norm <= 1e-5 and worst_p >= 0.999 and ids_ok
    status = "PASS" if ok else "FAIL"
    print(
        f"[{status}] exporter round-trip (>=10 images load, norms 1+-1e-5, "
        f"self-score p_max >= 0.999)  "
        f"(n={index.n} worst_norm={worst_norm:.2e} worst_p={worst_p:.6f})"
    )
    assert ok
