"""Image encoder registry.

Two families live here.  ``pixel-stats`` is a dependency-light deterministic
encoder (Pillow plus numpy only) used for hermetic round-trip testing and for
environments without model weights.  The pretrained entries wrap Hugging Face
checkpoints; they load lazily and raise :class:`EncoderUnavailableError` when
weights cannot be fetched, so offline use of ``pixel-stats`` still works.

Checkpoint revisions are pinned as best-effort matches; the upstream sources
only name the repositories, not the exact revisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from PIL import Image

from .errors import EncoderUnavailableError


class ImageEncoder(Protocol):
    name: str
    dim: int

    def encode_batch(self, images: list[Image.Image]) -> np.ndarray: ...

    def manifest(self) -> dict: ...


_PIXEL_SIDE = 16


@dataclass(frozen=True)
class PixelStatsEncoder:
    """Flattened low-resolution RGB features with a constant bias channel.

    Fully deterministic and weight-free: resize to a 16x16 RGB thumbnail,
    scale pixels to [-0.5, 0.5], flatten, and append 1.0 so the feature
    vector can never be all-zero (an all-black image still normalizes).
    """

    name: str = "pixel-stats"
    dim: int = _PIXEL_SIDE * _PIXEL_SIDE * 3 + 1

    def encode_batch(self, images: list[Image.Image]) -> np.ndarray:
        out = np.empty((len(images), self.dim), dtype=np.float64)
        for i, img in enumerate(images):
            thumb = img.convert("RGB").resize(
                (_PIXEL_SIDE, _PIXEL_SIDE), Image.Resampling.BILINEAR
            )
            pixels = np.asarray(thumb, dtype=np.float64).reshape(-1) / 255.0 - 0.5
            out[i, :-1] = pixels
            out[i, -1] = 1.0
        return out

    def manifest(self) -> dict:
        return {
            "encoder": self.name,
            "dim": self.dim,
            "preprocess": {
                "mode": "RGB",
                "resize": [_PIXEL_SIDE, _PIXEL_SIDE],
                "resample": "bilinear",
                "scale": "x/255 - 0.5",
                "bias_channel": 1.0,
            },
        }


@dataclass
class PretrainedEncoder:
    """Lazy wrapper over a Hugging Face vision checkpoint.

    Uses ``get_image_features`` when the model exposes it (CLIP and SigLIP
    families) and mean-pooled hidden states otherwise.
    """

    name: str
    model_id: str
    revision: str
    device: str = "cpu"
    dim: int = 0  # known after the first load
    _model: object = field(default=None, repr=False)
    _processor: object = field(default=None, repr=False)

    def _load(self) -> None:
        if self._model is not None:
            return
        try:
            import torch  # noqa: F401
            from transformers import AutoImageProcessor, AutoModel

            self._processor = AutoImageProcessor.from_pretrained(
                self.model_id, revision=self.revision
            )
            self._model = AutoModel.from_pretrained(
                self.model_id, revision=self.revision
            ).to(self.device).eval()
        except Exception as exc:  # import, download, or load failure
            raise EncoderUnavailableError(
                f"encoder {self.name!r} ({self.model_id}) unavailable: {exc}"
            ) from exc

    def encode_batch(self, images: list[Image.Image]) -> np.ndarray:
        self._load()
        import torch

        inputs = self._processor(
            images=[img.convert("RGB") for img in images], return_tensors="pt"
        ).to(self.device)
        with torch.no_grad():
            if hasattr(self._model, "get_image_features"):
                feats = self._model.get_image_features(**inputs)
            else:
                feats = self._model(**inputs).last_hidden_state.mean(dim=1)
        arr = feats.cpu().numpy().astype(np.float64)
        self.dim = arr.shape[1]
        return arr

    def manifest(self) -> dict:
        return {
            "encoder": self.name,
            "model_id": self.model_id,
            "revision": self.revision,
            "preprocess": "model image processor defaults",
        }


ENCODER_REGISTRY: dict[str, Callable[[str], ImageEncoder]] = {
    "pixel-stats": lambda device: PixelStatsEncoder(),
    "clip": lambda device: PretrainedEncoder(
        "clip", "openai/clip-vit-base-patch32", "main", device
    ),
    "siglip": lambda device: PretrainedEncoder(
        "siglip", "google/siglip-base-patch16-224", "main", device
    ),
    "siglip2": lambda device: PretrainedEncoder(
        "siglip2", "google/siglip2-base-patch16-224", "main", device
    ),
    "qwen3-vl-embedding": lambda device: PretrainedEncoder(
        "qwen3-vl-embedding", "Qwen/Qwen3-VL-Embedding-2B", "main", device
    ),
}


def get_encoder(name: str, device: str = "cpu") -> ImageEncoder:
    try:
        factory = ENCODER_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(ENCODER_REGISTRY))
        raise EncoderUnavailableError(
            f"unknown encoder {name!r}; registered: {known}"
        ) from None
    return factory(device)
