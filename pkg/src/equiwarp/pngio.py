"""8-bit PNG ingest and egress for rasters, label maps, and masks.

Images round-trip through [0, 1] float samples; label maps are single
channel with the pixel value as the class id (palette PNGs are read as
their palette indices). Anything that is not 8 bits per channel is
rejected, since ids and intensities are defined on bytes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .warp import LabelMap, RasterImage, ValidMask

__all__ = [
    "read_image",
    "write_image",
    "read_labels",
    "write_labels",
    "read_mask",
    "write_mask",
]

_IMAGE_MODES = {"L": 1, "LA": 2, "RGB": 3, "RGBA": 4}


def _open(path) -> Image.Image:
    try:
        return Image.open(path)
    except UnidentifiedImageError as exc:
        raise OSError(f"{path}: not a decodable image") from exc


def read_image(path) -> RasterImage:
    """Decode an 8-bit PNG (grayscale, gray+alpha, RGB, or RGBA)."""
    with _open(path) as im:
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode not in _IMAGE_MODES:
            raise OSError(f"{path}: unsupported mode {im.mode!r}; need 8-bit L/LA/RGB/RGBA")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return RasterImage.from_array(arr.astype(np.float32) / 255.0)


def write_image(img: RasterImage, path) -> None:
    """Encode to 8-bit PNG; sample values are rounded to bytes."""
    arr = np.rint(np.clip(img.samples, 0.0, 1.0) * 255.0).astype(np.uint8)
    mode = {1: "L", 2: "LA", 3: "RGB", 4: "RGBA"}[img.channels]
    if img.channels == 1:
        arr = arr[:, :, 0]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def read_labels(path, ignore_id: int = 255) -> LabelMap:
    """Decode a single-channel 8-bit PNG of class ids.

    Palette images are read as raw palette indices; RGB label images are
    rejected because the id/color correspondence is not stored in the file.
    """
    with _open(path) as im:
        if im.mode == "P":
            arr = np.asarray(im, dtype=np.uint8)
        elif im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)
        else:
            raise OSError(f"{path}: label maps must be single-channel 8-bit, got mode {im.mode!r}")
    return LabelMap.from_array(arr, ignore_id=ignore_id)


def write_labels(labels: LabelMap, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(labels.ids, mode="L").save(path, format="PNG")


def read_mask(path) -> ValidMask:
    """Decode a mask PNG: any nonzero pixel counts as set."""
    with _open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    return ValidMask.from_array(arr > 0)


def write_mask(mask: ValidMask, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    arr = np.where(mask.bits, np.uint8(255), np.uint8(0))
    Image.fromarray(arr, mode="L").save(path, format="PNG")
