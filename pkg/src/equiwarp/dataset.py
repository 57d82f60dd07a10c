"""Batch pipeline: perspective image/label pairs to projected tile datasets.

Sources are paired as ``X.png`` + ``X_labels.png``. Each pair is resized to
the tangent side length, projected at every requested elevation, cropped to
a square tile around the rendered region, and written under
``<out>/phi_<k>pi16/{images,labels}/`` (sweeps) or ``<out>/test/...``
(test sets), with a JSON-lines manifest describing every emitted sample.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .angles import phi_dirname
from .errors import DomainError
from .pngio import read_image, read_labels, write_image, write_labels
from .sphere import EquirectSpec, SphereCoord
from .warp import (
    LabelMap,
    ProjectionJob,
    RasterImage,
    crop_to_upper_tile,
    project_image,
    project_labels,
    resize_square,
)

DEFAULT_PHIS = tuple(k * math.pi / 16 for k in range(1, 9))

LABEL_SUFFIX = "_labels"

MANIFEST_NAME = "manifest.jsonl"

MANIFEST_FIELDS = ("source", "crop", "phi", "theta", "image", "labels", "coverage", "sha256")


@dataclass(frozen=True)
class SweepConfig:
    """Settings shared by every entry of a generation run.

    theta stays 0 by default: horizontal placement only moves the render
    along the seam-free azimuth axis and never changes shapes.
    """

    spec: EquirectSpec
    n: int
    phis: tuple = DEFAULT_PHIS
    theta: float = 0.0
    tile: int = 224
    mode: str = "inverse"
    interp: str = "bilinear"
    seed: int = 0
    mirror: bool = False

    def __post_init__(self):
        if not self.phis:
            raise DomainError("phis must be non-empty")
        object.__setattr__(self, "phis", tuple(float(p) for p in self.phis))
        for p in self.phis:
            if not 0.0 < p <= math.pi / 2.0:
                raise DomainError(f"phi must lie in (0, pi/2], got {p}")
        if not isinstance(self.n, int) or self.n < 2:
            raise DomainError(f"tangent side must be an integer >= 2, got {self.n}")
        if self.n % 2 == 0:
            warnings.warn(f"tangent side must be odd, bumping {self.n} to {self.n + 1}")
            object.__setattr__(self, "n", self.n + 1)
        if not isinstance(self.tile, int) or self.tile < 32:
            raise DomainError(f"tile must be an integer >= 32, got {self.tile}")
        if self.tile > min(self.spec.width, self.spec.height):
            raise DomainError("tile does not fit inside the canvas")
        if self.mode not in ("inverse", "scatter"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.interp not in ("nearest", "bilinear"):
            raise DomainError(f"unknown interpolation {self.interp!r}")


@dataclass(frozen=True)
class ManifestEntry:
    source: str
    crop: Optional[tuple]
    phi: float
    theta: float
    image: str
    labels: str
    coverage: float
    sha256: str

    def to_json(self) -> str:
        record = {
            "source": self.source,
            "crop": list(self.crop) if self.crop is not None else None,
            "phi": self.phi,
            "theta": self.theta,
            "image": self.image,
            "labels": self.labels,
            "coverage": self.coverage,
            "sha256": self.sha256,
        }
        return json.dumps(record)


def discover_pairs(input_dir) -> tuple:
    """Find ``X.png`` + ``X_labels.png`` pairs; returns (pairs, unpaired names).

    Pairs come back sorted by stem as (stem, image path, labels path).
    """
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise OSError(f"input directory not found: {input_dir}")
    images, labels = {}, {}
    for path in input_dir.glob("*.png"):
        if path.stem.endswith(LABEL_SUFFIX):
            labels[path.stem[: -len(LABEL_SUFFIX)]] = path
        else:
            images[path.stem] = path
    pairs = [(stem, images[stem], labels[stem]) for stem in sorted(images.keys() & labels.keys())]
    unpaired = sorted(images.keys() ^ labels.keys())
    return pairs, unpaired


def load_class_map(path) -> dict:
    """Read a {source_id: target_id} JSON object."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"class map is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DomainError("class map must be a JSON object")
    table = {}
    for key, value in raw.items():
        try:
            src, dst = int(key), int(value)
        except (TypeError, ValueError):
            raise DomainError(f"class map entries must be integers, got {key!r}: {value!r}")
        if not (0 <= src <= 255 and 0 <= dst <= 255):
            raise DomainError(f"class ids must fit in a byte, got {src}: {dst}")
        table[src] = dst
    return table


def load_crops(path) -> dict:
    """Read a {stem: [[x, y, w, h], ...]} JSON object."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"crop list is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DomainError("crop list must be a JSON object")
    table = {}
    for stem, rects in raw.items():
        parsed = []
        for rect in rects:
            if len(rect) != 4:
                raise DomainError(f"crop for {stem!r} must have 4 values, got {rect!r}")
            parsed.append(tuple(int(v) for v in rect))
        table[str(stem)] = parsed
    return table


def _class_lut(class_map: Optional[dict]):
    if class_map is None:
        return None
    lut = np.full(256, 255, dtype=np.uint8)   # unmapped ids become ignore
    for src, dst in class_map.items():
        lut[src] = dst
    return lut


def _apply_crop(img: RasterImage, lab: LabelMap, rect):
    if rect is None:
        return img, lab
    x, y, w, h = rect
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise DomainError(f"crop {rect} exceeds source bounds {img.width}x{img.height}")
    return (
        RasterImage.from_array(img.samples[y : y + h, x : x + w]),
        LabelMap.from_array(lab.ids[y : y + h, x : x + w]),
    )


def _produce_tile(img: RasterImage, lab: LabelMap, phi: float, config: SweepConfig, threads: int):
    job = ProjectionJob(
        SphereCoord(config.theta, phi), config.spec, config.n,
        interp=config.interp, mode=config.mode,
    )
    canvas, mask = project_image(resize_square(img, config.n), job, threads=threads)
    lab_canvas, _ = project_labels(resize_square(lab, config.n), job, threads=threads)
    tile_img = crop_to_upper_tile(canvas, mask, config.tile)
    tile_lab = crop_to_upper_tile(lab_canvas, mask, config.tile)
    if config.mirror:
        tile_img = RasterImage.from_array(np.flipud(tile_img.samples))
        tile_lab = LabelMap.from_array(np.flipud(tile_lab.ids))
    coverage = float((tile_lab.ids != tile_lab.ignore_id).mean())
    return tile_img, tile_lab, coverage


def _load_pair(img_path, lab_path, lut):
    img = read_image(img_path)
    lab = read_labels(lab_path)
    if (img.width, img.height) != (lab.width, lab.height):
        raise DomainError(f"{img_path.name}: image and label sizes differ")
    if lut is not None:
        lab = LabelMap.from_array(lut[lab.ids])
    return img, lab


def _sha256_files(*paths) -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_manifest(entries, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(entry.to_json() + "\n")


def read_manifest(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def _emit(out_dir, rel_img, rel_lab, tile_img, tile_lab, source, crop, phi, config, coverage):
    write_image(tile_img, out_dir / rel_img)
    write_labels(tile_lab, out_dir / rel_lab)
    return ManifestEntry(
        source=source, crop=crop, phi=phi, theta=config.theta,
        image=rel_img, labels=rel_lab, coverage=coverage,
        sha256=_sha256_files(out_dir / rel_img, out_dir / rel_lab),
    )


def build_sweep(input_dir, out_dir, config: SweepConfig, class_map=None, threads: int = 1) -> list:
    """Project every pair at every configured elevation.

    Returns the manifest entries, ordered by (phi, stem); the same list is
    written to ``<out>/manifest.jsonl``. Unpaired files are skipped with a
    warning; an empty input directory is an error before any output exists.
    """
    pairs, unpaired = discover_pairs(input_dir)
    if unpaired:
        warnings.warn(f"skipping {len(unpaired)} unpaired files under {input_dir}")
    if not pairs:
        raise DomainError(f"no usable image/label pairs under {input_dir}")
    out_dir = Path(out_dir)
    lut = _class_lut(class_map)
    entries = []
    for phi in config.phis:
        sub = phi_dirname(phi)
        for stem, img_path, lab_path in pairs:
            img, lab = _load_pair(img_path, lab_path, lut)
            tile_img, tile_lab, coverage = _produce_tile(img, lab, phi, config, threads)
            entries.append(_emit(
                out_dir, f"{sub}/images/{stem}.png", f"{sub}/labels/{stem}.png",
                tile_img, tile_lab, str(img_path), None, phi, config, coverage,
            ))
    write_manifest(entries, out_dir / MANIFEST_NAME)
    return entries


def build_testset(input_dir, out_dir, config: SweepConfig, class_map=None,
                  crops: Optional[dict] = None, threads: int = 1) -> tuple:
    """Build the fully-distorted evaluation set at a single elevation.

    ``crops`` optionally maps source stems to pixel rectangles (x, y, w, h);
    a source with rectangles yields one entry per rectangle, named
    ``<stem>_crop<i>``. Returns (entries, failure messages); rectangle
    errors are per-entry and never abort the run.
    """
    if len(config.phis) != 1:
        raise DomainError("test-set construction uses exactly one phi")
    pairs, unpaired = discover_pairs(input_dir)
    if unpaired:
        warnings.warn(f"skipping {len(unpaired)} unpaired files under {input_dir}")
    if not pairs:
        raise DomainError(f"no usable image/label pairs under {input_dir}")
    out_dir = Path(out_dir)
    lut = _class_lut(class_map)
    phi = config.phis[0]
    entries, failures = [], []
    for stem, img_path, lab_path in pairs:
        img, lab = _load_pair(img_path, lab_path, lut)
        rects = None if crops is None else crops.get(stem)
        variants = [(None, stem)] if rects is None else [
            (rect, f"{stem}_crop{i}") for i, rect in enumerate(rects)
        ]
        for rect, name in variants:
            try:
                part_img, part_lab = _apply_crop(img, lab, rect)
                tile_img, tile_lab, coverage = _produce_tile(part_img, part_lab, phi, config, threads)
            except DomainError as exc:
                failures.append(f"{name}: {exc}")
                continue
            entries.append(_emit(
                out_dir, f"test/images/{name}.png", f"test/labels/{name}.png",
                tile_img, tile_lab, str(img_path), rect, phi, config, coverage,
            ))
    write_manifest(entries, out_dir / MANIFEST_NAME)
    return entries, failures
