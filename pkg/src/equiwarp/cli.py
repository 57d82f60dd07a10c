"""Command-line front end: project, extract, sweep, eval, and grid.

Exit codes: 0 success, 2 usage (bad flags, unparsable or out-of-range
angles), 3 I/O failure, 4 geometry or domain error. Defaults can come from
a TOML file via --config; flags always win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import warnings
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    import tomli as tomllib

from .angles import AngleParseError, parse_angle, phi_dirname
from .dataset import (
    DEFAULT_PHIS,
    MANIFEST_NAME,
    SweepConfig,
    build_sweep,
    build_testset,
    load_class_map,
    load_crops,
)
from .errors import DomainError, InternalConsistencyError
from .evalseg import (
    DEFAULT_CLASSES,
    ConfusionMatrix,
    accumulate,
    emit_table,
    iou,
    report_json,
)
from .pngio import read_image, read_labels, read_mask, write_image, write_labels, write_mask
from .sphere import EquirectSpec, PixelCoord, SphereCoord, distorted_kernel_grid
from .warp import ProjectionJob, RasterImage, extract_tangent_image, project_image, project_labels, resize_square

ACCENT = np.array([1.0, 64 / 255, 192 / 255], dtype=np.float32)

_PHI_DIR = re.compile(r"^phi_(\d+)pi16$")


class UsageError(Exception):
    """Bad flag or config values; maps to exit code 2."""


@dataclass
class CliConfig:
    width: int = 1024
    height: int = 512
    size_n: int = 129
    tile: int = 224
    interp: str = "bilinear"
    mode: str = "inverse"
    theta: float = 0.0
    phis: tuple = DEFAULT_PHIS
    class_map: Optional[str] = None
    out: Optional[str] = None
    threads: int = 0          # 0 = one worker per cpu
    seed: int = 0

    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


_INT_KEYS = ("width", "height", "size_n", "tile", "threads", "seed")
_STR_KEYS = ("interp", "mode", "class_map", "out")


def _config_from_toml(path) -> dict:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"config file {path}: {exc}")
    known = {f.name for f in fields(CliConfig)}
    values = {}
    for key, value in data.items():
        if key not in known:
            raise UsageError(f"config file {path}: unknown key {key!r}")
        if key in _INT_KEYS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise UsageError(f"config key {key!r} must be an integer")
        elif key in _STR_KEYS:
            if not isinstance(value, str):
                raise UsageError(f"config key {key!r} must be a string")
        elif key == "theta":
            value = parse_angle(value) if isinstance(value, str) else float(value)
        elif key == "phis":
            if not isinstance(value, list) or not value:
                raise UsageError("config key 'phis' must be a non-empty list")
            value = tuple(
                parse_angle(v) if isinstance(v, str) else float(v) for v in value
            )
        values[key] = value
    return values


def effective_config(args) -> CliConfig:
    """Defaults, then config-file values, then any flags that were given."""
    cfg = CliConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **_config_from_toml(args.config))
    overrides = {}
    for field in fields(CliConfig):
        if field.name in ("theta", "phis"):
            continue                             # flags carry angle text
        flag = getattr(args, field.name, None)
        if flag is not None:
            overrides[field.name] = flag
    if getattr(args, "theta", None) is not None:
        overrides["theta"] = parse_angle(args.theta)
    if getattr(args, "phis", None) is not None:
        overrides["phis"] = _parse_phi_list(args.phis)
    if overrides:
        cfg = replace(cfg, **overrides)
    if getattr(args, "show_config", False):
        for field in fields(CliConfig):
            print(f"{field.name} = {getattr(cfg, field.name)!r}")
    return cfg


def _parse_phi_list(text: str) -> tuple:
    if text.strip() == "default":
        return DEFAULT_PHIS
    values = tuple(parse_angle(part) for part in text.split(","))
    if not values:
        raise UsageError("empty phi list")
    return values


def _check_sweep_phi(phi: float) -> float:
    if not 0.0 < phi <= math.pi / 2.0:
        raise UsageError(f"phi must lie in (0, pi/2], got {phi:.6g}")
    return phi


def _check_tangent_phi(phi: float) -> float:
    if not -math.pi / 2.0 <= phi <= math.pi / 2.0:
        raise UsageError(f"phi must lie in [-pi/2, pi/2], got {phi:.6g}")
    return phi


def _to_rgb(img: RasterImage) -> np.ndarray:
    s = img.samples
    if img.channels == 1:
        return np.repeat(s, 3, axis=2)
    if img.channels == 2:
        return np.repeat(s[:, :, :1], 3, axis=2)
    return s[:, :, :3]


def _mask_boundary(bits: np.ndarray) -> np.ndarray:
    """Set pixels with at least one unset 4-neighbour (columns wrap)."""
    up = np.vstack([bits[:1], bits[:-1]])
    down = np.vstack([bits[1:], bits[-1:]])
    left = np.roll(bits, 1, axis=1)
    right = np.roll(bits, -1, axis=1)
    return bits & ~(up & down & left & right)


def _preview(source: RasterImage, canvas: RasterImage, mask) -> RasterImage:
    """Source and render side by side, mask outline in the accent colour."""
    h = canvas.height
    left = _to_rgb(resize_square(source, h))
    right = _to_rgb(canvas).copy()
    right[_mask_boundary(mask.bits)] = ACCENT
    return RasterImage.from_array(np.concatenate([left, right], axis=1))


def cmd_project(args, cfg: CliConfig) -> int:
    phi = _check_tangent_phi(parse_angle(args.phi))
    theta = cfg.theta
    spec = EquirectSpec(cfg.width, cfg.height)
    job = ProjectionJob(SphereCoord(theta, phi), spec, cfg.size_n,
                        interp=cfg.interp, mode=cfg.mode)
    if cfg.out is None:
        raise UsageError("--out is required")
    out = Path(cfg.out)
    threads = cfg.worker_count()

    source = read_image(args.input)
    canvas, mask = project_image(resize_square(source, job.n), job, threads=threads)
    write_image(canvas, out / "equirect.png")
    write_mask(mask, out / "mask.png")
    if args.labels:
        labels = resize_square(read_labels(args.labels), job.n)
        lab_canvas, _ = project_labels(labels, job, threads=threads)
        write_labels(lab_canvas, out / "labels.png")
    write_image(_preview(source, canvas, mask), out / "preview.png")
    print(f"wrote equirect/mask/preview under {out} ({int(mask.bits.sum())} mask pixels)")
    return 0


def cmd_extract(args, cfg: CliConfig) -> int:
    phi = _check_tangent_phi(parse_angle(args.phi))
    n = cfg.size_n
    if n % 2 == 0:
        warnings.warn(f"tangent side must be odd, bumping {n} to {n + 1}")
        n += 1
    if cfg.out is None:
        raise UsageError("--out is required")
    out = Path(cfg.out)
    equi = read_image(args.input)
    view = extract_tangent_image(equi, SphereCoord(cfg.theta, phi), n, interp=cfg.interp)
    write_image(view, out / "tangent.png")
    print(f"wrote {out / 'tangent.png'} ({n}x{n})")
    return 0


def cmd_sweep(args, cfg: CliConfig) -> int:
    if cfg.out is None:
        raise UsageError("--out is required")
    if args.testset:
        phis = cfg.phis if args.phis is not None else (math.pi / 2,)
    else:
        phis = cfg.phis
    for phi in phis:
        _check_sweep_phi(phi)
    sweep_cfg = SweepConfig(
        spec=EquirectSpec(cfg.width, cfg.height), n=cfg.size_n, phis=tuple(phis),
        theta=cfg.theta, tile=cfg.tile, mode=cfg.mode, interp=cfg.interp,
        seed=cfg.seed, mirror=args.mirror,
    )
    class_map = load_class_map(cfg.class_map) if cfg.class_map else None
    threads = cfg.worker_count()

    if args.testset:
        crops = load_crops(args.crops) if args.crops else None
        entries, failures = build_testset(args.input_dir, cfg.out, sweep_cfg,
                                          class_map=class_map, crops=crops, threads=threads)
        print(f"test: {len(entries)} entries")
        if failures:
            for message in failures:
                print(f"failed {message}", file=sys.stderr)
            print(f"{len(failures)} entries failed", file=sys.stderr)
            return 4
    else:
        entries = build_sweep(args.input_dir, cfg.out, sweep_cfg,
                              class_map=class_map, threads=threads)
        counts = {}
        for entry in entries:
            name = phi_dirname(entry.phi)
            counts[name] = counts.get(name, 0) + 1
        for name in sorted(counts, key=lambda s: (len(s), s)):
            print(f"{name}: {counts[name]} entries")
    print(f"manifest: {Path(cfg.out) / MANIFEST_NAME}")
    return 0


def _label_files(folder: Path) -> dict:
    """PNG label files by stem; a sweep output's labels/ subdir is used."""
    if (folder / "labels").is_dir():
        folder = folder / "labels"
    return {p.stem: p for p in sorted(folder.glob("*.png"))}


def _eval_folder(pred_dir: Path, gt_dir: Path, mask_dir, classes) -> Optional[ConfusionMatrix]:
    preds = _label_files(pred_dir)
    gts = _label_files(gt_dir)
    stems = sorted(preds.keys() & gts.keys())
    for stray in sorted(preds.keys() ^ gts.keys()):
        print(f"unpaired: {stray}", file=sys.stderr)
    if not stems:
        return None
    cm = ConfusionMatrix.zeros(classes)
    for stem in stems:
        mask = read_mask(Path(mask_dir) / f"{stem}.png") if mask_dir else None
        cm = accumulate(read_labels(preds[stem]), read_labels(gts[stem]), mask, cm)
    return cm


def cmd_eval(args, cfg: CliConfig) -> int:
    classes = DEFAULT_CLASSES
    if args.classes:
        with open(args.classes, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, list) or not all(isinstance(c, str) for c in loaded):
            raise UsageError("--classes file must hold a JSON array of names")
        classes = tuple(loaded)

    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    subdirs = sorted(p.name for p in pred_dir.iterdir()
                     if p.is_dir() and _PHI_DIR.match(p.name))
    reports = {}
    if subdirs:
        for name in subdirs:
            k = int(_PHI_DIR.match(name).group(1))
            cm = _eval_folder(pred_dir / name, gt_dir / name, args.mask_dir, classes)
            if cm is not None:
                reports[k * math.pi / 16.0] = iou(cm)
    else:
        cm = _eval_folder(pred_dir, gt_dir, args.mask_dir, classes)
        if cm is not None:
            reports["all"] = iou(cm)
    if not reports:
        raise DomainError("no prediction/ground-truth pairs found")

    if args.format == "json":
        text = report_json(reports)
    else:
        text = emit_table(reports, args.format)
    if cfg.out:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        print(f"wrote {out}")
    else:
        print(text, end="")
    return 0


def cmd_grid(args, cfg: CliConfig) -> int:
    spec = EquirectSpec(cfg.width, cfg.height)
    center = PixelCoord(args.x, args.y)
    points = distorted_kernel_grid(spec, args.k, center)
    wrapped = [abs(p.x - center.x) > spec.width / 2.0 for p in points]
    payload = {
        "center": [center.x, center.y],
        "k": args.k,
        "positions": [[p.x, p.y] for p in points],
        "wrapped": wrapped,
    }
    print(json.dumps(payload, indent=2))
    if cfg.out:
        overlay = np.zeros((spec.height, spec.width, 3), dtype=np.float32)
        for p, wrap in zip(points, wrapped):
            col = int(math.floor(p.x)) % spec.width
            row = min(max(int(math.floor(p.y)), 0), spec.height - 1)
            overlay[row, col] = ACCENT if not wrap else (0.25, 1.0, 0.25)
        overlay[min(max(int(center.y), 0), spec.height - 1), int(center.x) % spec.width] = 1.0
        write_image(RasterImage.from_array(overlay), Path(cfg.out) / "grid.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equiwarp",
        description="Tangent-plane to equirectangular projection toolkit",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with default settings")
    common.add_argument("--show-config", action="store_true", help="echo the effective settings")
    common.add_argument("--threads", type=int, help="worker threads (0 = one per cpu)")
    common.add_argument("--out", help="output directory (or file for eval)")

    geom = argparse.ArgumentParser(add_help=False)
    geom.add_argument("--width", type=int, help="canvas width in pixels")
    geom.add_argument("--height", type=int, help="canvas height in pixels")
    geom.add_argument("--size-n", dest="size_n", type=int, help="tangent image side length")
    geom.add_argument("--interp", choices=["nearest", "bilinear"])
    geom.add_argument("--theta", help="tangent azimuth, e.g. 'pi/4' or 0.2")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", parents=[common, geom],
                       help="render a perspective image onto the spherical canvas")
    p.add_argument("--input", required=True, help="perspective PNG")
    p.add_argument("--labels", help="matching label PNG")
    p.add_argument("--phi", required=True, help="tangent elevation, e.g. '6*pi/16'")
    p.add_argument("--mode", choices=["inverse", "scatter"])
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("extract", parents=[common, geom],
                       help="cut a tangent-plane view out of an equirectangular image")
    p.add_argument("--input", required=True, help="equirectangular PNG")
    p.add_argument("--phi", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sweep", parents=[common, geom],
                       help="generate the elevation-sweep dataset from paired sources")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--phis", help="comma-separated angles or 'default'")
    p.add_argument("--tile", type=int, help="output tile side (default 224)")
    p.add_argument("--class-map", dest="class_map", help="JSON {source_id: target_id}")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["inverse", "scatter"])
    p.add_argument("--mirror", action="store_true", help="flip tiles vertically")
    p.add_argument("--testset", action="store_true",
                   help="build the single-elevation test set (default phi pi/2)")
    p.add_argument("--crops", help="JSON {stem: [[x, y, w, h], ...]} for test-set crops")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", parents=[common],
                       help="score predicted label maps against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--classes", help="JSON array of class names")
    p.add_argument("--mask-dir", help="directory of valid-mask PNGs by stem")
    p.add_argument("--format", choices=["csv", "markdown", "json"], default="markdown")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", parents=[common],
                       help="print the distortion-adapted sampling grid at a pixel")
    p.add_argument("--width", type=int, help="canvas width in pixels")
    p.add_argument("--height", type=int, help="canvas height in pixels")
    p.add_argument("--k", type=int, required=True, help="kernel side (odd)")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = effective_config(args)
        return args.func(args, cfg)
    except (AngleParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (DomainError, InternalConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
