"""Dense resampling between perspective (tangent-plane) and equirectangular rasters.

The source perspective image is treated as an n x n grid of samples on the
tangent plane (n odd, the middle sample at the tangency point). Rendering
into an equirectangular canvas runs in one of two modes:

- ``inverse`` (default): every output pixel is mapped onto the plane and,
  when it falls inside the grid square, pulls an interpolated source sample.
  Dense, no holes, and the azimuth seam and poles need no special cases.
- ``scatter``: every source grid point is pushed through the projection and
  deposited into the containing output pixel. Stretched regions leave holes;
  the mode exists to mirror the push-style construction directly.

Threaded execution partitions output rows; each row is computed by the same
per-row vector expressions regardless of the partition, so results are
byte-identical for any thread count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError
from .sphere import EquirectSpec, SphereCoord, inverse_gnomonic_arrays

__all__ = [
    "RasterImage",
    "LabelMap",
    "ValidMask",
    "ProjectionJob",
    "project_image",
    "project_labels",
    "extract_tangent_image",
    "resize_square",
    "crop_to_upper_tile",
    "mask_bbox",
]

_TWO_PI = 2.0 * math.pi


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Continuous-valued raster; samples shaped (height, width, channels) in [0, 1]."""

    width: int
    height: int
    channels: int
    samples: np.ndarray

    def __post_init__(self):
        s = self.samples
        if s.shape != (self.height, self.width, self.channels):
            raise DomainError(f"samples shape {s.shape} does not match declared size")
        if not 1 <= self.channels <= 4:
            raise DomainError(f"channels must be 1..4, got {self.channels}")
        if s.dtype != np.float32:
            raise DomainError("samples must be float32")
        if not np.all(np.isfinite(s)) or s.min(initial=0.0) < 0.0 or s.max(initial=0.0) > 1.0:
            raise DomainError("samples must be finite and within [0, 1]")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        a = np.asarray(arr, dtype=np.float32)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise DomainError(f"expected a 2-D or 3-D array, got shape {arr.shape}")
        h, w, c = a.shape
        return cls(width=w, height=h, channels=c, samples=_freeze(np.ascontiguousarray(a)))


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Categorical raster of small integer class ids; ignore_id marks unlabeled pixels."""

    width: int
    height: int
    ids: np.ndarray
    ignore_id: int = 255

    def __post_init__(self):
        if self.ids.shape != (self.height, self.width):
            raise DomainError(f"ids shape {self.ids.shape} does not match declared size")
        if self.ids.dtype != np.uint8:
            raise DomainError("ids must be uint8")
        if not 0 <= self.ignore_id <= 255:
            raise DomainError(f"ignore_id must fit in a byte, got {self.ignore_id}")

    @classmethod
    def from_array(cls, arr: np.ndarray, ignore_id: int = 255) -> "LabelMap":
        a = np.asarray(arr)
        if a.ndim != 2:
            raise DomainError(f"expected a 2-D array, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.integer):
            raise DomainError("label ids must be integers")
        if a.min(initial=0) < 0 or a.max(initial=0) > 255:
            raise DomainError("label ids must lie in [0, 255]")
        h, w = a.shape
        return cls(width=w, height=h, ids=_freeze(np.ascontiguousarray(a.astype(np.uint8))),
                   ignore_id=ignore_id)


@dataclass(frozen=True, eq=False)
class ValidMask:
    """Per-pixel coverage flags for a raster of the same size."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.shape != (self.height, self.width):
            raise DomainError(f"bits shape {self.bits.shape} does not match declared size")
        if self.bits.dtype != np.bool_:
            raise DomainError("bits must be boolean")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ValidMask":
        a = np.ascontiguousarray(np.asarray(arr, dtype=bool))
        if a.ndim != 2:
            raise DomainError(f"expected a 2-D array, got shape {a.shape}")
        h, w = a.shape
        return cls(width=w, height=h, bits=_freeze(a))

    @classmethod
    def full(cls, width: int, height: int, value: bool) -> "ValidMask":
        return cls.from_array(np.full((height, width), value, dtype=bool))

    def coverage(self) -> float:
        """Fraction of pixels set."""
        return float(self.bits.mean())


Raster = Union[RasterImage, LabelMap]


@dataclass(frozen=True)
class ProjectionJob:
    """Parameters of one perspective-to-equirectangular rendering.

    ``n`` is the side length the source is expected to have; an even value
    is bumped to the next odd one (the grid needs a center sample) with a
    warning. ``interp`` applies to image payloads only; label maps always
    resample nearest-neighbor.
    """

    tangent: SphereCoord
    spec: EquirectSpec
    n: int
    interp: str = "bilinear"
    mode: str = "inverse"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"side length must be an integer >= 2, got {self.n}")
        n = int(self.n)
        if n % 2 == 0:
            warnings.warn(f"side length {n} is even; using {n + 1} so the grid has a center sample",
                          stacklevel=3)
            n += 1
        object.__setattr__(self, "n", n)
        if self.interp not in ("nearest", "bilinear"):
            raise DomainError(f"unknown interpolation {self.interp!r}")
        if self.mode not in ("inverse", "scatter"):
            raise DomainError(f"unknown mode {self.mode!r}")

    @property
    def half(self) -> int:
        return (self.n - 1) // 2

    @property
    def u_max(self) -> float:
        """Plane half-extent covered by the source grid, horizontal."""
        return self.half * math.tan(self.spec.delta_theta)

    @property
    def t_max(self) -> float:
        """Plane half-extent covered by the source grid, vertical."""
        return self.half * math.tan(self.spec.delta_phi)


def _require_square(payload: Raster, job: ProjectionJob) -> None:
    if payload.width != payload.height:
        raise DomainError(f"source must be square, got {payload.width}x{payload.height}")
    if payload.width != job.n:
        raise DomainError(f"source side {payload.width} does not match job side {job.n}")


def _band_ranges(height: int, threads: int):
    threads = max(1, min(threads, height))
    bounds = np.linspace(0, height, threads + 1, dtype=int)
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(threads)]


def _run_banded(height: int, threads: int, work) -> None:
    bands = _band_ranges(height, threads)
    if len(bands) == 1:
        work(*bands[0])
        return
    with ThreadPoolExecutor(max_workers=len(bands)) as pool:
        for fut in [pool.submit(work, r0, r1) for r0, r1 in bands]:
            fut.result()


def _inverse_project(payload: Raster, job: ProjectionJob, threads: int):
    """Shared inverse-mapping loop; returns (output array, mask bits)."""
    spec = job.spec
    w, h, n = spec.width, spec.height, job.n
    is_labels = isinstance(payload, LabelMap)
    interp = "nearest" if is_labels else job.interp

    step_u = math.tan(spec.delta_theta)
    step_t = math.tan(spec.delta_phi)
    u_max, t_max, half = job.u_max, job.t_max, job.half
    sin_p0 = math.sin(job.tangent.phi)
    cos_p0 = math.cos(job.tangent.phi)

    # azimuth depends on the column only; precompute its trig once
    dth = (np.arange(w, dtype=np.float64) + 0.5) * (_TWO_PI / w) - math.pi - job.tangent.theta
    sin_dth = np.sin(dth)
    cos_dth = np.cos(dth)

    if is_labels:
        out = np.full((h, w), payload.ignore_id, dtype=np.uint8)
        src = payload.ids
    else:
        out = np.zeros((h, w, payload.channels), dtype=np.float32)
        src = payload.samples
    bits = np.zeros((h, w), dtype=bool)

    def work(r0: int, r1: int) -> None:
        for r in range(r0, r1):
            phi = math.pi / 2.0 - math.pi * (r + 0.5) / h
            sin_p = math.sin(phi)
            cos_p = math.cos(phi)
            cos_c = sin_p0 * sin_p + cos_p0 * cos_p * cos_dth
            vis = cos_c > 0.0
            safe = np.where(vis, cos_c, 1.0)
            u = cos_p * sin_dth / safe
            t = (cos_p0 * sin_p - sin_p0 * cos_p * cos_dth) / safe
            inside = vis & (np.abs(u) <= u_max) & (np.abs(t) <= t_max)
            if not inside.any():
                continue
            ci = u[inside] / step_u + half
            ri = half - t[inside] / step_t
            if interp == "nearest":
                c_idx = np.clip(np.rint(ci).astype(np.intp), 0, n - 1)
                r_idx = np.clip(np.rint(ri).astype(np.intp), 0, n - 1)
                out[r, inside] = src[r_idx, c_idx]
            else:
                c0 = np.floor(ci)
                r0f = np.floor(ri)
                fc = (ci - c0)[:, None]
                fr = (ri - r0f)[:, None]
                c0i = np.clip(c0.astype(np.intp), 0, n - 1)
                c1i = np.clip(c0i + 1, 0, n - 1)
                r0i = np.clip(r0f.astype(np.intp), 0, n - 1)
                r1i = np.clip(r0i + 1, 0, n - 1)
                top = src[r0i, c0i] * (1.0 - fc) + src[r0i, c1i] * fc
                bot = src[r1i, c0i] * (1.0 - fc) + src[r1i, c1i] * fc
                out[r, inside] = (top * (1.0 - fr) + bot * fr).astype(np.float32)
            bits[r, inside] = True

    _run_banded(h, threads, work)
    return out, bits


def _scatter_project(payload: Raster, job: ProjectionJob):
    """Push every source grid point into the containing output pixel.

    Deposits follow source row-major order with later deposits winning, so
    the result matches a sequential loop regardless of the vectorized
    implementation.
    """
    spec = job.spec
    w, h, n, half = spec.width, spec.height, job.n, job.half
    step_u = math.tan(spec.delta_theta)
    step_t = math.tan(spec.delta_phi)

    i = np.arange(n, dtype=np.float64) - half           # source column -> u
    j = half - np.arange(n, dtype=np.float64)           # source row -> t (row 0 on top)
    u = np.broadcast_to(i * step_u, (n, n))
    t = np.broadcast_to((j * step_t)[:, None], (n, n))
    theta, phi = inverse_gnomonic_arrays(u, t, job.tangent.theta, job.tangent.phi)
    x = (theta + math.pi) * (w / _TWO_PI)
    y = (math.pi - 2.0 * phi) * (h / _TWO_PI)
    col = np.floor(x).astype(np.intp).ravel() % w
    row = np.clip(np.floor(y).astype(np.intp).ravel(), 0, h - 1)

    flat = row * w + col
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    last_of_run = np.r_[flat_sorted[1:] != flat_sorted[:-1], True]
    chosen = order[last_of_run]

    is_labels = isinstance(payload, LabelMap)
    if is_labels:
        out = np.full((h, w), payload.ignore_id, dtype=np.uint8)
        values = payload.ids.reshape(n * n)
    else:
        out = np.zeros((h, w, payload.channels), dtype=np.float32)
        values = payload.samples.reshape(n * n, payload.channels)
    bits = np.zeros(h * w, dtype=bool)
    out.reshape(-1, *out.shape[2:])[flat[chosen]] = values[chosen]
    bits[flat[chosen]] = True
    return out, bits.reshape(h, w)


def project_image(img: RasterImage, job: ProjectionJob, threads: int = 1) -> tuple[RasterImage, ValidMask]:
    """Render a square perspective image onto an equirectangular canvas.

    Returns the canvas and the coverage mask; pixels outside the projected
    region are 0. See the module docstring for the two modes.
    """
    if not isinstance(img, RasterImage):
        raise DomainError("project_image expects a RasterImage; use project_labels for label maps")
    _require_square(img, job)
    if job.mode == "scatter":
        out, bits = _scatter_project(img, job)
    else:
        out, bits = _inverse_project(img, job, threads)
    raster = RasterImage(width=job.spec.width, height=job.spec.height,
                         channels=img.channels, samples=_freeze(out))
    return raster, ValidMask.from_array(bits)


def project_labels(labels: LabelMap, job: ProjectionJob, threads: int = 1) -> tuple[LabelMap, ValidMask]:
    """Render a square label map onto an equirectangular canvas.

    Sampling is always nearest-neighbor so no new class ids can appear;
    uncovered pixels carry the map's ignore_id.
    """
    if not isinstance(labels, LabelMap):
        raise DomainError("project_labels expects a LabelMap")
    _require_square(labels, job)
    if job.mode == "scatter":
        out, bits = _scatter_project(labels, job)
    else:
        out, bits = _inverse_project(labels, job, threads)
    lm = LabelMap(width=job.spec.width, height=job.spec.height,
                  ids=_freeze(out), ignore_id=labels.ignore_id)
    return lm, ValidMask.from_array(bits)


def _tangent_grid_sphere_positions(width: int, height: int, tangent: SphereCoord, n: int):
    """Continuous raster coordinates of every tangent-grid sample, as (x, y) arrays."""
    half = (n - 1) // 2
    step_u = math.tan(_TWO_PI / width)
    step_t = math.tan(math.pi / height)
    i = np.arange(n, dtype=np.float64) - half
    j = half - np.arange(n, dtype=np.float64)
    u = np.broadcast_to(i * step_u, (n, n))
    t = np.broadcast_to((j * step_t)[:, None], (n, n))
    theta, phi = inverse_gnomonic_arrays(u, t, tangent.theta, tangent.phi)
    x = (theta + math.pi) * (width / _TWO_PI)
    y = (math.pi - 2.0 * phi) * (height / _TWO_PI)
    return x, y


def _sample_equirect_nearest(values: np.ndarray, x: np.ndarray, y: np.ndarray):
    h, w = values.shape[:2]
    col = np.floor(x).astype(np.intp) % w
    row = np.clip(np.floor(y).astype(np.intp), 0, h - 1)
    return values[row, col]


def _sample_equirect_bilinear(values: np.ndarray, x: np.ndarray, y: np.ndarray):
    h, w = values.shape[:2]
    xi = x - 0.5
    yi = y - 0.5
    x0 = np.floor(xi)
    y0 = np.floor(yi)
    fx = (xi - x0)[..., None]
    fy = (yi - y0)[..., None]
    c0 = x0.astype(np.intp) % w          # azimuth wraps
    c1 = (c0 + 1) % w
    r0 = np.clip(y0.astype(np.intp), 0, h - 1)  # elevation clamps at the poles
    r1 = np.clip(r0 + 1, 0, h - 1)
    top = values[r0, c0] * (1.0 - fx) + values[r0, c1] * fx
    bot = values[r1, c0] * (1.0 - fx) + values[r1, c1] * fx
    return top * (1.0 - fy) + bot * fy


def extract_tangent_image(equi: Raster, tangent: SphereCoord, n: int,
                          interp: str = "bilinear") -> Raster:
    """Sample an n x n tangent-plane view out of an equirectangular raster.

    The inverse operation of projecting: the returned raster is what a
    perspective camera at the sphere center pointed at ``tangent`` would
    capture, one grid step per source pixel. Label maps force nearest
    sampling and keep their ignore_id.
    """
    if n < 3 or n % 2 == 0:
        raise DomainError(f"side length must be odd and >= 3, got {n}")
    if interp not in ("nearest", "bilinear"):
        raise DomainError(f"unknown interpolation {interp!r}")
    if isinstance(equi, LabelMap):
        x, y = _tangent_grid_sphere_positions(equi.width, equi.height, tangent, n)
        ids = _sample_equirect_nearest(equi.ids, x, y)
        return LabelMap(width=n, height=n, ids=_freeze(np.ascontiguousarray(ids)),
                        ignore_id=equi.ignore_id)
    if not isinstance(equi, RasterImage):
        raise DomainError("extract_tangent_image expects a RasterImage or LabelMap")
    x, y = _tangent_grid_sphere_positions(equi.width, equi.height, tangent, n)
    if interp == "nearest":
        out = _sample_equirect_nearest(equi.samples, x, y)
    else:
        out = _sample_equirect_bilinear(equi.samples, x, y).astype(np.float32)
    return RasterImage(width=n, height=n, channels=equi.channels,
                       samples=_freeze(np.ascontiguousarray(out)))


def resize_square(payload: Raster, n: int) -> Raster:
    """Resample to n x n, ignoring aspect ratio.

    Images use bilinear interpolation, label maps nearest-neighbor. Equal
    input and output sizes reproduce the input exactly.
    """
    if n < 3:
        raise DomainError(f"target side must be >= 3, got {n}")
    if isinstance(payload, LabelMap):
        src_h, src_w = payload.ids.shape
        rows = np.minimum((np.floor((np.arange(n) + 0.5) * (src_h / n))).astype(np.intp), src_h - 1)
        cols = np.minimum((np.floor((np.arange(n) + 0.5) * (src_w / n))).astype(np.intp), src_w - 1)
        out = payload.ids[rows[:, None], cols[None, :]]
        return LabelMap(width=n, height=n, ids=_freeze(np.ascontiguousarray(out)),
                        ignore_id=payload.ignore_id)
    if not isinstance(payload, RasterImage):
        raise DomainError("resize_square expects a RasterImage or LabelMap")
    src = payload.samples
    src_h, src_w = src.shape[:2]

    def axis_coords(dst: int, size: int):
        pos = (np.arange(dst, dtype=np.float64) + 0.5) * (size / dst) - 0.5
        i0 = np.floor(pos)
        frac = pos - i0
        lo = np.clip(i0.astype(np.intp), 0, size - 1)
        hi = np.clip(lo + 1, 0, size - 1)
        return lo, hi, frac

    r0, r1, fr = axis_coords(n, src_h)
    c0, c1, fc = axis_coords(n, src_w)
    fr = fr[:, None, None]
    fc = fc[None, :, None]
    top = src[r0][:, c0] * (1.0 - fc) + src[r0][:, c1] * fc
    bot = src[r1][:, c0] * (1.0 - fc) + src[r1][:, c1] * fc
    out = (top * (1.0 - fr) + bot * fr).astype(np.float32)
    return RasterImage(width=n, height=n, channels=payload.channels,
                       samples=_freeze(np.ascontiguousarray(out)))


def mask_bbox(mask: ValidMask) -> tuple[int, int, int, int]:
    """Bounding box (x0, y0, width, height) of the set pixels.

    Columns are treated cyclically: when the region crosses the azimuth
    seam, x0 + width may exceed the raster width and column indices are to
    be taken modulo the raster width. The box starts after the largest
    empty column gap, so a wrapped region stays contiguous.
    """
    bits = mask.bits
    rows = np.flatnonzero(bits.any(axis=1))
    if rows.size == 0:
        raise DomainError("mask is empty")
    y0, y1 = int(rows[0]), int(rows[-1])
    cols_any = bits.any(axis=0)
    occupied = np.flatnonzero(cols_any)
    w = mask.width
    if occupied.size == w:
        return 0, y0, w, y1 - y0 + 1
    # cyclic gaps between consecutive occupied columns
    nxt = np.r_[occupied[1:], occupied[0] + w]
    gaps = nxt - occupied - 1
    k = int(np.argmax(gaps))
    x0 = int(nxt[k] % w)
    bw = w - int(gaps[k])
    return x0, y0, bw, y1 - y0 + 1


def _crop_cyclic(arr: np.ndarray, x0: int, y0: int, bw: int, bh: int) -> np.ndarray:
    cols = (x0 + np.arange(bw)) % arr.shape[1]
    return arr[y0:y0 + bh][:, cols]


def crop_to_upper_tile(payload: Raster, mask: ValidMask, tile: int) -> Raster:
    """Cut the mask's bounding box out of the canvas and resize it to tile x tile.

    The box is seam-aware (a region wrapping the azimuth seam comes out
    contiguous) and anchored at its own top row. Label maps keep ignore_id
    on pixels outside the mask and resize nearest-neighbor.
    """
    if payload.width != mask.width or payload.height != mask.height:
        raise DomainError("payload and mask sizes differ")
    if tile < 3 or tile > min(payload.width, payload.height):
        raise DomainError(f"tile {tile} must lie in [3, {min(payload.width, payload.height)}]")
    x0, y0, bw, bh = mask_bbox(mask)
    if isinstance(payload, LabelMap):
        ids = np.where(mask.bits, payload.ids, np.uint8(payload.ignore_id))
        box = _crop_cyclic(ids, x0, y0, bw, bh)
        cropped = LabelMap(width=bw, height=bh, ids=_freeze(np.ascontiguousarray(box)),
                           ignore_id=payload.ignore_id)
    elif isinstance(payload, RasterImage):
        box = _crop_cyclic(payload.samples, x0, y0, bw, bh)
        cropped = RasterImage(width=bw, height=bh, channels=payload.channels,
                              samples=_freeze(np.ascontiguousarray(box)))
    else:
        raise DomainError("crop_to_upper_tile expects a RasterImage or LabelMap")
    if bw == tile and bh == tile:
        return cropped
    return resize_square(cropped, tile)
