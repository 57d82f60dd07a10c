"""Sphere / equirectangular / tangent-plane coordinate math.

Conventions used throughout the package:

- ``theta`` is azimuth in radians, normalized to [-pi, pi). ``phi`` is
  elevation from the equator in radians, positive toward the north pole,
  in [-pi/2, pi/2].
- An equirectangular raster of size w x h spans the full sphere: column x
  covers azimuth linearly (theta = 2*pi*x/w - pi) and row y covers
  elevation top-down (phi = pi/2 - pi*y/h). Continuous pixel coordinates
  put pixel centers at half-integers.
- The tangent plane touches the unit sphere at a point (theta0, phi0).
  Plane coordinates (u, t) are unitless offsets in the tangent space; the
  projection through the sphere center maps plane point (u, t) to the ray
  direction, so rho = sqrt(u^2 + t^2) = tan(angular distance from the
  tangent point).

All functions here are pure and operate on scalars; the private ``*_arrays``
kernels carry the same formulas on numpy arrays for the warping code.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError, InternalConsistencyError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .warp import ValidMask

__all__ = [
    "SphereCoord",
    "EquirectSpec",
    "PixelCoord",
    "PlanePoint",
    "TangentGridSpec",
    "AngularTerms",
    "sphere_to_pixel",
    "pixel_to_sphere",
    "plane_coords",
    "inverse_gnomonic",
    "forward_gnomonic",
    "solid_angle_of_mask",
    "distorted_kernel_grid",
]

_TWO_PI = 2.0 * math.pi
# Slack for asin arguments: rounding may push them past 1 by a few ulp,
# anything larger signals broken math upstream.
_ASIN_SLACK = 1e-12


def wrap_theta(theta: float) -> float:
    """Normalize an azimuth to [-pi, pi)."""
    return (theta + math.pi) % _TWO_PI - math.pi


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class SphereCoord:
    """A point on the unit sphere: azimuth ``theta``, elevation ``phi``."""

    theta: float
    phi: float

    def __post_init__(self):
        _require_finite("SphereCoord", self.theta, self.phi)
        if not -math.pi / 2 <= self.phi <= math.pi / 2:
            raise DomainError(f"phi must lie in [-pi/2, pi/2], got {self.phi!r}")
        object.__setattr__(self, "theta", wrap_theta(float(self.theta)))
        object.__setattr__(self, "phi", float(self.phi))


@dataclass(frozen=True)
class EquirectSpec:
    """Geometry of an equirectangular raster covering the full sphere."""

    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise DomainError("width and height must be integers")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if self.width < 2 or self.height < 1:
            raise DomainError(f"raster too small: {self.width}x{self.height}")
        if self.width != 2 * self.height:
            warnings.warn(
                f"equirect raster {self.width}x{self.height} has non-square pixels "
                "(width != 2*height): horizontal and vertical angular steps differ",
                stacklevel=3,
            )

    @property
    def delta_theta(self) -> float:
        """Azimuth step per column, 2*pi/width."""
        return _TWO_PI / self.width

    @property
    def delta_phi(self) -> float:
        """Elevation step per row, pi/height."""
        return math.pi / self.height


@dataclass(frozen=True)
class PixelCoord:
    """Continuous raster coordinates; x right from 0, y down from 0."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("PixelCoord", self.x, self.y)
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class PlanePoint:
    """Cartesian offsets on the tangent plane; (0, 0) is the tangency point."""

    u: float
    t: float

    def __post_init__(self):
        _require_finite("PlanePoint", self.u, self.t)
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class TangentGridSpec:
    """An n x n grid of sample points on a tangent plane.

    Grid indices i (horizontal) and j (vertical, positive up) run over
    [-(n-1)/2, (n-1)/2]; the sample at (i, j) sits at plane coordinates
    (i*step_u, j*step_t).
    """

    n: int
    tangent: SphereCoord
    step_u: float
    step_t: float

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise DomainError(f"grid side must be odd and >= 3, got {self.n}")
        _require_finite("TangentGridSpec", self.step_u, self.step_t)
        if self.step_u <= 0 or self.step_t <= 0:
            raise DomainError("grid steps must be positive")

    @classmethod
    def for_spec(cls, n: int, tangent: SphereCoord, spec: EquirectSpec) -> "TangentGridSpec":
        """Grid whose steps match one raster pixel of ``spec`` at the tangent point."""
        return cls(n=n, tangent=tangent, step_u=math.tan(spec.delta_theta), step_t=math.tan(spec.delta_phi))

    @property
    def half(self) -> int:
        return (self.n - 1) // 2

    @property
    def u_max(self) -> float:
        """Plane half-extent along u covered by the grid."""
        return self.half * self.step_u

    @property
    def t_max(self) -> float:
        """Plane half-extent along t covered by the grid."""
        return self.half * self.step_t


@dataclass(frozen=True)
class AngularTerms:
    """Radial plane distance ``rho`` and its view angle ``v = atan(rho)``."""

    rho: float
    v: float

    def __post_init__(self):
        _require_finite("AngularTerms", self.rho, self.v)
        if self.rho < 0:
            raise DomainError(f"rho must be >= 0, got {self.rho!r}")
        if (self.rho == 0.0) != (self.v == 0.0):
            raise DomainError("rho and v must vanish together")

    @classmethod
    def from_plane(cls, p: PlanePoint) -> "AngularTerms":
        rho = math.sqrt(p.u * p.u + p.t * p.t)
        return cls(rho=rho, v=math.atan(rho))


def sphere_to_pixel(s: SphereCoord, spec: EquirectSpec) -> PixelCoord:
    """Map a sphere point to continuous equirectangular pixel coordinates.

    x = (theta + pi) * w / (2*pi) and y = (pi - 2*phi) * h / (2*pi), so
    x grows with azimuth, y grows downward (north pole at y = 0).
    """
    x = (s.theta + math.pi) * spec.width / _TWO_PI
    y = (math.pi - 2.0 * s.phi) * spec.height / _TWO_PI
    return PixelCoord(x, y)


def pixel_to_sphere(p: PixelCoord, spec: EquirectSpec) -> SphereCoord:
    """Map continuous pixel coordinates back to the sphere.

    Inverse of :func:`sphere_to_pixel`; x may equal width (the seam) and y
    may equal height (the south pole). Out-of-range coordinates raise
    :class:`DomainError`.
    """
    if not (0.0 <= p.x <= spec.width and 0.0 <= p.y <= spec.height):
        raise DomainError(
            f"pixel ({p.x}, {p.y}) outside raster [0, {spec.width}] x [0, {spec.height}]"
        )
    theta = _TWO_PI * p.x / spec.width - math.pi
    phi = math.pi / 2.0 - math.pi * p.y / spec.height
    return SphereCoord(theta, phi)


def plane_coords(i: int, j: int, grid: TangentGridSpec) -> PlanePoint:
    """Plane coordinates of grid sample (i, j): (i*step_u, j*step_t).

    j is positive toward increasing elevation (up in image terms).
    """
    if abs(i) > grid.half or abs(j) > grid.half:
        raise DomainError(f"grid index ({i}, {j}) outside +/-{grid.half}")
    return PlanePoint(i * grid.step_u, j * grid.step_t)


def inverse_gnomonic(p: PlanePoint, tangent: SphereCoord) -> SphereCoord:
    """Map a tangent-plane point to the sphere (projection through the center).

    Writing rho = sqrt(u^2 + t^2) and v = atan(rho):

        phi' = asin(cos(v)*sin(phi0) + t*sin(v)*cos(phi0)/rho)
        theta' = theta0 + atan2(u*sin(v), rho*cos(phi0)*cos(v) - t*sin(phi0)*sin(v))

    Both are evaluated here in the algebraically identical form obtained by
    substituting sin(v) = rho/sqrt(1+rho^2), cos(v) = 1/sqrt(1+rho^2), which
    removes the 0/0 at rho -> 0 and needs no trig of v. rho = 0 returns the
    tangent point exactly.
    """
    terms = AngularTerms.from_plane(p)
    if terms.rho == 0.0:
        return tangent
    hyp = math.sqrt(1.0 + terms.rho * terms.rho)  # = 1/cos(v)
    sin_p0 = math.sin(tangent.phi)
    cos_p0 = math.cos(tangent.phi)
    arg = (sin_p0 + p.t * cos_p0) / hyp
    if arg > 1.0 or arg < -1.0:
        if abs(arg) - 1.0 > _ASIN_SLACK:
            raise InternalConsistencyError(f"asin argument {arg!r} exceeds [-1, 1]")
        arg = math.copysign(1.0, arg)
    phi = math.asin(arg)
    theta = tangent.theta + math.atan2(p.u, cos_p0 - p.t * sin_p0)
    return SphereCoord(theta, phi)


def forward_gnomonic(s: SphereCoord, tangent: SphereCoord) -> tuple[PlanePoint, bool]:
    """Project a sphere point onto the tangent plane.

    Returns the plane point and a visibility flag; points on the far
    hemisphere (angular distance >= pi/2 from the tangent point, where the
    center ray never meets the plane) come back as ((0, 0), False).
    """
    dth = s.theta - tangent.theta
    sin_p0 = math.sin(tangent.phi)
    cos_p0 = math.cos(tangent.phi)
    sin_p = math.sin(s.phi)
    cos_p = math.cos(s.phi)
    cos_c = sin_p0 * sin_p + cos_p0 * cos_p * math.cos(dth)
    if cos_c <= 0.0:
        return PlanePoint(0.0, 0.0), False
    u = cos_p * math.sin(dth) / cos_c
    t = (cos_p0 * sin_p - sin_p0 * cos_p * math.cos(dth)) / cos_c
    return PlanePoint(u, t), True


def solid_angle_of_mask(mask: "ValidMask", spec: EquirectSpec) -> float:
    """Discrete solid angle (steradians) covered by the set mask pixels.

    Each pixel contributes delta_theta * delta_phi * cos(phi at its row
    center); columns share the weight, so the sum reduces to per-row counts.
    """
    if mask.width != spec.width or mask.height != spec.height:
        raise DomainError(
            f"mask {mask.width}x{mask.height} does not match raster "
            f"{spec.width}x{spec.height}"
        )
    counts = mask.bits.sum(axis=1, dtype=np.int64)
    rows = np.arange(spec.height, dtype=np.float64)
    phi_centers = math.pi / 2.0 - math.pi * (rows + 0.5) / spec.height
    weights = np.cos(phi_centers)
    return float(spec.delta_theta * spec.delta_phi * (counts * weights).sum())


def distorted_kernel_grid(spec: EquirectSpec, k: int, center: PixelCoord) -> list[PixelCoord]:
    """Raster positions a k x k kernel should sample around ``center``.

    The grid is laid out on the tangent plane at the sphere point under
    ``center`` and mapped back to the raster, so its shape stretches with
    latitude the same way the raster stretches the scene. Entries are
    row-major from the top-left sample; the middle entry is ``center``
    itself. Positions wrap modulo width when the grid crosses the seam.
    """
    if k < 3 or k % 2 == 0:
        raise DomainError(f"kernel size must be odd and >= 3, got {k}")
    tangent = pixel_to_sphere(center, spec)  # raises DomainError when outside
    grid = TangentGridSpec.for_spec(k, tangent, spec)
    out: list[PixelCoord] = []
    for j in range(grid.half, -grid.half - 1, -1):
        for i in range(-grid.half, grid.half + 1):
            if i == 0 and j == 0:
                out.append(center)
                continue
            s = inverse_gnomonic(plane_coords(i, j, grid), tangent)
            out.append(sphere_to_pixel(s, spec))
    return out


# ---------------------------------------------------------------------------
# Array kernels. Same formulas as the scalar ops above, on float64 arrays.


def inverse_gnomonic_arrays(u, t, theta0: float, phi0: float):
    """Vectorized inverse_gnomonic; returns (theta, phi) arrays."""
    u = np.asarray(u, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    hyp = np.sqrt(1.0 + u * u + t * t)
    sin_p0 = math.sin(phi0)
    cos_p0 = math.cos(phi0)
    arg = (sin_p0 + t * cos_p0) / hyp
    excess = np.abs(arg) - 1.0
    if np.any(excess > _ASIN_SLACK):
        raise InternalConsistencyError("asin argument exceeds [-1, 1] beyond rounding")
    phi = np.arcsin(np.clip(arg, -1.0, 1.0))
    theta = theta0 + np.arctan2(u, cos_p0 - t * sin_p0)
    theta = np.mod(theta + math.pi, _TWO_PI) - math.pi
    return theta, phi


def forward_gnomonic_arrays(theta, phi, theta0: float, phi0: float):
    """Vectorized forward_gnomonic; returns (u, t, visible) arrays.

    u and t are 0 where visible is False.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    sin_p0 = math.sin(phi0)
    cos_p0 = math.cos(phi0)
    sin_p = np.sin(phi)
    cos_p = np.cos(phi)
    cos_dth = np.cos(theta - theta0)
    cos_c = sin_p0 * sin_p + cos_p0 * cos_p * cos_dth
    visible = cos_c > 0.0
    safe = np.where(visible, cos_c, 1.0)
    u = np.where(visible, cos_p * np.sin(theta - theta0) / safe, 0.0)
    t = np.where(visible, (cos_p0 * sin_p - sin_p0 * cos_p * cos_dth) / safe, 0.0)
    return u, t, visible
