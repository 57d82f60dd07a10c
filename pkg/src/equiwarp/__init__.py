"""Equirectangular warping toolkit.

Projects perspective images and label maps onto tangent planes of the unit
sphere and renders them into equirectangular rasters, extracts tangent-plane
views back out, builds elevation-sweep datasets, and scores segmentation
outputs with per-class IoU.
"""

from .angles import AngleParseError, parse_angle, phi_dirname, phi_label
from .dataset import (
    DEFAULT_PHIS,
    ManifestEntry,
    SweepConfig,
    build_sweep,
    build_testset,
    discover_pairs,
    load_class_map,
    load_crops,
    read_manifest,
    write_manifest,
)
from .errors import DomainError, InternalConsistencyError
from .evalseg import (
    DEFAULT_CLASSES,
    ConfusionMatrix,
    IoUReport,
    accumulate,
    emit_table,
    iou,
    report_json,
)
from .pngio import read_image, read_labels, read_mask, write_image, write_labels, write_mask
from .sphere import (
    AngularTerms,
    EquirectSpec,
    PixelCoord,
    PlanePoint,
    SphereCoord,
    TangentGridSpec,
    distorted_kernel_grid,
    forward_gnomonic,
    inverse_gnomonic,
    pixel_to_sphere,
    plane_coords,
    solid_angle_of_mask,
    sphere_to_pixel,
)
from .warp import (
    LabelMap,
    ProjectionJob,
    RasterImage,
    ValidMask,
    crop_to_upper_tile,
    extract_tangent_image,
    mask_bbox,
    project_image,
    project_labels,
    resize_square,
)

__version__ = "0.1.0"

__all__ = [
    "AngleParseError",
    "AngularTerms",
    "ConfusionMatrix",
    "DEFAULT_CLASSES",
    "DEFAULT_PHIS",
    "DomainError",
    "EquirectSpec",
    "InternalConsistencyError",
    "IoUReport",
    "LabelMap",
    "ManifestEntry",
    "PixelCoord",
    "PlanePoint",
    "ProjectionJob",
    "RasterImage",
    "SphereCoord",
    "SweepConfig",
    "TangentGridSpec",
    "ValidMask",
    "accumulate",
    "build_sweep",
    "build_testset",
    "crop_to_upper_tile",
    "discover_pairs",
    "distorted_kernel_grid",
    "emit_table",
    "extract_tangent_image",
    "forward_gnomonic",
    "inverse_gnomonic",
    "iou",
    "load_class_map",
    "load_crops",
    "mask_bbox",
    "parse_angle",
    "phi_dirname",
    "phi_label",
    "pixel_to_sphere",
    "plane_coords",
    "project_image",
    "project_labels",
    "read_image",
    "read_labels",
    "read_manifest",
    "read_mask",
    "report_json",
    "resize_square",
    "solid_angle_of_mask",
    "sphere_to_pixel",
    "write_image",
    "write_labels",
    "write_manifest",
    "write_mask",
    "__version__",
]
