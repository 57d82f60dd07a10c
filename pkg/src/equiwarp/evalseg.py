"""Segmentation scoring: confusion matrices, IoU, and result tables.

Counts are kept per (ground truth class, predicted class) with one extra
column for pixels the prediction marked as ignore. Ground-truth ignore
pixels are never scored. IoU is reported in percent; classes that never
occur score 0 in the mean but are dropped from the per-class map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .angles import phi_label
from .errors import DomainError
from .warp import LabelMap, ValidMask

DEFAULT_CLASSES = ("roads", "buildings", "vegetation", "sky", "pedestrians", "cars")

TABLE_FORMATS = ("csv", "markdown")


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Pixel counts with gt classes as rows and predictions as columns.

    The trailing column collects pixels predicted as ignore ("none"); it
    has no gt row because gt-ignore pixels are excluded before counting.
    """

    classes: tuple
    counts: np.ndarray

    def __post_init__(self):
        if len(self.classes) < 1:
            raise DomainError("need at least one class")
        if len(set(self.classes)) != len(self.classes):
            raise DomainError("duplicate class names")
        c = len(self.classes)
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (c, c + 1):
            raise DomainError(
                f"counts must be {c}x{c + 1} (gt rows, pred cols + none), got {counts.shape}"
            )
        if counts.min(initial=0) < 0:
            raise DomainError("counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zeros(cls, classes=DEFAULT_CLASSES) -> "ConfusionMatrix":
        c = len(classes)
        return cls(tuple(classes), np.zeros((c, c + 1), dtype=np.int64))

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def total(self) -> int:
        """Number of scored pixels."""
        return int(self.counts.sum())

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.classes != self.classes:
            raise DomainError("cannot add matrices over different class lists")
        return ConfusionMatrix(self.classes, self.counts + other.counts)


@dataclass(frozen=True, eq=False)
class IoUReport:
    classes: tuple
    per_class: Mapping[str, float] = field(default_factory=dict)
    mean: float = 0.0


def _check_ids(ids: np.ndarray, ignore_id: int, num_classes: int, kind: str) -> None:
    bad = ids[(ids >= num_classes) & (ids != ignore_id)]
    if bad.size:
        raise DomainError(f"{kind} contains undeclared id {int(bad[0])}")


def accumulate(
    pred: LabelMap,
    gt: LabelMap,
    mask: Optional[ValidMask],
    cm: ConfusionMatrix,
) -> ConfusionMatrix:
    """Count every scored pixel into a new matrix added onto ``cm``.

    A pixel is scored when gt is not ignore and the mask (if any) is set.
    Predicted-ignore pixels land in the trailing "none" column.
    """
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise DomainError("prediction and ground truth sizes differ")
    if mask is not None and (mask.width, mask.height) != (gt.width, gt.height):
        raise DomainError("mask size differs from label maps")
    c = cm.num_classes
    _check_ids(pred.ids, pred.ignore_id, c, "prediction")
    _check_ids(gt.ids, gt.ignore_id, c, "ground truth")

    scored = gt.ids != gt.ignore_id
    if mask is not None:
        scored &= mask.bits
    g = gt.ids[scored].astype(np.int64)
    p = pred.ids[scored].astype(np.int64)
    p[p == pred.ignore_id] = c
    fresh = np.bincount(g * (c + 1) + p, minlength=c * (c + 1)).reshape(c, c + 1)
    return ConfusionMatrix(cm.classes, cm.counts + fresh)


def iou(cm: ConfusionMatrix) -> IoUReport:
    """Per-class and mean IoU in percent.

    The mean divides by the declared class count; zero-union classes are
    absent from per_class and contribute 0.
    """
    c = cm.num_classes
    tp = np.diag(cm.counts[:, :c]).astype(np.float64)
    fp = cm.counts[:, :c].sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    union = tp + fp + fn
    per_class = {
        name: float(100.0 * tp[i] / union[i])
        for i, name in enumerate(cm.classes)
        if union[i] > 0
    }
    return IoUReport(cm.classes, per_class, sum(per_class.values()) / c)


def _row_label(key: Union[float, str]) -> str:
    return key if isinstance(key, str) else phi_label(float(key))


def _sorted_keys(reports: Mapping) -> list:
    return sorted(reports, key=lambda k: (1, k) if isinstance(k, str) else (0, k))


def _table_cells(reports: Mapping) -> tuple:
    """Shared layout: header names, row labels, 2-dp values, best flags."""
    keys = _sorted_keys(reports)
    classes = reports[keys[0]].classes
    for key in keys:
        if reports[key].classes != classes:
            raise DomainError("reports disagree on the class list")
    columns = list(classes) + ["average"]
    grid = []
    for key in keys:
        rep = reports[key]
        row = [rep.per_class.get(name, 0.0) for name in classes] + [rep.mean]
        grid.append([round(v, 2) for v in row])
    best = [max(row[j] for row in grid) for j in range(len(columns))]
    labels = [_row_label(k) for k in keys]
    return columns, labels, grid, best


def emit_table(reports: Mapping, fmt: str = "markdown") -> str:
    """Render IoU reports keyed by tangent elevation (or a plain string).

    Columns follow the declared class order plus an average column; the
    best value in each column is marked, ties all marked.
    """
    if fmt not in TABLE_FORMATS:
        raise DomainError(f"format must be one of {TABLE_FORMATS}, got {fmt!r}")
    if not reports:
        raise DomainError("need at least one report")
    columns, labels, grid, best = _table_cells(reports)

    if fmt == "csv":
        lines = ["phi," + ",".join(columns)]
        for label, row in zip(labels, grid):
            cells = [f"{v:.2f}*" if v == best[j] else f"{v:.2f}" for j, v in enumerate(row)]
            lines.append(label + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    head = "| phi | " + " | ".join(columns) + " |"
    rule = "|" + "---|" * (len(columns) + 1)
    lines = [head, rule]
    for label, row in zip(labels, grid):
        cells = [f"**{v:.2f}**" if v == best[j] else f"{v:.2f}" for j, v in enumerate(row)]
        lines.append("| " + label + " | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def parse_csv_table(text: str) -> dict:
    """Read back an emitted csv table; best markers are stripped."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")[1:]
    out = {}
    for line in lines[1:]:
        cells = line.split(",")
        out[cells[0]] = {
            name: float(cell.rstrip("*")) for name, cell in zip(header, cells[1:])
        }
    return out


def report_json(reports: Mapping) -> str:
    """Full-precision JSON variant of the result table."""
    if not reports:
        raise DomainError("need at least one report")
    payload = {}
    for key in _sorted_keys(reports):
        rep = reports[key]
        payload[_row_label(key)] = {
            "classes": list(rep.classes),
            "per_class": {k: rep.per_class[k] for k in rep.classes if k in rep.per_class},
            "mean": rep.mean,
        }
    return json.dumps(payload, indent=2) + "\n"
