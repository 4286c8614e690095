"""Box arithmetic: format conversion, IoU, generalized IoU, NMS.

All functions are pure; matrix-valued operations route through the
kernels backend (compiled extension or numpy fallback).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from freedet import kernels
from freedet.core import BoundingBox, Detection, image_sort_key
from freedet.errors import ValidationError

BOX_FORMATS = ("xywh", "xyxy", "cxcywh")


def convert_box(box: Sequence[float], src: str, dst: str) -> tuple[float, float, float, float]:
    """Convert a 4-number box between xywh, xyxy and cxcywh.

    Round-trips are exact up to floating round-off.  Degenerate inputs
    (non-positive extents) are rejected.
    """
    if src not in BOX_FORMATS or dst not in BOX_FORMATS:
        raise ValidationError(f"box format must be one of {BOX_FORMATS}")
    a, b, c, d = (float(v) for v in box)
    if src == "xywh":
        x1, y1, w, h = a, b, c, d
    elif src == "xyxy":
        x1, y1, w, h = a, b, c - a, d - b
    else:
        x1, y1, w, h = a - c / 2.0, b - d / 2.0, c, d
    if w <= 0 or h <= 0:
        raise ValidationError(f"degenerate {src} box {tuple(box)}: non-positive extent")
    if dst == "xywh":
        return (x1, y1, w, h)
    if dst == "xyxy":
        return (x1, y1, x1 + w, y1 + h)
    return (x1 + w / 2.0, y1 + h / 2.0, w, h)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when the boxes do not overlap."""
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    if iw <= 0:
        return 0.0
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def giou(a: BoundingBox, b: BoundingBox) -> float:
    """Generalized IoU: IoU minus the normalized empty part of the hull.

    Always <= iou(a, b); equal when the enclosing box is fully covered
    by the union.  Ranges over (-1, 1] for valid boxes.
    """
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    inter = iw * ih if (iw > 0 and ih > 0) else 0.0
    union = a.area + b.area - inter
    base = inter / union if inter > 0 else 0.0
    hull = (max(a.x2, b.x2) - min(a.x, b.x)) * (max(a.y2, b.y2) - min(a.y, b.y))
    return base - (hull - union) / hull


def iou_matrix(boxes_a: Sequence[BoundingBox], boxes_b: Sequence[BoundingBox]) -> np.ndarray:
    """Pairwise IoU between two box lists as an (n, m) float64 array."""
    arr_a = kernels.as_box_array([bx.as_xywh() for bx in boxes_a])
    arr_b = kernels.as_box_array([bx.as_xywh() for bx in boxes_b])
    return kernels.pairwise_iou(arr_a, arr_b)


def detection_sort_key(det: Detection):
    """Score-descending order with a deterministic tie-break on equal scores."""
    return (-det.score, image_sort_key(det.image_id), det.box.x, det.box.y, det.box.w, det.box.h)


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Class-agnostic greedy NMS, applied independently per image.

    Output is sorted by score descending (ties broken by image id and
    box coordinates); no retained pair within an image overlaps more
    than iou_threshold.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValidationError(f"NMS threshold must be in [0, 1], got {iou_threshold}")
    ordered = sorted(dets, key=detection_sort_key)
    by_image: dict = {}
    for idx, det in enumerate(ordered):
        by_image.setdefault(det.image_id, []).append(idx)
    kept_flags = np.zeros(len(ordered), dtype=bool)
    for indices in by_image.values():
        boxes = kernels.as_box_array([ordered[i].box.as_xywh() for i in indices])
        keep = kernels.nms_keep(boxes, iou_threshold)
        for local, idx in enumerate(indices):
            kept_flags[idx] = bool(keep[local])
    return [det for idx, det in enumerate(ordered) if kept_flags[idx]]
