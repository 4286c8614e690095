"""Two-step pseudo-label enrichment: merge initial grounding labels with
model-supplemental labels under confidence filtering and NMS.

Initial detections are authoritative: they pass through untouched, and
supplemental detections overlapping them are suppressed.  The merge is a
single pass; labels are generated once, not iterated.
"""

from __future__ import annotations

from typing import Sequence

from freedet import kernels
from freedet.core import Detection
from freedet.errors import ValidationError
from freedet.geometry import detection_sort_key


def merge_labels(
    initial: Sequence[Detection],
    supplemental: Sequence[Detection],
    conf_threshold: float = 0.5,
    nms_threshold: float = 0.5,
) -> list[Detection]:
    """Merge supplemental detections into the initial set.

    Supplemental detections are kept only when score > conf_threshold
    (strict), they overlap no same-image initial detection above
    nms_threshold, and they survive class-agnostic NMS among themselves.
    Beam candidates are preserved intact.  Output lists the initial
    detections in input order followed by the surviving supplemental
    detections in score-descending order.
    """
    for name, value in (("conf_threshold", conf_threshold), ("nms_threshold", nms_threshold)):
        if not 0.0 <= value <= 1.0:
            raise ValidationError(f"{name} must be in [0, 1], got {value}")

    confident = [d for d in supplemental if d.score > conf_threshold]
    confident.sort(key=detection_sort_key)

    initial_by_image: dict = {}
    for det in initial:
        initial_by_image.setdefault(det.image_id, []).append(det)
    supp_by_image: dict = {}
    for idx, det in enumerate(confident):
        supp_by_image.setdefault(det.image_id, []).append(idx)

    kept = [False] * len(confident)
    for image_id, indices in supp_by_image.items():
        boxes = kernels.as_box_array([confident[i].box.as_xywh() for i in indices])
        anchors = initial_by_image.get(image_id, [])
        if anchors:
            anchor_boxes = kernels.as_box_array([d.box.as_xywh() for d in anchors])
            survive = kernels.cross_suppress(boxes, anchor_boxes, nms_threshold)
        else:
            survive = [1] * len(indices)
        live = [i for i, ok in zip(indices, survive) if ok]
        if not live:
            continue
        live_boxes = kernels.as_box_array([confident[i].box.as_xywh() for i in live])
        keep = kernels.nms_keep(live_boxes, nms_threshold)
        for i, ok in zip(live, keep):
            kept[i] = bool(ok)

    survivors = [det for i, det in enumerate(confident) if kept[i]]
    return list(initial) + survivors
