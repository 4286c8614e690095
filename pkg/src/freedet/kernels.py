"""Box-geometry hot kernels with backend selection at import time.

The compiled extension (freedet._native, built from _native.pyx) is used
when importable; otherwise the numpy implementations below take over.
Set FREEDET_PURE=1 to force the numpy backend.  Both backends produce
bit-identical results; tests assert parity on random inputs.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("FREEDET_PURE"):
    _native = None
else:
    try:
        from freedet import _native  # type: ignore[attr-defined]
    except ImportError:
        _native = None

BACKEND = "native" if _native is not None else "numpy"


def active_backend() -> str:
    """Name of the kernel backend selected at import ('native' or 'numpy')."""
    return BACKEND


def as_box_array(boxes) -> np.ndarray:
    """Coerce a sequence of xywh boxes to a C-contiguous (n, 4) float64 array."""
    arr = np.ascontiguousarray(boxes, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected (n, 4) box array, got shape {arr.shape}")
    return arr


def pairwise_iou_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix between (n, 4) and (m, 4) xywh boxes."""
    ax1 = a[:, 0:1]
    ay1 = a[:, 1:2]
    ax2 = ax1 + a[:, 2:3]
    ay2 = ay1 + a[:, 3:4]
    bx1 = b[None, :, 0]
    by1 = b[None, :, 1]
    bx2 = bx1 + b[None, :, 2]
    by2 = by1 + b[None, :, 3]
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = a[:, 2:3] * a[:, 3:4] + (b[None, :, 2] * b[None, :, 3]) - inter
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    np.divide(inter, union, out=out, where=inter > 0)
    return out


def greedy_match_numpy(
    iou: np.ndarray, thr: float, allowed: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy row-to-column matching; see the compiled twin for semantics."""
    d, g = iou.shape
    tp = np.zeros(d, dtype=np.uint8)
    match = np.full(d, -1, dtype=np.int64)
    if g == 1:
        # single ground truth: the first eligible row takes it
        ok = iou[:, 0] >= thr
        if allowed is not None:
            ok &= allowed[:, 0] != 0
        hits = np.flatnonzero(ok)
        if hits.size:
            tp[hits[0]] = 1
            match[hits[0]] = 0
        return tp, match
    taken = np.zeros(g, dtype=bool)
    for i in range(d):
        eligible = ~taken & (iou[i] >= thr)
        if allowed is not None:
            eligible &= allowed[i] != 0
        if not eligible.any():
            continue
        masked = np.where(eligible, iou[i], -1.0)
        j = int(np.argmax(masked))
        tp[i] = 1
        match[i] = j
        taken[j] = True
        if taken.all():
            break
    return tp, match


def greedy_match_groups_numpy(
    iou_flat: np.ndarray,
    allowed_flat: np.ndarray | None,
    row_counts: np.ndarray,
    col_counts: np.ndarray,
    thr: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Grouped greedy matching over concatenated row-major matrices."""
    total_rows = int(row_counts.sum())
    tp = np.zeros(total_rows, dtype=np.uint8)
    match = np.full(total_rows, -1, dtype=np.int64)
    off = 0
    row_off = 0
    for d, g in zip(row_counts, col_counts):
        d = int(d)
        g = int(g)
        if d and g:
            block = iou_flat[off : off + d * g].reshape(d, g)
            allowed = (
                None
                if allowed_flat is None
                else allowed_flat[off : off + d * g].reshape(d, g)
            )
            btp, bmatch = greedy_match_numpy(block, thr, allowed)
            tp[row_off : row_off + d] = btp
            match[row_off : row_off + d] = bmatch
        off += d * g
        row_off += d
    return tp, match


def nms_keep_numpy(boxes: np.ndarray, thr: float) -> np.ndarray:
    """Greedy suppression keep mask; boxes already in priority order.

    IoU rows are computed lazily, only for boxes that survive so far.
    """
    n = boxes.shape[0]
    keep = np.ones(n, dtype=np.uint8)
    if n < 2:
        return keep
    x1 = boxes[:, 0]
    y1 = boxes[:, 1]
    x2 = x1 + boxes[:, 2]
    y2 = y1 + boxes[:, 3]
    area = boxes[:, 2] * boxes[:, 3]
    for i in range(n - 1):
        if not keep[i]:
            continue
        iw = np.minimum(x2[i], x2[i + 1 :]) - np.maximum(x1[i], x1[i + 1 :])
        ih = np.minimum(y2[i], y2[i + 1 :]) - np.maximum(y1[i], y1[i + 1 :])
        inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
        iou = inter / (area[i] + area[i + 1 :] - inter)
        keep[i + 1 :][iou > thr] = 0
    return keep


def cross_suppress_numpy(boxes: np.ndarray, refs: np.ndarray, thr: float) -> np.ndarray:
    """Keep mask for boxes whose IoU with every reference box is <= thr."""
    if boxes.shape[0] == 0 or refs.shape[0] == 0:
        return np.ones(boxes.shape[0], dtype=np.uint8)
    iou = pairwise_iou_numpy(boxes, refs)
    return (~(iou > thr).any(axis=1)).astype(np.uint8)


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_box_array(a)
    b = as_box_array(b)
    if _native is not None and a.size and b.size:
        return _native.pairwise_iou(a, b)
    return pairwise_iou_numpy(a, b)


def greedy_match(
    iou: np.ndarray, thr: float, allowed: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    iou = np.ascontiguousarray(iou, dtype=np.float64)
    if _native is not None and iou.size:
        if allowed is None:
            allowed = np.ones(iou.shape, dtype=np.uint8)
        else:
            allowed = np.ascontiguousarray(allowed, dtype=np.uint8)
        return _native.greedy_match(iou, float(thr), allowed)
    if allowed is not None:
        allowed = np.ascontiguousarray(allowed, dtype=np.uint8)
    return greedy_match_numpy(iou, float(thr), allowed)


def greedy_match_groups(
    iou_flat: np.ndarray,
    allowed_flat: np.ndarray | None,
    row_counts: np.ndarray,
    col_counts: np.ndarray,
    thr: float,
) -> tuple[np.ndarray, np.ndarray]:
    iou_flat = np.ascontiguousarray(iou_flat, dtype=np.float64)
    row_counts = np.ascontiguousarray(row_counts, dtype=np.int64)
    col_counts = np.ascontiguousarray(col_counts, dtype=np.int64)
    if allowed_flat is not None:
        allowed_flat = np.ascontiguousarray(allowed_flat, dtype=np.uint8)
    if _native is not None:
        return _native.greedy_match_groups(
            iou_flat, allowed_flat, row_counts, col_counts, float(thr)
        )
    return greedy_match_groups_numpy(iou_flat, allowed_flat, row_counts, col_counts, float(thr))


def nms_keep(boxes: np.ndarray, thr: float) -> np.ndarray:
    boxes = as_box_array(boxes)
    if _native is not None and boxes.size:
        return _native.nms_keep(boxes, float(thr))
    return nms_keep_numpy(boxes, float(thr))


def cross_suppress(boxes: np.ndarray, refs: np.ndarray, thr: float) -> np.ndarray:
    boxes = as_box_array(boxes)
    refs = as_box_array(refs)
    if _native is not None and boxes.size and refs.size:
        return _native.cross_suppress(boxes, refs, float(thr))
    return cross_suppress_numpy(boxes, refs, float(thr))
