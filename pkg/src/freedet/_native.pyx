# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: pairwise IoU, greedy matching, suppression loops.

Semantics must stay bit-identical to the numpy fallbacks in kernels.py;
tests compare both backends on random inputs.  Inner loops run without
the GIL so worker threads can overlap real work.
"""

import numpy as np


def pairwise_iou(double[:, ::1] a, double[:, ::1] b):
    """IoU matrix between two (n, 4) / (m, 4) arrays of xywh boxes."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, aarea
    cdef double bx1, by1, bx2, by2, barea
    cdef double iw, ih, inter, union

    with nogil:
        for i in range(n):
            ax1 = a[i, 0]
            ay1 = a[i, 1]
            ax2 = ax1 + a[i, 2]
            ay2 = ay1 + a[i, 3]
            aarea = a[i, 2] * a[i, 3]
            for j in range(m):
                bx1 = b[j, 0]
                by1 = b[j, 1]
                bx2 = bx1 + b[j, 2]
                by2 = by1 + b[j, 3]
                iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
                if iw <= 0.0:
                    continue
                ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
                if ih <= 0.0:
                    continue
                barea = b[j, 2] * b[j, 3]
                inter = iw * ih
                union = aarea + barea - inter
                out[i, j] = inter / union
    return out_arr


cdef void _greedy_block(
    const double* iou, const unsigned char* allowed, double thr,
    Py_ssize_t d, Py_ssize_t g, unsigned char* tp, long long* match,
    unsigned char* taken,
) noexcept nogil:
    # rows in priority order; highest eligible column wins, ties to the
    # smaller index; allowed may be NULL (everything eligible)
    cdef Py_ssize_t i, j, best
    cdef double v, best_v
    for j in range(g):
        taken[j] = 0
    for i in range(d):
        best = -1
        best_v = 0.0
        for j in range(g):
            if taken[j]:
                continue
            if allowed != NULL and not allowed[i * g + j]:
                continue
            v = iou[i * g + j]
            if v >= thr and (best < 0 or v > best_v):
                best = j
                best_v = v
        if best >= 0:
            tp[i] = 1
            match[i] = best
            taken[best] = 1


def greedy_match(double[:, ::1] iou, double thr, unsigned char[:, ::1] allowed):
    """Greedy detection-to-GT matching over a precomputed IoU matrix.

    Rows must already be in priority (score-descending) order.  Each row
    takes the highest-IoU untaken column with iou >= thr and allowed set;
    ties go to the smaller column index.  Returns (tp flags, matched col
    per row, -1 when unmatched).
    """
    cdef Py_ssize_t d = iou.shape[0]
    cdef Py_ssize_t g = iou.shape[1]
    tp_arr = np.zeros(d, dtype=np.uint8)
    match_arr = np.full(d, -1, dtype=np.int64)
    taken_arr = np.zeros(g, dtype=np.uint8)
    cdef unsigned char[::1] tp = tp_arr
    cdef long long[::1] match = match_arr
    cdef unsigned char[::1] taken = taken_arr

    if d and g:
        with nogil:
            _greedy_block(&iou[0, 0], &allowed[0, 0], thr, d, g,
                          &tp[0], &match[0], &taken[0])
    return tp_arr, match_arr


def greedy_match_groups(
    double[::1] iou_flat,
    object allowed_flat,
    long long[::1] row_counts,
    long long[::1] col_counts,
    double thr,
):
    """Greedy matching over many independent (per-image) matrices at once.

    iou_flat concatenates each group's row-major IoU matrix; row_counts /
    col_counts give the group shapes.  allowed_flat is an equally laid out
    uint8 array or None.  Returns concatenated (tp flags, matched cols).
    """
    cdef Py_ssize_t n_groups = row_counts.shape[0]
    cdef Py_ssize_t total_rows = 0
    cdef Py_ssize_t max_cols = 0
    cdef Py_ssize_t k
    for k in range(n_groups):
        total_rows += row_counts[k]
        if col_counts[k] > max_cols:
            max_cols = col_counts[k]
    tp_arr = np.zeros(total_rows, dtype=np.uint8)
    match_arr = np.full(total_rows, -1, dtype=np.int64)
    taken_arr = np.zeros(max_cols if max_cols else 1, dtype=np.uint8)
    cdef unsigned char[::1] tp = tp_arr
    cdef long long[::1] match = match_arr
    cdef unsigned char[::1] taken = taken_arr
    cdef unsigned char[::1] allowed_view
    cdef const unsigned char* allowed_ptr = NULL
    cdef bint has_allowed = allowed_flat is not None
    if has_allowed:
        allowed_view = allowed_flat
        if allowed_view.shape[0]:
            allowed_ptr = &allowed_view[0]
    cdef Py_ssize_t off = 0
    cdef Py_ssize_t row_off = 0
    cdef Py_ssize_t d, g

    if total_rows == 0 or iou_flat.shape[0] == 0:
        return tp_arr, match_arr
    with nogil:
        for k in range(n_groups):
            d = row_counts[k]
            g = col_counts[k]
            if d and g:
                _greedy_block(
                    &iou_flat[off],
                    allowed_ptr + off if allowed_ptr != NULL else NULL,
                    thr, d, g, &tp[row_off], &match[row_off], &taken[0],
                )
            off += d * g
            row_off += d
    return tp_arr, match_arr


def nms_keep(double[:, ::1] boxes, double thr):
    """Greedy suppression over xywh boxes already in priority order.

    A later box is dropped when its IoU with any kept earlier box
    exceeds thr (strict).  Returns a uint8 keep mask.
    """
    cdef Py_ssize_t n = boxes.shape[0]
    keep_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] keep = keep_arr
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, aarea
    cdef double bx1, by1, bx2, by2
    cdef double iw, ih, inter, union

    with nogil:
        for i in range(n):
            if not keep[i]:
                continue
            ax1 = boxes[i, 0]
            ay1 = boxes[i, 1]
            ax2 = ax1 + boxes[i, 2]
            ay2 = ay1 + boxes[i, 3]
            aarea = boxes[i, 2] * boxes[i, 3]
            for j in range(i + 1, n):
                if not keep[j]:
                    continue
                bx1 = boxes[j, 0]
                by1 = boxes[j, 1]
                bx2 = bx1 + boxes[j, 2]
                by2 = by1 + boxes[j, 3]
                iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
                if iw <= 0.0:
                    continue
                ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
                if ih <= 0.0:
                    continue
                inter = iw * ih
                union = aarea + boxes[j, 2] * boxes[j, 3] - inter
                if inter / union > thr:
                    keep[j] = 0
    return keep_arr


def cross_suppress(double[:, ::1] boxes, double[:, ::1] refs, double thr):
    """Keep mask for boxes whose IoU with every reference box is <= thr."""
    cdef Py_ssize_t n = boxes.shape[0]
    cdef Py_ssize_t m = refs.shape[0]
    keep_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] keep = keep_arr
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, aarea
    cdef double bx1, by1, bx2, by2
    cdef double iw, ih, inter, union

    with nogil:
        for i in range(n):
            ax1 = boxes[i, 0]
            ay1 = boxes[i, 1]
            ax2 = ax1 + boxes[i, 2]
            ay2 = ay1 + boxes[i, 3]
            aarea = boxes[i, 2] * boxes[i, 3]
            for j in range(m):
                bx1 = refs[j, 0]
                by1 = refs[j, 1]
                bx2 = bx1 + refs[j, 2]
                by2 = by1 + refs[j, 3]
                iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
                if iw <= 0.0:
                    continue
                ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
                if ih <= 0.0:
                    continue
                inter = iw * ih
                union = aarea + refs[j, 2] * refs[j, 3] - inter
                if inter / union > thr:
                    keep[i] = 0
                    break
    return keep_arr
