"""Precision/recall machinery for both evaluation protocols.

Protocol "mapped": taxonomy-space fixed AP (dataset-wide per-class cap,
frequency-bucket means).  Protocol "meteor": category-free dense-caption
mAP over the IoU x METEOR threshold grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from freedet import kernels
from freedet._parallel import ordered_map
from freedet.core import Detection, EvalConfig, GroundTruthAnnotation, Taxonomy, image_sort_key
from freedet.errors import ContractError, ValidationError
from freedet.mapping import MappedDetection
from freedet.meteor import DEFAULT_PARAMS, MeteorParams, meteor


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) points in score-descending order."""

    points: tuple[tuple[float, float], ...]
    num_gt: int


@dataclass(frozen=True)
class EvalReport:
    protocol: str
    ap_all: float | None = None
    ap_r: float | None = None
    ap_c: float | None = None
    ap_f: float | None = None
    ap_per_category: dict[int, float] | None = None
    iou_grid: tuple[float, ...] | None = None
    meteor_grid: tuple[float, ...] | None = None
    grid_ap: tuple[tuple[float, ...], ...] | None = None
    map_densecap: float | None = None


def pr_curve(flags: Sequence[bool], num_gt: int) -> PRCurve:
    """Cumulative precision/recall points for TP/FP flags in score order."""
    tp = 0
    fp = 0
    points = []
    for flag in flags:
        if flag:
            tp += 1
        else:
            fp += 1
        recall = tp / num_gt if num_gt else 0.0
        points.append((recall, tp / (tp + fp)))
    return PRCurve(points=tuple(points), num_gt=num_gt)


def average_precision(
    flags: Sequence[bool], num_gt: int, interpolation_points: int = 101
) -> float:
    """Interpolated average precision.

    interpolation_points = 0 selects all-point interpolation (the exact
    area under the precision envelope); the default 101 matches the
    common fixed-grid convention.
    """
    if num_gt < 0:
        raise ValidationError(f"num_gt must be >= 0, got {num_gt}")
    if num_gt == 0 or len(flags) == 0:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=bool))
    ranks = np.arange(1, len(flags) + 1)
    recall = tp / num_gt
    precision = tp / ranks
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    if interpolation_points == 0:
        prev_recall = np.concatenate(([0.0], recall[:-1]))
        return float(((recall - prev_recall) * envelope).sum())
    grid = np.linspace(0.0, 1.0, interpolation_points)
    idx = np.searchsorted(recall, grid, side="left")
    valid = idx < len(flags)
    interp = np.where(valid, envelope[np.minimum(idx, len(flags) - 1)], 0.0)
    return float(interp.mean())


def _assert_score_sorted(dets: Sequence) -> None:
    scores = [d.score for d in dets]
    if any(a < b for a, b in zip(scores, scores[1:])):
        raise ContractError("detections must be sorted by score descending")


def _group_indices(items: Sequence, key_fn) -> dict:
    groups: dict = {}
    for idx, item in enumerate(items):
        groups.setdefault(key_fn(item), []).append(idx)
    return groups


def match_greedy(
    dets: Sequence,
    gts: Sequence[GroundTruthAnnotation],
    iou_threshold: float,
    extra_predicate: Callable | None = None,
) -> list[bool]:
    """Greedy TP/FP flags for score-sorted detections against ground truth.

    Each detection takes the unmatched same-image GT of highest IoU >=
    threshold that also passes extra_predicate(det, gt); each GT is used
    at most once.  IoU ties go to the earlier GT record.
    """
    _assert_score_sorted(dets)
    flags = np.zeros(len(dets), dtype=bool)
    det_groups = _group_indices(dets, lambda d: d.image_id)
    gt_groups = _group_indices(gts, lambda g: g.image_id)
    for image_id, det_idx in det_groups.items():
        gt_idx = gt_groups.get(image_id)
        if not gt_idx:
            continue
        iou = kernels.pairwise_iou(
            [dets[i].box.as_xywh() for i in det_idx],
            [gts[j].box.as_xywh() for j in gt_idx],
        )
        if extra_predicate is None:
            allowed = None
        else:
            allowed = np.zeros(iou.shape, dtype=np.uint8)
            for a, i in enumerate(det_idx):
                for b, j in enumerate(gt_idx):
                    if iou[a, b] >= iou_threshold and extra_predicate(dets[i], gts[j]):
                        allowed[a, b] = 1
        tp, _ = kernels.greedy_match(iou, iou_threshold, allowed)
        for a, i in enumerate(det_idx):
            flags[i] = bool(tp[a])
    return flags.tolist()


def _mapped_sort_key(m: MappedDetection):
    return (-m.score, image_sort_key(m.image_id), m.box.x, m.box.y, m.box.w, m.box.h,
            m.category_id)


def _bucket_mean(per_category: dict[int, float], ids: Sequence[int]) -> float | None:
    values = [per_category[cid] for cid in ids if cid in per_category]
    if not values:
        return None
    return float(np.mean(values))


def evaluate_fixed_ap(
    mapped: Sequence[MappedDetection],
    gts: Sequence[GroundTruthAnnotation],
    taxonomy: Taxonomy,
    config: EvalConfig | None = None,
    threads: int = 1,
) -> EvalReport:
    """Fixed AP over the taxonomy: per class, detections are pooled
    dataset-wide and truncated to the top per_class_cap by score (no
    per-image cap), matched per IoU threshold, averaged over the grid.

    Categories with zero ground truth are excluded from every mean; an
    empty frequency bucket is reported as absent rather than zero.
    """
    config = config or EvalConfig()
    for gt in gts:
        if gt.category_id not in taxonomy.by_id:
            raise ValidationError(
                f"ground truth references category_id {gt.category_id} not in the taxonomy"
            )
    for m in mapped:
        if m.category_id not in taxonomy.by_id:
            raise ValidationError(
                f"mapped detection references category_id {m.category_id} not in the taxonomy"
            )
    gt_by_cat = _group_indices(gts, lambda g: g.category_id)
    det_by_cat = _group_indices(mapped, lambda m: m.category_id)
    scored_cats = [cid for cid in sorted(taxonomy.by_id) if gt_by_cat.get(cid)]

    def eval_category(cid: int) -> float:
        cat_gts = [gts[j] for j in gt_by_cat[cid]]
        cat_dets = sorted((mapped[i] for i in det_by_cat.get(cid, [])), key=_mapped_sort_key)
        cat_dets = cat_dets[: config.per_class_cap]
        num_gt = len(cat_gts)
        if not cat_dets:
            return 0.0
        det_groups = _group_indices(cat_dets, lambda d: d.image_id)
        gt_groups = _group_indices(cat_gts, lambda g: g.image_id)
        blocks, positions, row_counts, col_counts = [], [], [], []
        for image_id, det_idx in det_groups.items():
            gt_idx = gt_groups.get(image_id)
            if not gt_idx:
                continue  # detections with no same-image GT stay FP
            iou = kernels.pairwise_iou(
                [cat_dets[i].box.as_xywh() for i in det_idx],
                [cat_gts[j].box.as_xywh() for j in gt_idx],
            )
            blocks.append(iou.ravel())
            positions.extend(det_idx)
            row_counts.append(len(det_idx))
            col_counts.append(len(gt_idx))
        if blocks:
            iou_flat = np.concatenate(blocks)
            pos = np.asarray(positions, dtype=np.int64)
            rows = np.asarray(row_counts, dtype=np.int64)
            cols = np.asarray(col_counts, dtype=np.int64)
        aps = []
        for thr in config.ap_iou_grid:
            flags = np.zeros(len(cat_dets), dtype=bool)
            if blocks:
                tp, _ = kernels.greedy_match_groups(iou_flat, None, rows, cols, thr)
                flags[pos] = tp != 0
            aps.append(average_precision(flags, num_gt, config.interpolation_points))
        return float(np.mean(aps))

    ap_values = ordered_map(eval_category, scored_cats, threads)
    per_category = dict(zip(scored_cats, ap_values))
    return EvalReport(
        protocol="mapped",
        ap_all=_bucket_mean(per_category, scored_cats),
        ap_r=_bucket_mean(per_category, taxonomy.bucket_ids("rare")),
        ap_c=_bucket_mean(per_category, taxonomy.bucket_ids("common")),
        ap_f=_bucket_mean(per_category, taxonomy.bucket_ids("frequent")),
        ap_per_category=per_category,
        iou_grid=config.ap_iou_grid,
    )


def _densecap_score(det: Detection, config: EvalConfig) -> float:
    if config.score_policy == "objectness_times_candidate_prob":
        return det.score * math.exp(det.top_candidate.logprob)
    return det.score


def evaluate_densecap(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthAnnotation],
    config: EvalConfig | None = None,
    meteor_params: MeteorParams = DEFAULT_PARAMS,
    threads: int = 1,
) -> EvalReport:
    """Dense-caption mAP: category-free greedy matching per grid cell,
    where a GT is eligible when IoU >= t_iou and METEOR(top candidate,
    reference label) >= t_meteor; the report averages the full grid.
    """
    config = config or EvalConfig()
    for idx, gt in enumerate(gts):
        if not gt.reference_label:
            raise ValidationError(
                f"annotation record {idx} (image {gt.image_id!r}) has no reference label, "
                "which the METEOR protocol requires"
            )
    order = sorted(
        range(len(dets)),
        key=lambda i: (
            -_densecap_score(dets[i], config),
            image_sort_key(dets[i].image_id),
            dets[i].box.x,
            dets[i].box.y,
            dets[i].box.w,
            dets[i].box.h,
        ),
    )
    sorted_dets = [dets[i] for i in order]
    num_gt = len(gts)

    det_groups = _group_indices(sorted_dets, lambda d: d.image_id)
    gt_groups = _group_indices(gts, lambda g: g.image_id)
    min_iou = config.iou_grid[0]
    meteor_cache: dict[tuple[str, str], float] = {}

    blocks, score_blocks, positions, row_counts, col_counts = [], [], [], [], []
    for image_id, det_idx in det_groups.items():
        gt_idx = gt_groups.get(image_id)
        if not gt_idx:
            continue
        iou = kernels.pairwise_iou(
            [sorted_dets[i].box.as_xywh() for i in det_idx],
            [gts[j].box.as_xywh() for j in gt_idx],
        )
        scores = np.zeros(iou.shape, dtype=np.float64)
        for a, i in enumerate(det_idx):
            caption = sorted_dets[i].top_candidate.text
            for b, j in enumerate(gt_idx):
                if iou[a, b] < min_iou:
                    continue  # below every grid threshold; METEOR never consulted
                key = (caption, gts[j].reference_label)
                value = meteor_cache.get(key)
                if value is None:
                    value = meteor(key[0], key[1], meteor_params)
                    meteor_cache[key] = value
                scores[a, b] = value
        blocks.append(iou.ravel())
        score_blocks.append(scores.ravel())
        positions.extend(det_idx)
        row_counts.append(len(det_idx))
        col_counts.append(len(gt_idx))
    if blocks:
        iou_flat = np.concatenate(blocks)
        score_flat = np.concatenate(score_blocks)
        pos = np.asarray(positions, dtype=np.int64)
        rows = np.asarray(row_counts, dtype=np.int64)
        cols = np.asarray(col_counts, dtype=np.int64)

    cells = [(ti, tm) for ti in config.iou_grid for tm in config.meteor_grid]

    def eval_cell(cell: tuple[float, float]) -> float:
        t_iou, t_m = cell
        flags = np.zeros(len(sorted_dets), dtype=bool)
        if blocks:
            allowed = (score_flat >= t_m).astype(np.uint8)
            tp, _ = kernels.greedy_match_groups(iou_flat, allowed, rows, cols, t_iou)
            flags[pos] = tp != 0
        return average_precision(flags, num_gt, config.interpolation_points)

    cell_aps = ordered_map(eval_cell, cells, threads)
    grid = tuple(
        tuple(cell_aps[r * len(config.meteor_grid) + c] for c in range(len(config.meteor_grid)))
        for r in range(len(config.iou_grid))
    )
    return EvalReport(
        protocol="meteor",
        iou_grid=config.iou_grid,
        meteor_grid=config.meteor_grid,
        grid_ap=grid,
        map_densecap=float(np.mean(cell_aps)),
    )
