"""Query-to-GT bipartite matching: cost matrix plus optimal assignment.

solve_assignment delegates the core linear sum assignment to scipy and
then refines ties so the returned pair list is the lexicographically
smallest among all optimal solutions.  brute_force_assignment is the
independent enumeration oracle with the identical contract.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from freedet.core import BoundingBox
from freedet.errors import InfeasibleError, ValidationError
from freedet.geometry import giou

DEFAULT_WEIGHTS = (1.0, 5.0, 2.0)

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class CostMatrix:
    """(queries x GT) matching costs with the weights that built them."""

    values: np.ndarray
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"cost matrix must be 2-D, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValidationError("cost matrix entries must all be finite")
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Assignment:
    """Selected (query, gt) pairs, sorted by query index, plus their cost sum."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def normalized_cxcywh(box: BoundingBox, image_size: tuple[float, float]) -> np.ndarray:
    """Box as (cx, cy, w, h) divided by image width/height."""
    width, height = image_size
    return np.array(
        [
            (box.x + box.w / 2.0) / width,
            (box.y + box.h / 2.0) / height,
            box.w / width,
            box.h / height,
        ],
        dtype=np.float64,
    )


def build_cost_matrix(
    pred_boxes: Sequence[BoundingBox],
    pred_fg_probs: Sequence[float],
    gt_boxes: Sequence[BoundingBox],
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
    image_size: tuple[float, float] = (1.0, 1.0),
) -> CostMatrix:
    """Matching cost entry(i, j) = w_cls * -ln(p_i) + w_l1 * L1 + w_giou * (1 - gIoU).

    The L1 term uses (cx, cy, w, h) coordinates normalized by image size,
    so the default weights stay meaningful across resolutions.
    """
    if len(pred_boxes) != len(pred_fg_probs):
        raise ValidationError(
            f"got {len(pred_boxes)} boxes but {len(pred_fg_probs)} foreground probs"
        )
    width, height = image_size
    if width <= 0 or height <= 0:
        raise ValidationError(f"image size must be positive, got {image_size}")
    w_cls, w_l1, w_giou = (float(w) for w in weights)
    if min(w_cls, w_l1, w_giou) < 0:
        raise ValidationError(f"cost weights must be >= 0, got {weights}")
    probs = [float(p) for p in pred_fg_probs]
    for p in probs:
        if not 0.0 < p < 1.0:
            raise ValueError(f"foreground probability must lie in (0, 1), got {p}")
    pred_norm = [normalized_cxcywh(b, image_size) for b in pred_boxes]
    gt_norm = [normalized_cxcywh(b, image_size) for b in gt_boxes]
    values = np.zeros((len(pred_boxes), len(gt_boxes)), dtype=np.float64)
    for i, (pb, pn, p) in enumerate(zip(pred_boxes, pred_norm, probs)):
        cls_cost = w_cls * -math.log(p)
        for j, (gb, gn) in enumerate(zip(gt_boxes, gt_norm)):
            l1 = float(np.abs(pn - gn).sum())
            values[i, j] = cls_cost + w_l1 * l1 + w_giou * (1.0 - giou(pb, gb))
    return CostMatrix(values=values, weights=(w_cls, w_l1, w_giou))


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _TIE_TOL * max(1.0, abs(a), abs(b))


def _lsap_total(values: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> float:
    if not cols:
        return 0.0
    sub = values[np.ix_(rows, cols)]
    r, c = linear_sum_assignment(sub)
    return float(sub[r, c].sum())


def solve_assignment(costs: CostMatrix) -> Assignment:
    """Globally optimal assignment of every GT column to a distinct query row.

    Among all optimal solutions the lexicographically smallest pair list
    is returned; the refinement costs O(rows * cols) extra LSAP solves,
    which is negligible at the matrix sizes this toolkit handles.
    """
    values = costs.values
    n, m = values.shape
    if m > n:
        raise InfeasibleError(f"{m} ground-truth columns but only {n} query rows")
    if m == 0:
        return Assignment(pairs=(), total_cost=0.0)
    rows, cols = linear_sum_assignment(values)
    best_total = float(values[rows, cols].sum())

    pairs: list[tuple[int, int]] = []
    fixed_cost = 0.0
    avail = list(range(m))
    for i in range(n):
        if not avail:
            break
        rest_rows = range(i + 1, n)
        chosen = None
        for j in avail:
            remaining = [c for c in avail if c != j]
            if len(remaining) > n - i - 1:
                continue  # fixing (i, j) leaves more columns than rows
            total = fixed_cost + float(values[i, j]) + _lsap_total(values, rest_rows, remaining)
            if _close(total, best_total):
                chosen = j
                break
        if chosen is None:
            continue  # row i stays unmatched in the lex-smallest optimum
        pairs.append((i, chosen))
        fixed_cost += float(values[i, chosen])
        avail.remove(chosen)
    total_cost = float(sum(values[i, j] for i, j in pairs))
    return Assignment(pairs=tuple(pairs), total_cost=total_cost)


def brute_force_assignment(costs: CostMatrix) -> Assignment:
    """Exhaustive-permutation oracle; identical contract to solve_assignment."""
    values = costs.values
    n, m = values.shape
    if m > 8:
        raise ValidationError(f"brute force is limited to 8 ground-truth columns, got {m}")
    if m > n:
        raise InfeasibleError(f"{m} ground-truth columns but only {n} query rows")
    if m == 0:
        return Assignment(pairs=(), total_cost=0.0)
    best_total = math.inf
    best_pairs: tuple[tuple[int, int], ...] | None = None
    for perm in itertools.permutations(range(n), m):
        total = float(sum(values[perm[j], j] for j in range(m)))
        if total < best_total - _TIE_TOL:
            candidate = tuple(sorted((perm[j], j) for j in range(m)))
            best_total, best_pairs = total, candidate
        elif _close(total, best_total):
            candidate = tuple(sorted((perm[j], j) for j in range(m)))
            if best_pairs is None or candidate < best_pairs:
                best_pairs = candidate
                best_total = min(best_total, total)
    assert best_pairs is not None
    total_cost = float(sum(values[i, j] for i, j in best_pairs))
    return Assignment(pairs=best_pairs, total_cost=total_cost)
