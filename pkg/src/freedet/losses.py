"""Reference (non-gradient) computation of the training losses.

Reductions are fixed so fixtures are exact: the foreground BCE is
averaged over all queries, the box terms over matched pairs, and the
alignment / language-modeling losses are plain sums.  The alignment
loss covers a single decoder layer; callers sum across layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from freedet.assignment import Assignment, normalized_cxcywh
from freedet.core import BoundingBox
from freedet.errors import ValidationError
from freedet.geometry import giou

_BCE_EPS = 1e-7
_LM_EPS = 1e-12


@dataclass(frozen=True)
class AlignmentScores:
    """Region-vs-word score matrix with each region's positive word index."""

    scores: np.ndarray
    positives: tuple[int, ...]

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2 or scores.shape[0] == 0:
            raise ValidationError(f"scores must be a nonempty 2-D matrix, got {scores.shape}")
        if not np.isfinite(scores).all():
            raise ValidationError("alignment scores must be finite")
        positives = tuple(int(k) for k in self.positives)
        if len(positives) != scores.shape[0]:
            raise ValidationError(
                f"{scores.shape[0]} regions but {len(positives)} positive indices"
            )
        words = scores.shape[1]
        if any(not 0 <= k < words for k in positives):
            raise ValidationError(f"positive indices must lie in [0, {words})")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "positives", positives)


@dataclass(frozen=True)
class TokenDistributionSequence:
    """Per-step next-token distributions paired with the realized tokens."""

    steps: np.ndarray
    targets: tuple[int, ...]

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.float64)
        if steps.ndim != 2 or steps.shape[0] == 0:
            raise ValidationError(f"steps must be a nonempty 2-D matrix, got {steps.shape}")
        if (steps < 0).any():
            raise ValidationError("token probabilities must be >= 0")
        sums = steps.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValidationError("each step distribution must sum to 1 within 1e-9")
        targets = tuple(int(t) for t in self.targets)
        if len(targets) != steps.shape[0]:
            raise ValidationError(
                f"{steps.shape[0]} steps but {len(targets)} target tokens"
            )
        vocab = steps.shape[1]
        if any(not 0 <= t < vocab for t in targets):
            raise ValidationError(f"target tokens must lie in [0, {vocab})")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "targets", targets)


@dataclass(frozen=True)
class LossBreakdown:
    l_bce: float
    l_l1: float
    l_giou: float
    l_lm: float
    l_align: float
    weights: tuple[float, float, float, float, float]
    total: float


def detection_losses(
    assignment: Assignment,
    pred_boxes: Sequence[BoundingBox],
    pred_fg_probs: Sequence[float],
    gt_boxes: Sequence[BoundingBox],
    image_size: tuple[float, float],
) -> tuple[float, float, float]:
    """(bce, l1, giou) detection losses under a fixed query-to-GT assignment.

    Foreground probabilities exactly 0 or 1 are clamped to [1e-7, 1 - 1e-7]
    rather than rejected.
    """
    n = len(pred_boxes)
    if len(pred_fg_probs) != n:
        raise ValidationError(f"got {n} boxes but {len(pred_fg_probs)} probabilities")
    matched = dict(assignment.pairs)
    for qi, gj in assignment.pairs:
        if not (0 <= qi < n and 0 <= gj < len(gt_boxes)):
            raise ValidationError(f"assignment pair ({qi}, {gj}) is out of range")
    bce_sum = 0.0
    for i, p in enumerate(pred_fg_probs):
        p = min(max(float(p), _BCE_EPS), 1.0 - _BCE_EPS)
        bce_sum += -math.log(p) if i in matched else -math.log(1.0 - p)
    l_bce = bce_sum / n if n else 0.0
    l1_sum = 0.0
    giou_sum = 0.0
    for qi, gj in assignment.pairs:
        pn = normalized_cxcywh(pred_boxes[qi], image_size)
        gn = normalized_cxcywh(gt_boxes[gj], image_size)
        l1_sum += float(np.abs(pn - gn).sum())
        giou_sum += 1.0 - giou(pred_boxes[qi], gt_boxes[gj])
    count = len(assignment.pairs)
    return (l_bce, l1_sum / count if count else 0.0, giou_sum / count if count else 0.0)


def _softplus(x: float) -> float:
    # log(1 + e^x) without overflow; exact enough for the saturated tails
    if x > 30.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def align_loss(scores: AlignmentScores) -> float:
    """Region-word alignment loss: per region, BCE of the positive word
    against every other word in the batch.

    Computed in log space (softplus), which keeps the saturated tails
    exact instead of flooring them at a clamping constant.
    """
    total = 0.0
    m, w = scores.scores.shape
    for i in range(m):
        k = scores.positives[i]
        total += _softplus(-float(scores.scores[i, k]))  # -ln sigmoid(s_pos)
        for t in range(w):
            if t != k:
                total += _softplus(float(scores.scores[i, t]))  # -ln(1 - sigmoid(s_t))
    return total


def lm_loss(sequences: Sequence[TokenDistributionSequence]) -> float:
    """Sum of per-token negative log likelihoods, no length normalization."""
    total = 0.0
    for seq in sequences:
        for step, target in zip(seq.steps, seq.targets):
            total += -math.log(max(float(step[target]), _LM_EPS))
    return total


def total_loss(
    components: Sequence[float],
    weights: Sequence[float] = (1.0, 1.0, 1.0, 1.0, 1.0),
) -> LossBreakdown:
    """Weighted sum of (bce, l1, giou, lm, align); unit weights by default."""
    comps = [float(c) for c in components]
    wts = [float(w) for w in weights]
    if len(comps) != 5 or len(wts) != 5:
        raise ValidationError("expected 5 loss components and 5 weights")
    if any(not math.isfinite(c) for c in comps) or any(not math.isfinite(w) for w in wts):
        raise ValidationError("loss components and weights must be finite")
    if any(w < 0 for w in wts):
        raise ValidationError(f"loss weights must be >= 0, got {wts}")
    total = sum(w * c for w, c in zip(wts, comps))
    return LossBreakdown(
        l_bce=comps[0],
        l_l1=comps[1],
        l_giou=comps[2],
        l_lm=comps[3],
        l_align=comps[4],
        weights=tuple(wts),
        total=total,
    )
