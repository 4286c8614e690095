"""Closed-form loss fixtures and sign/invariance properties."""

import math

import numpy as np
import pytest

from freedet.assignment import Assignment
from freedet.core import BoundingBox
from freedet.errors import ValidationError
from freedet.losses import (
    AlignmentScores,
    TokenDistributionSequence,
    align_loss,
    detection_losses,
    lm_loss,
    total_loss,
)

TOL = 1e-9


class TestDetectionLosses:
    def test_single_perfect_match(self):
        box = BoundingBox(0, 0, 10, 10)
        assignment = Assignment(pairs=((0, 0),), total_cost=0.0)
        l_bce, l_l1, l_giou = detection_losses(assignment, [box], [0.5], [box], (100, 100))
        assert abs(l_bce - (-math.log(0.5))) < TOL
        assert l_l1 == 0.0
        assert l_giou == 0.0

    def test_matched_and_unmatched_bce(self):
        box = BoundingBox(0, 0, 10, 10)
        assignment = Assignment(pairs=((0, 0),), total_cost=0.0)
        l_bce, _, _ = detection_losses(assignment, [box, box], [0.5, 0.5], [box], (100, 100))
        assert abs(l_bce - (-math.log(0.5))) < TOL

    def test_identical_boxes_zero_geometry_terms(self):
        box = BoundingBox(3, 4, 5, 6)
        assignment = Assignment(pairs=((0, 0),), total_cost=0.0)
        for p in (0.1, 0.9):
            _, l_l1, l_giou = detection_losses(assignment, [box], [p], [box], (50, 50))
            assert l_l1 == 0.0 and l_giou == 0.0

    def test_extreme_probs_clamped_not_rejected(self):
        box = BoundingBox(0, 0, 1, 1)
        assignment = Assignment(pairs=((0, 0),), total_cost=0.0)
        l_bce, _, _ = detection_losses(assignment, [box], [1.0], [box], (10, 10))
        assert 0.0 < l_bce < 1e-6  # -ln(1 - 1e-7)

    def test_translation_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            preds = [BoundingBox(*rng.uniform(1, 20, 2), *rng.uniform(1, 10, 2)) for _ in range(3)]
            gts = [BoundingBox(*rng.uniform(1, 20, 2), *rng.uniform(1, 10, 2)) for _ in range(2)]
            assignment = Assignment(pairs=((0, 0), (1, 1)), total_cost=0.0)
            probs = rng.uniform(0.2, 0.8, 3).tolist()
            base = detection_losses(assignment, preds, probs, gts, (100, 100))
            dx, dy = rng.uniform(-5, 5, 2)
            preds2 = [BoundingBox(b.x + dx, b.y + dy, b.w, b.h) for b in preds]
            gts2 = [BoundingBox(b.x + dx, b.y + dy, b.w, b.h) for b in gts]
            moved = detection_losses(assignment, preds2, probs, gts2, (100, 100))
            assert abs(base[1] - moved[1]) < 1e-9
            assert abs(base[2] - moved[2]) < 1e-9


class TestAlignLoss:
    def test_single_zero_score(self):
        loss = align_loss(AlignmentScores(scores=[[0.0]], positives=(0,)))
        assert abs(loss - math.log(2)) < TOL

    def test_one_positive_one_negative(self):
        loss = align_loss(AlignmentScores(scores=[[0.0, 0.0]], positives=(0,)))
        assert abs(loss - 2 * math.log(2)) < TOL

    def test_saturated_positive_is_tiny(self):
        loss = align_loss(AlignmentScores(scores=[[30.0]], positives=(0,)))
        assert loss <= 1e-9

    def test_monotone_in_scores(self):
        # decreasing in the positive score, increasing in any negative score
        rng = np.random.default_rng(9)
        for _ in range(50):
            scores = rng.uniform(-3, 3, size=(2, 4))
            positives = (int(rng.integers(0, 4)), int(rng.integers(0, 4)))
            base = align_loss(AlignmentScores(scores=scores, positives=positives))
            bumped = scores.copy()
            bumped[0, positives[0]] += 0.01
            assert align_loss(AlignmentScores(bumped, positives)) < base
            neg_cols = [t for t in range(4) if t != positives[1]]
            bumped2 = scores.copy()
            bumped2[1, neg_cols[0]] += 0.01
            assert align_loss(AlignmentScores(bumped2, positives)) > base

    def test_positive_index_validated(self):
        with pytest.raises(ValidationError):
            AlignmentScores(scores=[[0.0]], positives=(1,))


class TestLmLoss:
    def test_certainty_is_zero(self):
        seq = TokenDistributionSequence(steps=[[1.0, 0.0], [0.0, 1.0]], targets=(0, 1))
        assert lm_loss([seq]) == 0.0

    def test_uniform_two_steps(self):
        steps = [[0.25] * 4, [0.25] * 4]
        seq = TokenDistributionSequence(steps=steps, targets=(1, 3))
        assert abs(lm_loss([seq]) - 2 * math.log(4)) < TOL

    def test_additive_over_sequences(self):
        a = TokenDistributionSequence(steps=[[0.5, 0.5]], targets=(0,))
        b = TokenDistributionSequence(steps=[[0.25, 0.75]], targets=(1,))
        assert abs(lm_loss([a, b]) - (lm_loss([a]) + lm_loss([b]))) < TOL

    def test_nonnegative_with_equality_iff_certain(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            v = int(rng.integers(2, 6))
            steps = rng.dirichlet(np.ones(v), size=3)
            targets = tuple(int(t) for t in rng.integers(0, v, size=3))
            loss = lm_loss([TokenDistributionSequence(steps=steps, targets=targets)])
            assert loss >= 0.0
            certain = all(abs(steps[i][t] - 1.0) < 1e-12 for i, t in enumerate(targets))
            assert (loss == 0.0) == certain

    def test_zero_probability_clamped(self):
        seq = TokenDistributionSequence(steps=[[1.0, 0.0]], targets=(1,))
        assert lm_loss([seq]) == -math.log(1e-12)

    def test_distribution_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            TokenDistributionSequence(steps=[[0.5, 0.4]], targets=(0,))


class TestTotalLoss:
    def test_zero(self):
        assert total_loss((0, 0, 0, 0, 0)).total == 0.0

    def test_plain_sum(self):
        breakdown = total_loss((1, 2, 3, 4, 5))
        assert breakdown.total == 15.0

    def test_selective_weighting(self):
        assert total_loss((1, 1, 1, 1, 1), (2, 0, 0, 0, 0)).total == 2.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError, match="weights"):
            total_loss((1, 1, 1, 1, 1), (1, 1, 1, 1, -1))

    def test_unit_weights_exact_sum(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            comps = rng.uniform(0, 5, 5)
            assert total_loss(comps.tolist()).total == float(sum(comps.tolist()))
