"""Cosine similarity and taxonomy label mapping."""

import math

import numpy as np
import pytest

from freedet.core import (
    BoundingBox,
    Category,
    Detection,
    EmbeddingTable,
    EvalConfig,
    LabelCandidate,
    Taxonomy,
)
from freedet.errors import ValidationError
from freedet.mapping import cosine_similarity, map_detections

TOL = 1e-9


class TestCosineSimilarity:
    def test_identity(self):
        assert cosine_similarity([1, 0, 0], [1, 0, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_forty_five_degrees(self):
        assert abs(cosine_similarity([1, 1], [1, 0]) - 1 / math.sqrt(2)) < TOL

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_similarity([0, 0], [1, 0])

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity([1, 0], [1, 0, 0])

    def test_clamped_against_round_off(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            v = rng.uniform(-1, 1, size=8)
            plus = cosine_similarity(v, v * 3.7)
            minus = cosine_similarity(v, v * -2.3)
            assert plus <= 1.0 and abs(plus - 1.0) < 1e-12
            assert minus >= -1.0 and abs(minus + 1.0) < 1e-12


def _setup(policy="objectness", min_similarity=0.0, on_missing="error"):
    taxonomy = Taxonomy((Category(1, "laptop", "rare"), Category(2, "dog", "common")))
    table = EmbeddingTable(
        dim=2,
        entries={
            "laptop": np.array([1.0, 0.0]),
            "dog": np.array([0.0, 1.0]),
            "notebook computer": np.array([1.0, 0.0]),
            "puppy": np.array([0.1, 0.9]),
            "ambiguous thing": np.array([1.0, 1.0]) / math.sqrt(2),
        },
    )
    config = EvalConfig(
        score_policy=policy, min_similarity=min_similarity, on_missing_embedding=on_missing
    )
    return taxonomy, table, config


def _det(texts_logprobs, score=0.8, image_id="img"):
    cands = tuple(LabelCandidate(t, lp) for t, lp in texts_logprobs)
    return Detection(
        image_id=image_id, box=BoundingBox(0, 0, 10, 10), score=score, candidates=cands
    )


class TestMapDetections:
    def test_one_hot_identity(self):
        taxonomy, table, config = _setup()
        mapped = map_detections([_det([("laptop", -0.1)])], taxonomy, table, config)
        assert len(mapped) == 1
        assert mapped[0].category_id == 1
        assert mapped[0].similarity == 1.0
        assert mapped[0].score == 0.8

    def test_tie_breaks_to_smaller_id(self):
        taxonomy, table, config = _setup()
        mapped = map_detections([_det([("ambiguous thing", -0.1)])], taxonomy, table, config)
        assert mapped[0].category_id == 1
        assert abs(mapped[0].similarity - 1 / math.sqrt(2)) < TOL

    def test_duplicate_category_collapse(self):
        taxonomy, table, config = _setup()
        det = _det([("dog", -0.1), ("puppy", -0.5)])
        mapped = map_detections([det], taxonomy, table, config)
        assert len(mapped) == 1
        assert mapped[0].category_id == 2
        assert mapped[0].similarity == 1.0
        assert mapped[0].source_candidate == "dog"

    def test_distinct_categories_produce_two_records(self):
        taxonomy, table, config = _setup()
        det = _det([("laptop", -0.1), ("dog", -0.5)])
        mapped = map_detections([det], taxonomy, table, config)
        assert sorted(m.category_id for m in mapped) == [1, 2]

    def test_score_policy_candidate_prob(self):
        taxonomy, table, config = _setup(policy="objectness_times_candidate_prob")
        det = _det([("laptop", -0.5)], score=0.8)
        mapped = map_detections([det], taxonomy, table, config)
        assert abs(mapped[0].score - 0.8 * math.exp(-0.5)) < TOL

    def test_min_similarity_drops_candidates(self):
        taxonomy, table, config = _setup(min_similarity=0.95)
        det = _det([("ambiguous thing", -0.1)])  # best similarity ~0.707
        assert map_detections([det], taxonomy, table, config) == []

    def test_missing_embedding_error(self):
        taxonomy, table, config = _setup()
        with pytest.raises(ValidationError, match="no embedding"):
            map_detections([_det([("unknown label", -0.1)])], taxonomy, table, config)

    @pytest.mark.parametrize("mode", ["skip", "zero-vector-reject"])
    def test_missing_embedding_skip_modes(self, mode):
        taxonomy, table, config = _setup(on_missing=mode)
        det = _det([("unknown label", -0.1), ("dog", -0.5)])
        mapped = map_detections([det], taxonomy, table, config)
        assert [m.category_id for m in mapped] == [2]

    def test_taxonomy_name_missing_is_setup_error(self):
        taxonomy = Taxonomy((Category(1, "laptop", "rare"), Category(2, "zebra", "common")))
        _, table, config = _setup()
        with pytest.raises(ValidationError, match="zebra"):
            map_detections([], taxonomy, table, config)

    def test_scale_invariance_of_argmax(self):
        taxonomy, table, config = _setup()
        dets = [_det([("puppy", -0.1)]), _det([("ambiguous thing", -0.2)])]
        base = [m.category_id for m in map_detections(dets, taxonomy, table, config)]
        scaled = EmbeddingTable(
            dim=2, entries={k: v * 37.5 for k, v in table.entries.items()}
        )
        rescored = [m.category_id for m in map_detections(dets, taxonomy, scaled, config)]
        assert rescored == base

    def test_output_ordering(self):
        taxonomy, table, config = _setup()
        dets = [
            _det([("dog", -0.1)], score=0.2, image_id="b"),
            _det([("dog", -0.1)], score=0.9, image_id="b"),
            _det([("laptop", -0.1)], score=0.5, image_id="a"),
        ]
        mapped = map_detections(dets, taxonomy, table, config)
        keys = [(m.image_id, -m.score) for m in mapped]
        assert keys == sorted(keys)

    def test_determinism(self):
        taxonomy, table, config = _setup()
        dets = [_det([("dog", -0.1), ("laptop", -0.2)], score=0.5) for _ in range(5)]
        a = map_detections(dets, taxonomy, table, config)
        b = map_detections(dets, taxonomy, table, config)
        assert a == b

    def test_mapped_count_equals_distinct_argmax_categories(self):
        taxonomy, table, config = _setup()
        rng = np.random.default_rng(4)
        texts = ["laptop", "dog", "puppy", "notebook computer", "ambiguous thing"]
        for _ in range(50):
            k = int(rng.integers(1, 5))
            chosen = [texts[i] for i in rng.choice(len(texts), size=k, replace=False)]
            det = _det([(t, -0.1 * (i + 1)) for i, t in enumerate(chosen)])
            mapped = map_detections([det], taxonomy, table, config)
            argmax_cats = set()
            for t in chosen:
                sims = [
                    cosine_similarity(table.vector(t), table.vector(name))
                    for name in ("laptop", "dog")
                ]
                argmax_cats.add(1 + int(np.argmax(sims)))
            assert len(mapped) == len(argmax_cats)
