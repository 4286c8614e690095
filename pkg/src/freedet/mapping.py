"""Map free-form generated labels onto a fixed taxonomy by cosine similarity.

Every beam candidate is assigned its argmax-similarity category; per
detection, duplicate categories collapse to the highest-similarity
candidate.  The embedding table is consumed as data; no encoder runs here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from freedet.core import (
    BoundingBox,
    Detection,
    EmbeddingTable,
    EvalConfig,
    ImageId,
    Taxonomy,
    image_sort_key,
    normalize_text,
)
from freedet.errors import ValidationError


@dataclass(frozen=True)
class MappedDetection:
    """A detection projected onto one taxonomy category."""

    image_id: ImageId
    box: BoundingBox
    category_id: int
    score: float
    similarity: float
    source_candidate: str


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vectors must share one dimension, got {a.shape} and {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def _category_matrix(taxonomy: Taxonomy, table: EmbeddingTable) -> tuple[list[int], np.ndarray]:
    """Unit-norm embedding rows for every category, ordered by ascending id."""
    ids = sorted(taxonomy.by_id)
    rows = []
    for cid in ids:
        name = normalize_text(taxonomy.by_id[cid].name)
        if name not in table:
            raise ValidationError(
                f"taxonomy category {cid} ({name!r}) has no embedding in the table"
            )
        vec = table.vector(name)
        rows.append(vec / np.linalg.norm(vec))
    return ids, np.vstack(rows)


def map_detections(
    dets: Sequence[Detection],
    taxonomy: Taxonomy,
    table: EmbeddingTable,
    config: EvalConfig | None = None,
) -> list[MappedDetection]:
    """Project detections onto the taxonomy (evaluation protocol with a
    fixed category set).

    Per candidate: argmax cosine category, ties to the smaller id.  Per
    detection: duplicate categories keep the highest-similarity candidate.
    Candidates below config.min_similarity are dropped; missing candidate
    embeddings follow config.on_missing_embedding (error, skip, or
    zero-vector-reject, the last two both discarding the candidate).
    Output is ordered by (image id, score descending).
    """
    config = config or EvalConfig()
    cat_ids, cat_matrix = _category_matrix(taxonomy, table)

    texts = sorted({c.text for det in dets for c in det.candidates})
    sim_rows: dict[str, np.ndarray | None] = {}
    for text in texts:
        if text not in table:
            if config.on_missing_embedding == "error":
                raise ValidationError(f"candidate text {text!r} has no embedding in the table")
            sim_rows[text] = None  # skip / zero-vector-reject: candidate is discarded
            continue
        vec = table.vector(text)
        sims = cat_matrix @ (vec / np.linalg.norm(vec))
        sim_rows[text] = np.clip(sims, -1.0, 1.0)

    mapped: list[MappedDetection] = []
    for det in dets:
        best_per_category: dict[int, tuple[float, str, float]] = {}
        for cand in det.candidates:
            sims = sim_rows[cand.text]
            if sims is None:
                continue
            idx = int(np.argmax(sims))  # first max = smallest category id
            similarity = float(sims[idx])
            if similarity < config.min_similarity:
                continue
            cid = cat_ids[idx]
            if config.score_policy == "objectness_times_candidate_prob":
                score = det.score * math.exp(cand.logprob)
            else:
                score = det.score
            prev = best_per_category.get(cid)
            if prev is None or similarity > prev[0]:
                best_per_category[cid] = (similarity, cand.text, score)
        for cid in sorted(best_per_category):
            similarity, text, score = best_per_category[cid]
            mapped.append(
                MappedDetection(
                    image_id=det.image_id,
                    box=det.box,
                    category_id=cid,
                    score=score,
                    similarity=similarity,
                    source_candidate=text,
                )
            )
    mapped.sort(
        key=lambda m: (
            image_sort_key(m.image_id),
            -m.score,
            m.category_id,
            -m.similarity,
            m.box.x,
            m.box.y,
        )
    )
    return mapped


def mapped_detection_to_record(m: MappedDetection) -> dict:
    return {
        "image_id": m.image_id,
        "bbox": list(m.box.as_xywh()),
        "category_id": m.category_id,
        "score": m.score,
        "similarity": m.similarity,
        "candidate": m.source_candidate,
    }
