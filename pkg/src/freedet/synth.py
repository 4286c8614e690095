"""Synthetic fixture generator for end-to-end tests and benchmarks.

Emits a taxonomy with all three frequency buckets, a clustered embedding
table (synonyms at cosine >= 0.9 to their category, exactly 0 across
categories), exhaustive ground truth, and detection files derived from
the ground truth under controlled box jitter and label noise.

At jitter 0 / noise 0 the detections are exact copies of the ground
truth with synonym labels, so both evaluation protocols score 1.0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from freedet.core import (
    BoundingBox,
    Category,
    Detection,
    EmbeddingTable,
    GroundTruthAnnotation,
    ImageInfo,
    LabelCandidate,
    Taxonomy,
)
from freedet.errors import ValidationError
from freedet.fileio import (
    write_detections,
    write_embeddings,
    write_ground_truth,
    write_taxonomy,
)

_ADJECTIVES = (
    "amber", "blue", "coral", "dusty", "ebony", "faded", "green", "hazel",
    "ivory", "jade", "khaki", "lilac", "mauve", "navy", "olive", "pale",
)
_NOUNS = (
    "crate", "lamp", "bench", "kettle", "ladder", "mirror", "basket", "stool",
    "easel", "hinge", "pallet", "funnel", "gasket", "spool", "tripod", "visor",
)

IMAGE_SIZE = 1000
_WITHIN_COSINE = 0.9
_CROSS_COSINE = 0.1
_MAX_ANGLE = 0.4  # rad; cos(0.4) ~ 0.921 keeps every synonym inside the cluster


@dataclass(frozen=True)
class SynthFixture:
    taxonomy: Taxonomy
    images: tuple[ImageInfo, ...]
    annotations: tuple[GroundTruthAnnotation, ...]
    detections: tuple[Detection, ...]
    embeddings: EmbeddingTable
    synonyms: dict[int, tuple[str, ...]]  # category id -> synonym texts


def _category_name(index: int) -> str:
    adj = _ADJECTIVES[index % len(_ADJECTIVES)]
    noun = _NOUNS[index % len(_NOUNS)]
    return f"{adj} {noun}{index}"


def _build_embeddings(
    taxonomy: Taxonomy, synonyms: dict[int, tuple[str, ...]]
) -> EmbeddingTable:
    """Two private axes per category: the name on the first, synonyms rotated
    toward the second.  Cross-category cosine is exactly zero."""
    cats = sorted(taxonomy.categories, key=lambda c: c.id)
    dim = 2 * len(cats)
    entries: dict[str, np.ndarray] = {}
    for pos, cat in enumerate(cats):
        base = np.zeros(dim)
        base[2 * pos] = 1.0
        entries[cat.name] = base
        syns = synonyms[cat.id]
        for j, text in enumerate(syns, start=1):
            angle = _MAX_ANGLE * j / len(syns)
            vec = np.zeros(dim)
            vec[2 * pos] = np.cos(angle)
            vec[2 * pos + 1] = np.sin(angle)
            entries[text] = vec
            if float(vec @ base) < _WITHIN_COSINE:
                raise AssertionError("synonym drifted outside its category cluster")
    # cross-category separation is structural: disjoint axis pairs
    for pos, cat in enumerate(cats):
        for other in cats[pos + 1 :]:
            if abs(float(entries[cat.name] @ entries[other.name])) > _CROSS_COSINE:
                raise AssertionError("category embeddings are not separated")
    return EmbeddingTable(dim=dim, entries=entries)


def generate(
    scene_count: int,
    categories_per_bucket: int = 5,
    synonyms_per_category: int = 2,
    box_jitter: float = 0.0,
    label_noise: float = 0.0,
    seed: int = 0,
    boxes_per_scene: int = 10,
) -> SynthFixture:
    """Build a deterministic fixture set; the seed fixes all randomness.

    box_jitter shifts and rescales detection boxes by up to that fraction
    of their extent; label_noise is the probability that a detection's
    candidates are drawn from a category absent from its scene.
    """
    if scene_count < 1 or categories_per_bucket < 1 or boxes_per_scene < 1:
        raise ValidationError("scene_count, categories_per_bucket and boxes_per_scene "
                              "must be positive")
    if synonyms_per_category < 0:
        raise ValidationError("synonyms_per_category must be >= 0")
    if not 0.0 <= box_jitter <= 1.0 or not 0.0 <= label_noise <= 1.0:
        raise ValidationError("box_jitter and label_noise must be in [0, 1]")

    rng = np.random.default_rng(seed)
    categories = []
    synonyms: dict[int, tuple[str, ...]] = {}
    for i in range(3 * categories_per_bucket):
        cid = i + 1
        name = _category_name(i)
        frequency = ("rare", "common", "frequent")[i // categories_per_bucket]
        categories.append(Category(id=cid, name=name, frequency=frequency))
        syns = tuple(f"{name} kind{j}" for j in range(1, synonyms_per_category + 1))
        synonyms[cid] = syns
    taxonomy = Taxonomy(tuple(categories))
    table = _build_embeddings(taxonomy, synonyms)

    cat_ids = [c.id for c in categories]
    images = []
    annotations = []
    detections = []
    slot = 0
    for scene in range(scene_count):
        images.append(ImageInfo(id=scene, width=IMAGE_SIZE, height=IMAGE_SIZE))
        scene_cats = []
        for _ in range(boxes_per_scene):
            scene_cats.append(cat_ids[slot % len(cat_ids)])
            slot += 1
        present = set(scene_cats)
        absent = [cid for cid in cat_ids if cid not in present]
        for cid in scene_cats:
            x = float(rng.integers(0, IMAGE_SIZE - 130))
            y = float(rng.integers(0, IMAGE_SIZE - 130))
            w = float(rng.integers(40, 120))
            h = float(rng.integers(40, 120))
            box = BoundingBox(x, y, w, h)
            name = taxonomy.by_id[cid].name
            annotations.append(
                GroundTruthAnnotation(
                    image_id=scene, box=box, category_id=cid, reference_label=name
                )
            )
            if box_jitter > 0:
                dx, dy, dw, dh = rng.uniform(-box_jitter, box_jitter, size=4)
                jittered = BoundingBox(
                    x + dx * w,
                    y + dy * h,
                    max(w * (1.0 + dw), 1.0),
                    max(h * (1.0 + dh), 1.0),
                )
            else:
                jittered = box
            noisy = bool(rng.random() < label_noise) if label_noise > 0 else False
            if noisy:
                pool = absent if absent else [c for c in cat_ids if c != cid]
                label_cat = int(pool[rng.integers(0, len(pool))])
            else:
                label_cat = cid
            label_name = taxonomy.by_id[label_cat].name
            label_syns = synonyms[label_cat]
            if label_syns:
                top = label_syns[int(rng.integers(0, len(label_syns)))]
                cands = (
                    LabelCandidate(text=top, logprob=-0.1),
                    LabelCandidate(text=label_name, logprob=-0.7),
                )
            else:
                cands = (LabelCandidate(text=label_name, logprob=-0.1),)
            detections.append(
                Detection(
                    image_id=scene,
                    box=jittered,
                    score=float(np.round(rng.uniform(0.5, 1.0), 6)),
                    candidates=cands,
                    source="supplemental",
                )
            )
    return SynthFixture(
        taxonomy=taxonomy,
        images=tuple(images),
        annotations=tuple(annotations),
        detections=tuple(detections),
        embeddings=table,
        synonyms=synonyms,
    )


def write_fixture(fixture: SynthFixture, out_dir: str) -> dict[str, str]:
    """Write the four fixture files; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "taxonomy": os.path.join(out_dir, "taxonomy.json"),
        "ground_truth": os.path.join(out_dir, "ground_truth.json"),
        "detections": os.path.join(out_dir, "detections.jsonl"),
        "embeddings": os.path.join(out_dir, "embeddings.jsonl"),
    }
    write_taxonomy(fixture.taxonomy, paths["taxonomy"])
    write_ground_truth(fixture.images, fixture.annotations, paths["ground_truth"])
    write_detections(fixture.detections, paths["detections"])
    write_embeddings(fixture.embeddings, paths["embeddings"])
    return paths
