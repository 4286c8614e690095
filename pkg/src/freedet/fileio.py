"""Loading and writing of the four external file formats.

Formats:
  taxonomy      one JSON document {"categories": [{"id", "name", "frequency"}]}
  ground truth  one JSON document {"images": [...], "annotations": [...]}
  detections    JSON lines, one detection per line
  embeddings    JSON lines, one {"text", "vector"} per line

Loading is deterministic: identical bytes produce identical structures.
"""

from __future__ import annotations

import json
from typing import Iterable

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
    frequency_from_code,
    frequency_to_code,
    normalize_text,
)
from freedet.errors import ParseError, ReferentialIntegrityError, ValidationError


def _load_json_document(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc


def _iter_jsonl(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=lineno) from exc


def _box_from_list(raw, context: str) -> BoundingBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ValidationError(f"{context}: bbox must be a list of 4 numbers, got {raw!r}")
    try:
        return BoundingBox(*[float(v) for v in raw])
    except (TypeError, ValueError, ValidationError) as exc:
        raise ValidationError(f"{context}: {exc}") from exc


def load_taxonomy(path: str) -> Taxonomy:
    doc = _load_json_document(path)
    if not isinstance(doc, dict) or "categories" not in doc:
        raise ParseError("taxonomy document must contain a 'categories' array", path=path)
    cats = []
    for idx, raw in enumerate(doc["categories"]):
        context = f"category record {idx}"
        try:
            cats.append(
                Category(
                    id=raw["id"],
                    name=raw["name"],
                    frequency=frequency_from_code(raw["frequency"]),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"{context} in {path}: missing field {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"{context} in {path}: {exc}") from exc
    try:
        return Taxonomy(tuple(cats))
    except ValidationError as exc:
        raise ValidationError(f"taxonomy {path}: {exc}") from exc


def load_ground_truth(path: str) -> tuple[list[ImageInfo], list[GroundTruthAnnotation]]:
    doc = _load_json_document(path)
    if not isinstance(doc, dict) or "annotations" not in doc:
        raise ParseError("ground truth document must contain an 'annotations' array", path=path)
    images = []
    seen_image_ids = set()
    for idx, raw in enumerate(doc.get("images", [])):
        context = f"image record {idx} in {path}"
        try:
            info = ImageInfo(id=raw["id"], width=raw["width"], height=raw["height"])
        except KeyError as exc:
            raise ValidationError(f"{context}: missing field {exc}") from exc
        if info.id in seen_image_ids:
            raise ValidationError(f"{context}: duplicate image id {info.id!r}")
        seen_image_ids.add(info.id)
        images.append(info)
    annotations = []
    for idx, raw in enumerate(doc["annotations"]):
        context = f"annotation record {idx} in {path}"
        try:
            box = _box_from_list(raw["bbox"], context)
            label = raw.get("label")
            annotations.append(
                GroundTruthAnnotation(
                    image_id=raw["image_id"],
                    box=box,
                    category_id=raw["category_id"],
                    reference_label=None if label is None else str(label),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"{context}: missing field {exc}") from exc
    return images, annotations


def load_dataset(
    taxonomy_path: str, ground_truth_path: str
) -> tuple[Taxonomy, list[GroundTruthAnnotation]]:
    """Load and cross-validate a taxonomy plus its ground-truth annotations."""
    taxonomy = load_taxonomy(taxonomy_path)
    _, annotations = load_ground_truth(ground_truth_path)
    for idx, ann in enumerate(annotations):
        if ann.category_id not in taxonomy.by_id:
            raise ReferentialIntegrityError(
                f"annotation record {idx} in {ground_truth_path} references "
                f"category_id {ann.category_id} absent from the taxonomy"
            )
    return taxonomy, annotations


def load_detections(path: str) -> list[Detection]:
    """Load a JSONL detections file.

    Candidate texts are normalized and re-sorted by logprob descending;
    a missing `source` defaults to 'supplemental'.
    """
    detections = []
    for lineno, raw in _iter_jsonl(path):
        context = f"detection record at {path}:{lineno}"
        try:
            box = _box_from_list(raw["bbox"], context)
            raw_cands = raw["candidates"]
            if not isinstance(raw_cands, list) or not raw_cands:
                raise ValidationError(f"{context}: empty candidate list")
            cands = []
            for c in raw_cands:
                text = normalize_text(str(c["text"]))
                if not text:
                    raise ValidationError(
                        f"{context}: candidate {c['text']!r} normalizes to empty"
                    )
                cands.append(LabelCandidate(text=text, logprob=float(c["logprob"])))
            cands.sort(key=lambda c: -c.logprob)
            det = Detection(
                image_id=raw["image_id"],
                box=box,
                score=float(raw["score"]),
                candidates=tuple(cands),
                source=raw.get("source", "supplemental"),
            )
        except KeyError as exc:
            raise ValidationError(f"{context}: missing field {exc}") from exc
        except ValidationError as exc:
            msg = str(exc)
            raise ValidationError(msg if context in msg else f"{context}: {exc}") from exc
        detections.append(det)
    return detections


def load_embeddings(path: str) -> EmbeddingTable:
    """Load a JSONL embedding table; texts share the label normalization."""
    entries: dict[str, np.ndarray] = {}
    dim: int | None = None
    for lineno, raw in _iter_jsonl(path):
        context = f"embedding record at {path}:{lineno}"
        try:
            text = normalize_text(str(raw["text"]))
            vector = np.asarray(raw["vector"], dtype=np.float64)
        except KeyError as exc:
            raise ValidationError(f"{context}: missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{context}: bad vector: {exc}") from exc
        if vector.ndim != 1 or vector.size == 0:
            raise ValidationError(f"{context}: vector must be a nonempty flat list")
        if dim is None:
            dim = int(vector.size)
        elif vector.size != dim:
            raise ValidationError(
                f"{context}: dimension mismatch, expected {dim}, got {vector.size}"
            )
        if not text:
            raise ValidationError(f"{context}: text normalizes to empty")
        if text in entries:
            raise ValidationError(f"{context}: duplicate normalized text {text!r}")
        if float(np.linalg.norm(vector)) == 0.0:
            raise ValidationError(f"{context}: zero-norm vector for {text!r}")
        entries[text] = vector
    if dim is None:
        raise ValidationError(f"embedding file {path} is empty")
    return EmbeddingTable(dim=dim, entries=entries)


def write_taxonomy(taxonomy: Taxonomy, path: str) -> None:
    doc = {
        "categories": [
            {"id": c.id, "name": c.name, "frequency": frequency_to_code(c.frequency)}
            for c in taxonomy.categories
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def write_ground_truth(
    images: Iterable[ImageInfo], annotations: Iterable[GroundTruthAnnotation], path: str
) -> None:
    doc = {
        "images": [{"id": im.id, "width": im.width, "height": im.height} for im in images],
        "annotations": [
            {
                "image_id": a.image_id,
                "bbox": list(a.box.as_xywh()),
                "category_id": a.category_id,
                **({} if a.reference_label is None else {"label": a.reference_label}),
            }
            for a in annotations
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def detection_to_record(det: Detection) -> dict:
    return {
        "image_id": det.image_id,
        "bbox": list(det.box.as_xywh()),
        "score": det.score,
        "candidates": [{"text": c.text, "logprob": c.logprob} for c in det.candidates],
        "source": det.source,
    }


def write_detections(detections: Iterable[Detection], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for det in detections:
            fh.write(json.dumps(detection_to_record(det), separators=(",", ":")))
            fh.write("\n")


def write_embeddings(table: EmbeddingTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for text, vec in table.entries.items():
            rec = {"text": text, "vector": [float(v) for v in vec]}
            fh.write(json.dumps(rec, separators=(",", ":")))
            fh.write("\n")
