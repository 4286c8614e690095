"""Shared domain types: boxes, detections, taxonomies, embeddings, config.

All structures are immutable after construction and safe to share
read-only across worker threads.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from freedet.errors import ValidationError

ImageId = Union[int, str]

FREQUENCIES = ("rare", "common", "frequent")
_FREQ_ALIASES = {"r": "rare", "c": "common", "f": "frequent"}

SOURCES = ("initial", "supplemental")

_WS_RE = re.compile(r"\s+")
_TRAILING_PUNCT = string.punctuation + string.whitespace


def normalize_text(text: str) -> str:
    """Canonical label form: lowercase, collapsed whitespace, no trailing punctuation.

    Idempotent; used identically for detection candidates, embedding keys,
    and taxonomy names so lookups agree.
    """
    out = _WS_RE.sub(" ", text.lower()).strip()
    return out.rstrip(_TRAILING_PUNCT)


def frequency_from_code(code: str) -> str:
    """Expand the one-letter file codes r/c/f; full names pass through."""
    if code in _FREQ_ALIASES:
        return _FREQ_ALIASES[code]
    if code in FREQUENCIES:
        return code
    raise ValidationError(f"unknown frequency code {code!r} (expected r, c, or f)")


def frequency_to_code(frequency: str) -> str:
    return frequency[0]


def _require_finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{what} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in absolute pixels, stored as (x, y, w, h)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, _require_finite(getattr(self, name), f"box {name}"))
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(
                f"box width/height must be positive, got w={self.w}, h={self.h}"
            )

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_xywh(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    frequency: str

    def __post_init__(self):
        if not isinstance(self.id, int) or isinstance(self.id, bool) or self.id <= 0:
            raise ValidationError(f"category id must be a positive integer, got {self.id!r}")
        if not self.name:
            raise ValidationError(f"category {self.id} has an empty name")
        if self.frequency not in FREQUENCIES:
            raise ValidationError(
                f"category {self.id} frequency must be one of {FREQUENCIES}, "
                f"got {self.frequency!r}"
            )


@dataclass(frozen=True)
class Taxonomy:
    """Fixed category set used only at evaluation time."""

    categories: tuple[Category, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        seen_ids: set[int] = set()
        seen_names: set[str] = set()
        for cat in self.categories:
            if cat.id in seen_ids:
                raise ValidationError(f"duplicate category id {cat.id}")
            norm = normalize_text(cat.name)
            if not norm:
                raise ValidationError(f"category {cat.id} name normalizes to empty")
            if norm in seen_names:
                raise ValidationError(
                    f"duplicate normalized category name {norm!r} (id {cat.id})"
                )
            seen_ids.add(cat.id)
            seen_names.add(norm)

    def __len__(self) -> int:
        return len(self.categories)

    @cached_property
    def by_id(self) -> dict[int, Category]:
        return {cat.id: cat for cat in self.categories}

    @cached_property
    def ids_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.by_id))

    def bucket_ids(self, frequency: str) -> tuple[int, ...]:
        """Category ids belonging to one frequency bucket, ascending."""
        return tuple(c.id for c in sorted(self.categories, key=lambda c: c.id)
                     if c.frequency == frequency)


@dataclass(frozen=True)
class ImageInfo:
    id: ImageId
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"image {self.id!r} must have positive width/height, "
                f"got {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class GroundTruthAnnotation:
    image_id: ImageId
    box: BoundingBox
    category_id: int
    reference_label: str | None = None


@dataclass(frozen=True)
class LabelCandidate:
    """One beam output: normalized label text plus its sequence log-probability."""

    text: str
    logprob: float

    def __post_init__(self):
        object.__setattr__(self, "logprob", _require_finite(self.logprob, "candidate logprob"))
        if self.logprob > 0:
            raise ValidationError(
                f"candidate logprob must be <= 0, got {self.logprob} for {self.text!r}"
            )
        if not self.text:
            raise ValidationError("candidate text is empty after normalization")


@dataclass(frozen=True)
class Detection:
    """One predicted box with foreground score and >=1 label candidates.

    Candidates are kept sorted by logprob descending; `source` records
    pseudo-label provenance for the merge step.
    """

    image_id: ImageId
    box: BoundingBox
    score: float
    candidates: tuple[LabelCandidate, ...]
    source: str = "supplemental"

    def __post_init__(self):
        object.__setattr__(self, "score", _require_finite(self.score, "detection score"))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"detection score must be in [0, 1], got {self.score}")
        if not self.candidates:
            raise ValidationError("detection has an empty candidate list")
        logprobs = [c.logprob for c in self.candidates]
        if any(a < b for a, b in zip(logprobs, logprobs[1:])):
            raise ValidationError("candidates must be sorted by logprob descending")
        if self.source not in SOURCES:
            raise ValidationError(
                f"detection source must be one of {SOURCES}, got {self.source!r}"
            )

    @property
    def top_candidate(self) -> LabelCandidate:
        return self.candidates[0]


@dataclass(frozen=True)
class EmbeddingTable:
    """Normalized text -> fixed-dimension vector, produced offline by any encoder."""

    dim: int
    entries: dict[str, np.ndarray] = field(compare=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise ValidationError(f"embedding dimension must be positive, got {self.dim}")
        coerced = {text: np.asarray(vec, dtype=np.float64) for text, vec in self.entries.items()}
        object.__setattr__(self, "entries", coerced)
        for text, vec in self.entries.items():
            if vec.shape != (self.dim,):
                raise ValidationError(
                    f"embedding for {text!r} has dimension {vec.shape}, expected ({self.dim},)"
                )
            if not np.isfinite(vec).all():
                raise ValidationError(f"embedding for {text!r} contains non-finite values")
            if float(np.linalg.norm(vec)) == 0.0:
                raise ValidationError(f"embedding for {text!r} has zero norm")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, text: str) -> bool:
        return text in self.entries

    def vector(self, text: str) -> np.ndarray:
        return self.entries[text]


def _default_ap_iou_grid() -> tuple[float, ...]:
    return tuple(round(0.50 + 0.05 * k, 2) for k in range(10))


SCORE_POLICIES = ("objectness", "objectness_times_candidate_prob")
ON_MISSING_CHOICES = ("error", "skip", "zero-vector-reject")


@dataclass(frozen=True)
class EvalConfig:
    """Threshold grids and policies shared by both evaluation protocols."""

    iou_grid: tuple[float, ...] = (0.3, 0.4, 0.5, 0.6, 0.7)
    meteor_grid: tuple[float, ...] = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25)
    ap_iou_grid: tuple[float, ...] = field(default_factory=_default_ap_iou_grid)
    per_class_cap: int = 10_000
    interpolation_points: int = 101
    score_policy: str = "objectness"
    min_similarity: float = 0.0
    on_missing_embedding: str = "error"

    def __post_init__(self):
        for name in ("iou_grid", "meteor_grid", "ap_iou_grid"):
            grid = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, grid)
            if not grid:
                raise ValidationError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValidationError(f"{name} must be strictly increasing, got {grid}")
            if grid[0] < 0.0 or grid[-1] > 1.0:
                raise ValidationError(f"{name} values must lie in [0, 1], got {grid}")
        if self.per_class_cap < 1:
            raise ValidationError(f"per_class_cap must be positive, got {self.per_class_cap}")
        # interpolation_points = 0 selects all-point interpolation
        if self.interpolation_points < 0:
            raise ValidationError(
                f"interpolation_points must be >= 0, got {self.interpolation_points}"
            )
        if self.score_policy not in SCORE_POLICIES:
            raise ValidationError(
                f"score_policy must be one of {SCORE_POLICIES}, got {self.score_policy!r}"
            )
        if not 0.0 <= self.min_similarity <= 1.0:
            raise ValidationError(
                f"min_similarity must be in [0, 1], got {self.min_similarity}"
            )
        if self.on_missing_embedding not in ON_MISSING_CHOICES:
            raise ValidationError(
                f"on_missing_embedding must be one of {ON_MISSING_CHOICES}, "
                f"got {self.on_missing_embedding!r}"
            )

    @classmethod
    def from_dict(cls, data: dict) -> "EvalConfig":
        """Build a config from a parsed JSON document; unknown keys are rejected."""
        known = {
            "iou_grid", "meteor_grid", "ap_iou_grid", "per_class_cap",
            "interpolation_points", "score_policy", "min_similarity",
            "on_missing_embedding",
        }
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("iou_grid", "meteor_grid", "ap_iou_grid"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def image_sort_key(image_id: ImageId) -> tuple[str, str]:
    """Total order over mixed int/str image ids (type tag then string form)."""
    return (type(image_id).__name__, str(image_id))
