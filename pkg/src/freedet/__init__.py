"""Evaluation toolkit for free-form-label (open-ended) object detection."""

__version__ = "0.1.0"

from freedet.core import (
    BoundingBox,
    Category,
    Detection,
    EmbeddingTable,
    EvalConfig,
    GroundTruthAnnotation,
    ImageInfo,
    LabelCandidate,
    Taxonomy,
    normalize_text,
)
from freedet.errors import (
    ContractError,
    InfeasibleError,
    ParseError,
    ReferentialIntegrityError,
    ToolkitError,
    ValidationError,
)

__all__ = [
    "BoundingBox",
    "Category",
    "ContractError",
    "Detection",
    "EmbeddingTable",
    "EvalConfig",
    "GroundTruthAnnotation",
    "ImageInfo",
    "InfeasibleError",
    "LabelCandidate",
    "ParseError",
    "ReferentialIntegrityError",
    "Taxonomy",
    "ToolkitError",
    "ValidationError",
    "normalize_text",
    "__version__",
]
