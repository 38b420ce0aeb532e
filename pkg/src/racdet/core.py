"""Shared domain types and the vector math the rest of the library builds on.

Embeddings are plain 1-D numpy arrays of float32; ``as_embedding`` is the
single validation/ingestion point (dimension, finiteness, non-zero norm).
Record types are frozen dataclasses and are safe to share across threads
once constructed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_embedding",
    "cosine_similarity",
    "BBox",
    "ClassLabel",
    "Manifest",
    "ImageRecord",
    "InstanceRecord",
    "Proposal",
    "GroundTruth",
    "ClassifiedDetection",
]


def as_embedding(values, dim: int | None = None) -> np.ndarray:
    """Validate ``values`` as an embedding vector and return it as float32.

    Args:
        values: 1-D array-like of numbers.
        dim: expected dimension; when given, a length mismatch is an error.

    Returns:
        A read-only float32 array (always a fresh copy).

    Raises:
        ValueError: not 1-D, empty, wrong dimension, non-finite components,
            or exactly zero norm. Zero vectors indicate an upstream
            extraction bug and are rejected rather than normalized away.
    """
    vec = np.array(values, dtype=np.float32)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("embedding must be a non-empty 1-D vector")
    if dim is not None and vec.shape[0] != dim:
        raise ValueError(f"dim {vec.shape[0]} != {dim}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding has non-finite components")
    if not np.any(vec):
        raise ValueError("embedding has zero norm")
    vec.flags.writeable = False
    return vec


def cosine_similarity(a, b) -> float:
    """Cosine similarity dot(a,b)/(|a||b|), clamped to [-1, 1].

    Inputs are accumulated in float64 regardless of storage dtype so that
    the result is stable for float32 embeddings. The clamp absorbs rounding
    just outside the closed range.

    Raises:
        ValueError: dimension mismatch, or either vector has zero norm.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1 or av.shape != bv.shape:
        raise ValueError(f"dimension mismatch: {av.shape} vs {bv.shape}")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vector")
    return float(min(1.0, max(-1.0, float(av @ bv) / (na * nb))))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, corners (x_min, y_min, x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(np.isfinite(c) and c >= 0 for c in coords):
            raise ValueError(f"box coordinates must be finite and >= 0: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box: {coords}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class ClassLabel:
    """A class in the target ontology: dense non-negative id plus unique name."""

    id: int
    name: str

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"label id must be >= 0: {self.id}")
        if not self.name:
            raise ValueError("label name must be non-empty")


@dataclass(frozen=True)
class Manifest:
    """Bank-wide contract: embedding dimension and the class table.

    All files belonging to one bank or dataset must agree with it. Label
    ids are the index of the name in ``classes``.
    """

    dim: int
    classes: tuple[str, ...]
    version: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1: {self.dim}")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")
        if any(not c for c in self.classes):
            raise ValueError("class names must be non-empty")

    def labels(self) -> tuple[ClassLabel, ...]:
        return tuple(ClassLabel(i, name) for i, name in enumerate(self.classes))

    def label_for(self, name: str) -> ClassLabel:
        try:
            return ClassLabel(self.classes.index(name), name)
        except ValueError:
            raise ValueError(f"unknown label {name!r}") from None


@dataclass(frozen=True, eq=False)
class ImageRecord:
    """A whole image represented by its image-level embedding.

    ``class_hint`` is optional pool metadata (the dominant class of the
    image) used only when forming per-class candidate pools for seed
    selection; retrieval never reads it.
    """

    image_id: str
    embedding: np.ndarray
    source_uri: str | None = None
    class_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        object.__setattr__(self, "embedding", as_embedding(self.embedding))

    @property
    def dim(self) -> int:
        return int(self.embedding.shape[0])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ImageRecord)
            and self.image_id == other.image_id
            and np.array_equal(self.embedding, other.embedding)
            and self.source_uri == other.source_uri
            and self.class_hint == other.class_hint
        )


@dataclass(frozen=True, eq=False)
class InstanceRecord:
    """A labeled seed object: a box inside an owning image plus its crop embedding."""

    instance_id: str
    image_id: str
    bbox: BBox
    label: ClassLabel
    embedding: np.ndarray

    def __post_init__(self) -> None:
        if not self.instance_id:
            raise ValueError("instance_id must be non-empty")
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        object.__setattr__(self, "embedding", as_embedding(self.embedding))

    @property
    def dim(self) -> int:
        return int(self.embedding.shape[0])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, InstanceRecord)
            and self.instance_id == other.instance_id
            and self.image_id == other.image_id
            and self.bbox == other.bbox
            and self.label == other.label
            and np.array_equal(self.embedding, other.embedding)
        )


@dataclass(frozen=True, eq=False)
class Proposal:
    """A scored foreground box from an upstream detector, with its crop embedding.

    ``upstream_label`` is provenance only; classification never consults it.
    """

    image_id: str
    bbox: BBox
    proposal_score: float
    embedding: np.ndarray
    upstream_label: str | None = None

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        object.__setattr__(self, "proposal_score", float(self.proposal_score))
        if not (0.0 <= self.proposal_score <= 1.0):
            raise ValueError(f"proposal_score {self.proposal_score} not in [0, 1]")
        object.__setattr__(self, "embedding", as_embedding(self.embedding))

    @property
    def dim(self) -> int:
        return int(self.embedding.shape[0])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Proposal)
            and self.image_id == other.image_id
            and self.bbox == other.bbox
            and self.proposal_score == other.proposal_score
            and np.array_equal(self.embedding, other.embedding)
            and self.upstream_label == other.upstream_label
        )


@dataclass(frozen=True)
class GroundTruth:
    """An annotated box used only by evaluation."""

    image_id: str
    bbox: BBox
    label: ClassLabel

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be non-empty")


@dataclass(frozen=True)
class ClassifiedDetection:
    """A proposal after classification: assigned class, fused score, audit trail.

    ``match_instance_id`` is the winning memory instance;
    ``context_image_ids`` are the bank images that survived context
    retrieval for the query, in ranked order. The winning instance always
    lives inside one of them.
    """

    image_id: str
    bbox: BBox
    label: ClassLabel
    score: float
    match_instance_id: str
    context_image_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        object.__setattr__(self, "score", float(self.score))
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} not in [0, 1]")
        if not self.match_instance_id:
            raise ValueError("match_instance_id must be non-empty")
        object.__setattr__(self, "context_image_ids", tuple(self.context_image_ids))
