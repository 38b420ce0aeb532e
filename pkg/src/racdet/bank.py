"""Online-updatable store of labeled context images and object instances.

The bank is the only mutable piece of the system. It follows a
single-writer / multi-reader contract: mutations are serialized behind a
lock, readers take an immutable :class:`BankSnapshot` and are never blocked
by writers. Classification always runs against a snapshot.

Removal cascades: deleting an image atomically deletes every instance it
owns, so context retrieval can never surface a scene whose objects are
gone. Per-class budgets are a construction-time concern of seed selection;
the bank itself accepts any size.
"""

from __future__ import annotations

import os
import threading
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .core import ClassLabel, ImageRecord, InstanceRecord, Manifest
from .errors import IntegrityError
from . import io as rio

__all__ = ["BankBudget", "BankSnapshot", "MemoryBank"]


@dataclass(frozen=True)
class BankBudget:
    """Cap on labeled images per class when constructing a bank (10 for a
    tiny bank, 250 for a base-scale one)."""

    max_images_per_class: int

    def __post_init__(self) -> None:
        if self.max_images_per_class < 1:
            raise ValueError("max_images_per_class must be >= 1")


@dataclass(frozen=True, eq=False)
class BankSnapshot:
    """Immutable view of a bank at one generation.

    Embeddings are also exposed as contiguous float64 matrices with
    precomputed norms so retrieval is a single matrix-vector product.
    """

    manifest: Manifest
    generation: int
    images: Mapping[str, ImageRecord]
    instances: Mapping[str, InstanceRecord]
    image_ids: tuple[str, ...]
    image_matrix: np.ndarray
    image_norms: np.ndarray
    instance_ids: tuple[str, ...]
    instance_image_ids: tuple[str, ...]
    instance_labels: tuple[ClassLabel, ...]
    instance_matrix: np.ndarray
    instance_norms: np.ndarray
    instance_rows_by_image: Mapping[str, np.ndarray]

    @property
    def image_count(self) -> int:
        return len(self.image_ids)

    @property
    def instance_count(self) -> int:
        return len(self.instance_ids)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _build_snapshot(
    manifest: Manifest,
    images: dict[str, ImageRecord],
    instances: dict[str, InstanceRecord],
    generation: int,
) -> BankSnapshot:
    dim = manifest.dim
    image_ids = tuple(images)
    if image_ids:
        image_matrix = np.stack([images[i].embedding for i in image_ids]).astype(np.float64)
    else:
        image_matrix = np.empty((0, dim), dtype=np.float64)
    instance_ids = tuple(instances)
    if instance_ids:
        instance_matrix = np.stack(
            [instances[i].embedding for i in instance_ids]
        ).astype(np.float64)
    else:
        instance_matrix = np.empty((0, dim), dtype=np.float64)
    rows_by_image: dict[str, list[int]] = {}
    for row, instance_id in enumerate(instance_ids):
        rows_by_image.setdefault(instances[instance_id].image_id, []).append(row)
    return BankSnapshot(
        manifest=manifest,
        generation=generation,
        images=MappingProxyType(dict(images)),
        instances=MappingProxyType(dict(instances)),
        image_ids=image_ids,
        image_matrix=_freeze(image_matrix),
        image_norms=_freeze(np.linalg.norm(image_matrix, axis=1)),
        instance_ids=instance_ids,
        instance_image_ids=tuple(instances[i].image_id for i in instance_ids),
        instance_labels=tuple(instances[i].label for i in instance_ids),
        instance_matrix=_freeze(instance_matrix),
        instance_norms=_freeze(np.linalg.norm(instance_matrix, axis=1)),
        instance_rows_by_image=MappingProxyType(
            {k: _freeze(np.asarray(v, dtype=np.int64)) for k, v in rows_by_image.items()}
        ),
    )


class MemoryBank:
    """Versioned store of labeled images and instances.

    Every mutation bumps ``generation``; snapshots taken before a mutation
    are unaffected by it. Referential integrity (each instance's owning
    image is present, labels come from the manifest, dimensions match) is
    enforced on entry, and the per-class counts are audited against a full
    recount after every mutation in debug runs.
    """

    def __init__(self, manifest: Manifest):
        self._manifest = manifest
        self._images: dict[str, ImageRecord] = {}
        self._instances: dict[str, InstanceRecord] = {}
        self._instances_by_image: dict[str, list[str]] = {}
        self._class_counts: Counter[int] = Counter()
        self._generation = 0
        self._lock = threading.Lock()

    @classmethod
    def from_records(
        cls,
        manifest: Manifest,
        images: Iterable[ImageRecord],
        instances: Iterable[InstanceRecord] = (),
    ) -> "MemoryBank":
        bank = cls(manifest)
        for rec in images:
            bank.add_image(rec)
        for rec in instances:
            bank.add_instance(rec)
        return bank

    # -- introspection ----------------------------------------------------

    @property
    def manifest(self) -> Manifest:
        return self._manifest

    @property
    def generation(self) -> int:
        return self._generation

    @property
    def image_count(self) -> int:
        return len(self._images)

    @property
    def instance_count(self) -> int:
        return len(self._instances)

    @property
    def images(self) -> Mapping[str, ImageRecord]:
        return MappingProxyType(self._images)

    @property
    def instances(self) -> Mapping[str, InstanceRecord]:
        return MappingProxyType(self._instances)

    @property
    def per_class_counts(self) -> dict[ClassLabel, int]:
        return {
            label: self._class_counts.get(label.id, 0)
            for label in self._manifest.labels()
        }

    # -- mutations ---------------------------------------------------------

    def add_image(self, record: ImageRecord) -> int:
        """Store an image; returns the new generation."""
        with self._lock:
            if record.image_id in self._images:
                raise IntegrityError(f"duplicate image_id {record.image_id!r}")
            if record.dim != self._manifest.dim:
                raise IntegrityError(
                    f"image {record.image_id!r}: dim {record.dim} != {self._manifest.dim}"
                )
            self._images[record.image_id] = record
            self._instances_by_image[record.image_id] = []
            return self._bump()

    def add_instance(self, record: InstanceRecord) -> int:
        """Store a labeled instance; its owning image must already be present."""
        with self._lock:
            if record.instance_id in self._instances:
                raise IntegrityError(f"duplicate instance_id {record.instance_id!r}")
            if record.image_id not in self._images:
                raise IntegrityError(
                    f"instance {record.instance_id!r}: unknown image_id {record.image_id!r}"
                )
            if record.dim != self._manifest.dim:
                raise IntegrityError(
                    f"instance {record.instance_id!r}: dim {record.dim} != {self._manifest.dim}"
                )
            name = record.label.name
            if name not in self._manifest.classes or self._manifest.label_for(name) != record.label:
                raise IntegrityError(
                    f"instance {record.instance_id!r}: unknown label {record.label!r}"
                )
            self._instances[record.instance_id] = record
            self._instances_by_image[record.image_id].append(record.instance_id)
            self._class_counts[record.label.id] += 1
            return self._bump()

    def remove_image(self, image_id: str) -> int:
        """Remove an image and, atomically, every instance it owns."""
        with self._lock:
            if image_id not in self._images:
                raise IntegrityError(f"unknown image_id {image_id!r}")
            for instance_id in self._instances_by_image.pop(image_id):
                record = self._instances.pop(instance_id)
                self._class_counts[record.label.id] -= 1
            del self._images[image_id]
            return self._bump()

    def _bump(self) -> int:
        self._generation += 1
        # Debug audit: a full recount is O(instances), so past a small size
        # it runs periodically instead of on every mutation.
        if __debug__ and (len(self._instances) <= 512 or self._generation % 97 == 0):
            self._audit()
        return self._generation

    def _audit(self) -> None:
        recount = Counter(r.label.id for r in self._instances.values())
        live = Counter({k: v for k, v in self._class_counts.items() if v})
        if recount != live:
            raise AssertionError(f"per-class counts drifted: {live} vs recount {recount}")
        for record in self._instances.values():
            if record.image_id not in self._images:
                raise AssertionError(f"orphan instance {record.instance_id!r}")

    # -- snapshots and persistence ------------------------------------------

    def snapshot(self) -> BankSnapshot:
        """Immutable view at the current generation."""
        with self._lock:
            return _build_snapshot(
                self._manifest, self._images, self._instances, self._generation
            )

    def save(self, directory) -> None:
        """Persist as <dir>/manifest.json + images.jsonl + instances.jsonl."""
        os.makedirs(directory, exist_ok=True)
        snap = self.snapshot()
        rio.write_manifest(os.path.join(directory, "manifest.json"), snap.manifest)
        rio.write_records(
            os.path.join(directory, "images.jsonl"), list(snap.images.values())
        )
        rio.write_records(
            os.path.join(directory, "instances.jsonl"), list(snap.instances.values())
        )

    @classmethod
    def load(cls, directory) -> "MemoryBank":
        """Rebuild a bank from ``save`` output; generation resets to 0."""
        manifest = rio.read_manifest(os.path.join(directory, "manifest.json"))
        images = rio.read_records(os.path.join(directory, "images.jsonl"), "images", manifest=manifest)
        instances = rio.read_records(
            os.path.join(directory, "instances.jsonl"), "instances", manifest=manifest
        )
        bank = cls.from_records(manifest, images, instances)
        bank._generation = 0
        return bank
