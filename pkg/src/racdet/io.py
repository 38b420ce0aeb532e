"""JSONL interchange formats and the sidecar manifest.

One JSON object per line, UTF-8, '\\n' terminated. Kinds and their keys:

    images:      {"image_id": str, "embedding": [f32 x D],
                  "source_uri"?: str, "class_hint"?: str}
    instances:   {"instance_id": str, "image_id": str,
                  "bbox": [x_min, y_min, x_max, y_max], "label": str,
                  "embedding": [f32 x D]}
    proposals:   {"image_id": str, "bbox": [...], "proposal_score": f32,
                  "embedding": [f32 x D], "upstream_label"?: str}
    groundtruth: {"image_id": str, "bbox": [...], "label": str}
    detections:  {"image_id": str, "bbox": [...], "label": str,
                  "score": f32, "match_instance_id": str,
                  "context_image_ids": [str, ...]}

The sidecar manifest is a JSON file {"dim": D, "classes": [names...],
"version": 1}; every file in one bank or dataset must agree with it.
Reading is strict: the first violation aborts with the offending line
number, and unknown keys are rejected.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Sequence

from .core import (
    BBox,
    ClassifiedDetection,
    GroundTruth,
    ImageRecord,
    InstanceRecord,
    Manifest,
    Proposal,
)
from .errors import FormatError

__all__ = [
    "KINDS",
    "read_manifest",
    "write_manifest",
    "read_records",
    "write_records",
]

KINDS = ("images", "instances", "proposals", "groundtruth", "detections")

# kind -> (required keys, optional keys)
_SCHEMAS = {
    "images": ({"image_id", "embedding"}, {"source_uri", "class_hint"}),
    "instances": ({"instance_id", "image_id", "bbox", "label", "embedding"}, set()),
    "proposals": ({"image_id", "bbox", "proposal_score", "embedding"}, {"upstream_label"}),
    "groundtruth": ({"image_id", "bbox", "label"}, set()),
    "detections": (
        {"image_id", "bbox", "label", "score", "match_instance_id", "context_image_ids"},
        set(),
    ),
}

_LABELED_KINDS = ("instances", "groundtruth", "detections")


def read_manifest(path) -> Manifest:
    """Read and validate a sidecar manifest JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise FormatError(f"{path}: cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    unknown = set(raw) - {"dim", "classes", "version"}
    if unknown:
        raise FormatError(f"{path}: unexpected manifest key {sorted(unknown)[0]!r}")
    try:
        return Manifest(
            dim=int(raw["dim"]),
            classes=tuple(str(c) for c in raw.get("classes", ())),
            version=int(raw.get("version", 1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: invalid manifest: {exc}") from exc


def write_manifest(path, manifest: Manifest) -> None:
    payload = {"dim": manifest.dim, "classes": list(manifest.classes), "version": manifest.version}
    _atomic_write(path, json.dumps(payload, ensure_ascii=False) + "\n")


def read_records(path, kind: str, *, manifest: Manifest | None = None) -> list:
    """Parse one JSONL file into validated records.

    Args:
        path: the JSONL file.
        kind: one of ``KINDS``.
        manifest: required for labeled kinds (instances, groundtruth,
            detections) to resolve label names; for the others it only
            pins the expected embedding dimension. Without a manifest the
            dimension is inferred from the first record and any drift is
            an error.

    Raises:
        FormatError: malformed JSON, schema violation, dimension drift,
            duplicate ids, or unknown labels; the message carries the
            offending line number. An empty file is not an error.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown record kind {kind!r}")
    if manifest is None and kind in _LABELED_KINDS:
        raise ValueError(f"kind {kind!r} requires a manifest to resolve labels")

    expected_dim = manifest.dim if manifest is not None else None
    records: list = []
    seen_ids: set[str] = set()
    required, optional = _SCHEMAS[kind]

    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: cannot read: {exc}") from exc

    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                raise FormatError(f"{path}: line {lineno}: blank line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise FormatError(f"{path}: line {lineno}: expected a JSON object")

            missing = required - set(obj)
            if missing:
                raise FormatError(f"{path}: line {lineno}: missing key {sorted(missing)[0]!r}")
            unknown = set(obj) - required - optional
            if unknown:
                raise FormatError(f"{path}: line {lineno}: unexpected key {sorted(unknown)[0]!r}")

            try:
                record = _parse_one(kind, obj, manifest)
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc

            if kind in ("images", "instances", "proposals"):
                if expected_dim is None:
                    expected_dim = record.dim
                elif record.dim != expected_dim:
                    raise FormatError(
                        f"{path}: line {lineno}: dim {record.dim} != {expected_dim}"
                    )

            unique_id = _unique_id(kind, record)
            if unique_id is not None:
                if unique_id in seen_ids:
                    raise FormatError(
                        f"{path}: line {lineno}: duplicate id {unique_id!r}"
                    )
                seen_ids.add(unique_id)

            records.append(record)
    return records


def write_records(path, records: Sequence) -> None:
    """Write records as JSONL; read_records(write_records(x)) == x field-for-field.

    An empty sequence produces a valid empty file. Mixed record types are
    rejected. The file is written atomically (temp file + rename).
    """
    kinds = {type(r) for r in records}
    if len(kinds) > 1:
        names = sorted(t.__name__ for t in kinds)
        raise ValueError(f"mixed record kinds in one file: {names}")
    lines = [json.dumps(_encode_one(r), ensure_ascii=False) + "\n" for r in records]
    _atomic_write(path, "".join(lines))


def _unique_id(kind: str, record) -> str | None:
    if kind == "images":
        return record.image_id
    if kind == "instances":
        return record.instance_id
    return None


def _parse_one(kind: str, obj: dict, manifest: Manifest | None):
    if kind == "images":
        return ImageRecord(
            image_id=_as_str(obj, "image_id"),
            embedding=_as_float_list(obj, "embedding"),
            source_uri=_as_opt_str(obj, "source_uri"),
            class_hint=_as_opt_str(obj, "class_hint"),
        )
    if kind == "instances":
        return InstanceRecord(
            instance_id=_as_str(obj, "instance_id"),
            image_id=_as_str(obj, "image_id"),
            bbox=_as_bbox(obj),
            label=manifest.label_for(_as_str(obj, "label")),
            embedding=_as_float_list(obj, "embedding"),
        )
    if kind == "proposals":
        return Proposal(
            image_id=_as_str(obj, "image_id"),
            bbox=_as_bbox(obj),
            proposal_score=_as_float(obj, "proposal_score"),
            embedding=_as_float_list(obj, "embedding"),
            upstream_label=_as_opt_str(obj, "upstream_label"),
        )
    if kind == "groundtruth":
        return GroundTruth(
            image_id=_as_str(obj, "image_id"),
            bbox=_as_bbox(obj),
            label=manifest.label_for(_as_str(obj, "label")),
        )
    if kind == "detections":
        ctx = obj["context_image_ids"]
        if not isinstance(ctx, list) or not all(isinstance(c, str) for c in ctx):
            raise ValueError("context_image_ids must be a list of strings")
        return ClassifiedDetection(
            image_id=_as_str(obj, "image_id"),
            bbox=_as_bbox(obj),
            label=manifest.label_for(_as_str(obj, "label")),
            score=_as_float(obj, "score"),
            match_instance_id=_as_str(obj, "match_instance_id"),
            context_image_ids=tuple(ctx),
        )
    raise AssertionError(kind)


def _encode_one(record) -> dict:
    if isinstance(record, ImageRecord):
        out = {"image_id": record.image_id, "embedding": _vec(record.embedding)}
        if record.source_uri is not None:
            out["source_uri"] = record.source_uri
        if record.class_hint is not None:
            out["class_hint"] = record.class_hint
        return out
    if isinstance(record, InstanceRecord):
        return {
            "instance_id": record.instance_id,
            "image_id": record.image_id,
            "bbox": list(record.bbox.as_tuple()),
            "label": record.label.name,
            "embedding": _vec(record.embedding),
        }
    if isinstance(record, Proposal):
        out = {
            "image_id": record.image_id,
            "bbox": list(record.bbox.as_tuple()),
            "proposal_score": record.proposal_score,
            "embedding": _vec(record.embedding),
        }
        if record.upstream_label is not None:
            out["upstream_label"] = record.upstream_label
        return out
    if isinstance(record, GroundTruth):
        return {
            "image_id": record.image_id,
            "bbox": list(record.bbox.as_tuple()),
            "label": record.label.name,
        }
    if isinstance(record, ClassifiedDetection):
        return {
            "image_id": record.image_id,
            "bbox": list(record.bbox.as_tuple()),
            "label": record.label.name,
            "score": record.score,
            "match_instance_id": record.match_instance_id,
            "context_image_ids": list(record.context_image_ids),
        }
    raise ValueError(f"cannot serialize {type(record).__name__}")


def _vec(embedding) -> list[float]:
    return [float(x) for x in embedding]


def _as_str(obj: dict, key: str) -> str:
    v = obj[key]
    if not isinstance(v, str):
        raise ValueError(f"{key} must be a string")
    return v


def _as_opt_str(obj: dict, key: str) -> str | None:
    v = obj.get(key)
    if v is not None and not isinstance(v, str):
        raise ValueError(f"{key} must be a string")
    return v


def _as_float(obj: dict, key: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"{key} must be a number")
    return float(v)


def _as_float_list(obj: dict, key: str) -> list[float]:
    v = obj[key]
    if not isinstance(v, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise ValueError(f"{key} must be a list of numbers")
    return v


def _as_bbox(obj: dict) -> BBox:
    v = obj["bbox"]
    if not isinstance(v, list) or len(v) != 4 or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise ValueError("bbox must be a list of 4 numbers")
    return BBox(*(float(x) for x in v))


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
