"""Detection metrics: per-class AP/AR, mAP/mAR at a configurable IoU threshold.

Matching is the standard greedy protocol (detections in descending score,
each consuming the unmatched ground-truth box of highest IoU at or above
the threshold). AP is the 101-point interpolated average of the
precision-recall curve; AR is recall under a per-image detection cap,
averaged over the images that contain the class. Classes without any
ground truth are excluded from the means.

All sorting keys are total (score desc, then image id, then box corners),
so reports are independent of input order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import BBox, ClassifiedDetection, GroundTruth

__all__ = [
    "EvalConfig",
    "ClassCounts",
    "EvalReport",
    "iou",
    "match_detections",
    "average_precision",
    "evaluate",
    "format_report_table",
]

# j/100 for j in 0..100; integer division gives correctly rounded grid
# values, so recalls that are exact fractions land on their grid point
_RECALL_GRID = np.arange(101) / 100.0


@dataclass(frozen=True)
class EvalConfig:
    classes: tuple[str, ...]
    iou_thresh: float = 0.5
    max_dets_per_image: int = 100

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if not 0.0 < self.iou_thresh <= 1.0:
            raise ValueError(f"iou_thresh {self.iou_thresh} not in (0, 1]")
        if self.max_dets_per_image < 1:
            raise ValueError("max_dets_per_image must be >= 1")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")


@dataclass(frozen=True)
class ClassCounts:
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    """Per-class AP/AR keyed by class name, plus means over classes with
    ground truth. Classes without ground truth appear only in ``counts``."""

    per_class_ap: Mapping[str, float]
    per_class_ar: Mapping[str, float]
    mean_ap: float
    mean_ar: float
    counts: Mapping[str, ClassCounts]

    def to_json_dict(self) -> dict:
        return {
            "mean_ap": self.mean_ap,
            "mean_ar": self.mean_ar,
            "per_class_ap": dict(self.per_class_ap),
            "per_class_ar": dict(self.per_class_ar),
            "counts": {
                name: {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for name, c in self.counts.items()
            },
        }


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def match_detections(
    dets: Sequence[ClassifiedDetection],
    gts: Sequence[BBox],
    iou_thresh: float,
) -> np.ndarray:
    """Greedy TP/FP flags for detections of one image and one class.

    Detections are processed in descending score (ties by box corners);
    each matches the not-yet-matched ground-truth box of highest IoU at or
    above ``iou_thresh`` and becomes a TP, otherwise an FP. Every ground
    truth matches at most once. The returned boolean array is aligned with
    the input order of ``dets``.
    """
    if len({d.image_id for d in dets}) > 1:
        raise ValueError("match_detections expects detections of a single image")
    if len({d.label.id for d in dets}) > 1:
        raise ValueError("match_detections expects detections of a single class")

    flags = np.zeros(len(dets), dtype=bool)
    taken = [False] * len(gts)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].bbox.as_tuple()))
    for i in order:
        best_iou = 0.0
        best_j = -1
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            overlap = iou(dets[i].bbox, gt)
            if overlap >= iou_thresh and overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            flags[i] = True
    return flags


def average_precision(flags: Sequence[bool], scores: Sequence[float], num_gt: int) -> float:
    """101-point interpolated AP from dataset-wide TP/FP flags and scores.

    Precision is made monotone non-increasing from the right, then sampled
    on the 101-point recall grid [0, 0.01, ..., 1]; recalls beyond the
    curve contribute zero precision.
    """
    if num_gt < 1:
        raise ValueError("num_gt must be >= 1")
    flags = np.asarray(flags, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if flags.shape != scores.shape:
        raise ValueError("flags and scores must align")
    if flags.size == 0:
        return 0.0

    order = np.argsort(-scores, kind="stable")
    tp = flags[order]
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(~tp)
    recall = cum_tp / num_gt
    precision = cum_tp / (cum_tp + cum_fp)
    for i in range(precision.size - 1, 0, -1):
        precision[i - 1] = max(precision[i - 1], precision[i])

    idx = np.searchsorted(recall, _RECALL_GRID, side="left")
    sampled = np.where(idx < precision.size, precision[np.minimum(idx, precision.size - 1)], 0.0)
    return float(sampled.sum() / _RECALL_GRID.size)


def evaluate(
    dets: Sequence[ClassifiedDetection],
    gts: Sequence[GroundTruth],
    cfg: EvalConfig,
) -> EvalReport:
    """Full report over a dataset of detections and ground truth.

    Detections are capped per image and class at ``cfg.max_dets_per_image``
    before matching. Raises ValueError when a detection or ground-truth
    label is missing from ``cfg.classes``.
    """
    for d in dets:
        if d.label.name not in cfg.classes:
            raise ValueError(f"detection label {d.label.name!r} not in class table")
    for g in gts:
        if g.label.name not in cfg.classes:
            raise ValueError(f"ground-truth label {g.label.name!r} not in class table")

    per_class_ap: dict[str, float] = {}
    per_class_ar: dict[str, float] = {}
    counts: dict[str, ClassCounts] = {}
    for name in cfg.classes:
        class_dets = [d for d in dets if d.label.name == name]
        class_gts = [g for g in gts if g.label.name == name]
        num_gt = len(class_gts)

        gts_by_image: dict[str, list[BBox]] = {}
        for g in class_gts:
            gts_by_image.setdefault(g.image_id, []).append(g.bbox)
        dets_by_image: dict[str, list[ClassifiedDetection]] = {}
        for d in class_dets:
            dets_by_image.setdefault(d.image_id, []).append(d)

        # flag detections image by image, then pool with a total ordering
        pooled: list[tuple[float, str, tuple, bool]] = []
        tp_by_image: dict[str, int] = {}
        for image_id, image_dets in dets_by_image.items():
            image_dets.sort(key=lambda d: (-d.score, d.bbox.as_tuple()))
            image_dets = image_dets[: cfg.max_dets_per_image]
            flags = match_detections(
                image_dets, gts_by_image.get(image_id, []), cfg.iou_thresh
            )
            tp_by_image[image_id] = int(flags.sum())
            for d, flag in zip(image_dets, flags):
                pooled.append((d.score, d.image_id, d.bbox.as_tuple(), bool(flag)))
        pooled.sort(key=lambda t: (-t[0], t[1], t[2]))

        tp_total = sum(1 for item in pooled if item[3])
        fp_total = len(pooled) - tp_total
        counts[name] = ClassCounts(tp=tp_total, fp=fp_total, fn=num_gt - tp_total)

        if num_gt == 0:
            continue
        per_class_ap[name] = average_precision(
            [item[3] for item in pooled], [item[0] for item in pooled], num_gt
        )
        recalls = [
            tp_by_image.get(image_id, 0) / len(boxes)
            for image_id, boxes in gts_by_image.items()
        ]
        per_class_ar[name] = float(np.mean(recalls))

    evaluated = list(per_class_ap)
    mean_ap = float(np.mean([per_class_ap[c] for c in evaluated])) if evaluated else 0.0
    mean_ar = float(np.mean([per_class_ar[c] for c in evaluated])) if evaluated else 0.0
    return EvalReport(
        per_class_ap=per_class_ap,
        per_class_ar=per_class_ar,
        mean_ap=mean_ap,
        mean_ar=mean_ar,
        counts=counts,
    )


def format_report_table(report: EvalReport, cfg: EvalConfig) -> str:
    """Aligned text table: mAP and mAR first, then one AP column per class.

    Classes with no ground truth show '-'.
    """
    headers = ["mAP", "mAR", *cfg.classes]
    values = [f"{report.mean_ap:.4f}", f"{report.mean_ar:.4f}"]
    for name in cfg.classes:
        ap = report.per_class_ap.get(name)
        values.append("-" if ap is None else f"{ap:.4f}")
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    header_row = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    value_row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    return f"{header_row}\n{value_row}"
