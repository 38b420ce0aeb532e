"""Two-stage retrieval-augmented classification of detector proposals.

Stage 1 (context retrieval) ranks bank images by whole-image cosine
similarity to the query image and keeps the top k above a threshold,
discarding irrelevant scenes. Stage 2 (instance retrieval) ranks bank
instances by crop-embedding similarity to each proposal, restricted to
instances living inside the surviving context images. A plurality vote
over the retrieved instances assigns the class, and the detection score
fuses the upstream proposal confidence with the match similarity.

Search is exact: banks are small by design, so a brute-force scan over a
contiguous embedding matrix beats any approximate index and keeps results
reproducible. All ties break on ascending id, making every output
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bank import BankSnapshot
from .core import ClassifiedDetection, ClassLabel, ImageRecord, Proposal

__all__ = [
    "RacParams",
    "ContextMatch",
    "InstanceMatch",
    "context_retrieve",
    "instance_retrieve",
    "vote",
    "fuse_score",
    "classify_proposals",
    "classify_dataset",
]


@dataclass(frozen=True)
class RacParams:
    """All knobs of the retrieval pipeline.

    k: context images retrieved per query image.
    n: instances retrieved (and voting) per proposal.
    context_thresh / instance_thresh: cosine floors for each stage.
    w1 / w2: fusion weights for proposal score and match similarity;
        must sum to 1.
    """

    k: int = 50
    n: int = 1
    context_thresh: float = 0.1
    instance_thresh: float = 0.8
    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for name in ("context_thresh", "instance_thresh"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} not in [-1, 1]")
        for name in ("w1", "w2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} not in [0, 1]")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError(f"w1 + w2 must equal 1, got {self.w1 + self.w2}")


@dataclass(frozen=True)
class ContextMatch:
    image_id: str
    similarity: float


@dataclass(frozen=True)
class InstanceMatch:
    instance_id: str
    label: ClassLabel
    similarity: float


def _query_vector(embedding: np.ndarray, dim: int, what: str) -> tuple[np.ndarray, float]:
    q = np.asarray(embedding, dtype=np.float64)
    if q.shape != (dim,):
        raise ValueError(f"{what} dim {q.shape} does not match bank dim {dim}")
    return q, float(np.linalg.norm(q))


def _ranked(ids: Sequence[str], sims: np.ndarray, thresh: float, limit: int) -> list[tuple[str, float]]:
    keep = [(float(sims[i]), ids[i]) for i in np.flatnonzero(sims >= thresh)]
    keep.sort(key=lambda t: (-t[0], t[1]))
    return [(image_id, sim) for sim, image_id in keep[:limit]]


def context_retrieve(
    query: ImageRecord,
    snapshot: BankSnapshot,
    k: int,
    context_thresh: float,
) -> list[ContextMatch]:
    """Rank bank images by cosine similarity to the query image.

    Exact scan over every bank image; entries below ``context_thresh`` are
    dropped, the rest are sorted by descending similarity (ties on
    ascending image id) and truncated to ``k``.
    """
    if snapshot.image_count == 0:
        return []
    q, qnorm = _query_vector(query.embedding, snapshot.manifest.dim, "query image")
    sims = np.clip(snapshot.image_matrix @ q / (snapshot.image_norms * qnorm), -1.0, 1.0)
    return [
        ContextMatch(image_id=i, similarity=s)
        for i, s in _ranked(snapshot.image_ids, sims, context_thresh, k)
    ]


def instance_retrieve(
    proposal: Proposal,
    snapshot: BankSnapshot,
    allowed_images: Iterable[str],
    n: int,
    instance_thresh: float,
) -> list[InstanceMatch]:
    """Rank bank instances against a proposal, constrained to ``allowed_images``.

    Only instances whose owning image is in ``allowed_images`` compete;
    this is what lets scene context veto look-alike objects from the wrong
    setting. Results below ``instance_thresh`` are dropped, the rest sorted
    by descending similarity (ties on ascending instance id), truncated
    to ``n``.
    """
    allowed = set(allowed_images)
    unknown = allowed.difference(snapshot.image_ids)
    if unknown:
        raise ValueError(f"allowed_images not in bank: {sorted(unknown)[:5]}")
    if snapshot.instance_count == 0 or not allowed:
        return []
    q, qnorm = _query_vector(proposal.embedding, snapshot.manifest.dim, "proposal")

    groups = [
        snapshot.instance_rows_by_image[iid]
        for iid in allowed
        if iid in snapshot.instance_rows_by_image
    ]
    if not groups:
        return []
    idx = np.sort(np.concatenate(groups))
    sims = np.clip(
        snapshot.instance_matrix[idx] @ q / (snapshot.instance_norms[idx] * qnorm),
        -1.0,
        1.0,
    )
    ids = [snapshot.instance_ids[i] for i in idx]
    labels = {snapshot.instance_ids[i]: snapshot.instance_labels[i] for i in idx}
    return [
        InstanceMatch(instance_id=i, label=labels[i], similarity=s)
        for i, s in _ranked(ids, sims, instance_thresh, n)
    ]


def vote(matches: Sequence[InstanceMatch]) -> tuple[ClassLabel, InstanceMatch]:
    """Plurality vote over the labels of the retrieved instances.

    A count tie goes to the tied label containing the highest-similarity
    match. Returns the winning label and that label's best match. With a
    single match this reduces to top-1 assignment.

    Expects ``matches`` ranked as produced by :func:`instance_retrieve`.
    """
    if not matches:
        raise ValueError("vote requires at least one match")
    counts: dict[int, int] = {}
    for m in matches:
        counts[m.label.id] = counts.get(m.label.id, 0) + 1
    best = max(counts.values())
    for m in matches:  # ranked, so the first tied label wins
        if counts[m.label.id] == best:
            return m.label, m
    raise AssertionError("unreachable")


def fuse_score(proposal_score: float, cosine_score: float, w1: float, w2: float) -> float:
    """Final detection confidence: w1 * proposal_score + w2 * cosine_score.

    The cosine term is floored at 0 before weighting (a negative match
    similarity carries no positive evidence), and the result is clamped to
    [0, 1] so it is comparable to detector confidences.
    """
    if abs(w1 + w2 - 1.0) > 1e-9:
        raise ValueError(f"w1 + w2 must equal 1, got {w1 + w2}")
    if not 0.0 <= proposal_score <= 1.0:
        raise ValueError(f"proposal_score {proposal_score} not in [0, 1]")
    fused = w1 * proposal_score + w2 * max(cosine_score, 0.0)
    return float(min(1.0, max(0.0, fused)))


def classify_proposals(
    query_image: ImageRecord,
    proposals: Sequence[Proposal],
    snapshot: BankSnapshot,
    params: RacParams,
) -> list[ClassifiedDetection]:
    """Run the full pipeline for one query image.

    Context retrieval runs once; each proposal is then matched within the
    surviving context images, voted on, and emitted iff at least one
    instance match clears ``params.instance_thresh``. Proposals with no
    surviving match are discarded. Output is ordered by descending fused
    score, ties by proposal input order.
    """
    for p in proposals:
        if p.image_id != query_image.image_id:
            raise ValueError(
                f"proposal image_id {p.image_id!r} does not match query {query_image.image_id!r}"
            )

    context = context_retrieve(query_image, snapshot, params.k, params.context_thresh)
    if not context:
        return []
    context_ids = tuple(m.image_id for m in context)
    allowed = set(context_ids)

    detections: list[tuple[float, int, ClassifiedDetection]] = []
    for index, proposal in enumerate(proposals):
        matches = instance_retrieve(
            proposal, snapshot, allowed, params.n, params.instance_thresh
        )
        if not matches:
            continue
        label, top = vote(matches)
        score = fuse_score(proposal.proposal_score, top.similarity, params.w1, params.w2)
        detections.append(
            (
                score,
                index,
                ClassifiedDetection(
                    image_id=proposal.image_id,
                    bbox=proposal.bbox,
                    label=label,
                    score=score,
                    match_instance_id=top.instance_id,
                    context_image_ids=context_ids,
                ),
            )
        )
    detections.sort(key=lambda t: (-t[0], t[1]))
    return [d for _, _, d in detections]


def classify_dataset(
    queries: Sequence[ImageRecord],
    proposals: Sequence[Proposal],
    snapshot: BankSnapshot,
    params: RacParams,
) -> list[ClassifiedDetection]:
    """Classify a whole batch of query images against one snapshot.

    Proposals are grouped by image; every proposal must reference one of
    the query images. Detections come back grouped per query image, in
    query order.
    """
    by_image: dict[str, list[Proposal]] = {}
    for p in proposals:
        by_image.setdefault(p.image_id, []).append(p)
    unknown = sorted(set(by_image) - {q.image_id for q in queries})
    if unknown:
        raise ValueError(f"proposals reference unknown image_ids: {unknown[:10]}")

    detections: list[ClassifiedDetection] = []
    for query in queries:
        image_proposals = by_image.get(query.image_id)
        if image_proposals:
            detections.extend(classify_proposals(query, image_proposals, snapshot, params))
    return detections
