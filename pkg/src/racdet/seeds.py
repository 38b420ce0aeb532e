"""Unsupervised selection of which images to label for the bank.

Image embeddings are clustered with k-means (k-means++ initialization,
Lloyd iterations, Euclidean distance on the raw embeddings) and one
representative per cluster is picked. Everything is deterministic for a
fixed input order and seed, and the per-iteration inertia trace is kept so
callers can check that Lloyd never made things worse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ImageRecord

__all__ = ["KMeansConfig", "Clustering", "kmeans", "select_seeds", "STRATEGIES"]

STRATEGIES = ("centroid", "random_per_cluster", "uniform_random")


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iter: int = 100
    tol: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


@dataclass(frozen=True, eq=False)
class Clustering:
    """Result of one k-means run.

    ``centroids[j]`` is the mean of the points assigned to cluster j (no
    cluster is ever empty), ``inertia`` is the summed squared distance of
    each point to its assigned centroid, and ``inertia_history`` holds the
    value after every Lloyd iteration.
    """

    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    iterations_run: int
    inertia_history: tuple[float, ...]


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # |x - c|^2 expanded; avoids the (N, k, D) intermediate. Clip the tiny
    # negatives the expansion can produce.
    sq = (
        np.sum(points**2, axis=1)[:, None]
        + np.sum(centers**2, axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(sq, 0.0)


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    min_sq = _pairwise_sq_dists(points, points[chosen[0]][None, :])[:, 0]
    for j in range(1, k):
        total = float(min_sq.sum())
        if total == 0.0:
            # all remaining mass sits on already-chosen points
            chosen[j] = rng.integers(n)
        else:
            chosen[j] = rng.choice(n, p=min_sq / total)
        d = _pairwise_sq_dists(points, points[chosen[j]][None, :])[:, 0]
        min_sq = np.minimum(min_sq, d)
    return points[chosen].copy()


def kmeans(points: Sequence | np.ndarray, cfg: KMeansConfig) -> Clustering:
    """Lloyd's algorithm from a k-means++ start.

    Terminates when the relative inertia improvement drops below
    ``cfg.tol`` or after ``cfg.max_iter`` iterations. An emptied cluster is
    re-seeded with the farthest point of the currently largest cluster.

    Raises:
        ValueError: fewer points than clusters, or ragged input.
    """
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError as exc:
        raise ValueError("points must share one dimension") from exc
    if pts.ndim != 2:
        raise ValueError("points must share one dimension")
    n = pts.shape[0]
    if n < cfg.k:
        raise ValueError(f"need at least k={cfg.k} points, got {n}")

    rng = np.random.default_rng(cfg.rng_seed)
    centroids = _plusplus_init(pts, cfg.k, rng)

    history: list[float] = []
    assignment = np.zeros(n, dtype=np.int64)
    prev = None
    for _ in range(cfg.max_iter):
        sq = _pairwise_sq_dists(pts, centroids)
        assignment = np.argmin(sq, axis=1)

        counts = np.bincount(assignment, minlength=cfg.k)
        for j in np.flatnonzero(counts == 0):
            donor = int(np.argmax(counts))
            members = np.flatnonzero(assignment == donor)
            far = members[int(np.argmax(sq[members, donor]))]
            assignment[far] = j
            counts[donor] -= 1
            counts[j] += 1

        for j in range(cfg.k):
            centroids[j] = pts[assignment == j].mean(axis=0)

        inertia = float(np.sum((pts - centroids[assignment]) ** 2))
        if prev is not None and inertia > prev * (1.0 + 1e-12) + 1e-12:
            raise AssertionError(f"inertia increased: {prev} -> {inertia}")
        history.append(inertia)
        if inertia == 0.0:
            break
        if prev is not None and (prev - inertia) / prev < cfg.tol:
            break
        prev = inertia

    return Clustering(
        centroids=centroids,
        assignment=assignment,
        inertia=history[-1],
        iterations_run=len(history),
        inertia_history=tuple(history),
    )


def select_seeds(
    pool: Sequence[ImageRecord],
    per_class_budget: int,
    strategy: str = "centroid",
    rng_seed: int = 0,
) -> list[str]:
    """Pick which images from one candidate pool to label.

    The pool is clustered into ``per_class_budget`` clusters and one image
    is taken per cluster: its centroid-nearest member (``centroid``) or a
    uniformly random member (``random_per_cluster``). ``uniform_random``
    skips clustering and samples the pool directly, as a baseline. Returns
    min(budget, pool size) distinct image ids; a pool no larger than the
    budget is returned whole.
    """
    if not pool:
        raise ValueError("pool must be non-empty")
    if per_class_budget < 1:
        raise ValueError("per_class_budget must be >= 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")

    if per_class_budget >= len(pool):
        return [record.image_id for record in pool]

    rng = np.random.default_rng(rng_seed)
    if strategy == "uniform_random":
        picks = rng.choice(len(pool), size=per_class_budget, replace=False)
        return [pool[int(i)].image_id for i in picks]

    points = np.stack([record.embedding for record in pool]).astype(np.float64)
    clustering = kmeans(points, KMeansConfig(k=per_class_budget, rng_seed=rng_seed))

    selected: list[str] = []
    for j in range(per_class_budget):
        members = np.flatnonzero(clustering.assignment == j)
        if strategy == "centroid":
            deltas = points[members] - clustering.centroids[j]
            pick = members[int(np.argmin(np.sum(deltas**2, axis=1)))]
        else:  # random_per_cluster
            pick = members[int(rng.integers(len(members)))]
        selected.append(pool[int(pick)].image_id)
    return selected
