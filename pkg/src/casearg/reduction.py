"""Casebase reduction: per-class k-means over characterisation vectors,
followed by confidence thresholding of the centroids."""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from . import _kernels
from .features import Case, Characterisation, Kind

log = logging.getLogger(__name__)


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class ClusteringConfig:
    k: int = 300
    threshold: float | None = None
    seed: int = 0
    max_iterations: int = 100
    restarts: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.max_iterations < 1 or self.restarts < 1:
            raise ValueError("max_iterations and restarts must be >= 1")

    def to_dict(self) -> dict:
        return {"k": self.k, "threshold": self.threshold, "seed": self.seed,
                "max_iterations": self.max_iterations, "restarts": self.restarts}

    @classmethod
    def from_dict(cls, d) -> "ClusteringConfig":
        return cls(**d)


def feature_space(cases: Sequence[Case]) -> tuple[str, ...]:
    return tuple(sorted({n for c in cases for n in c.characterisation.features}))


def vectorize(case: Case | Characterisation, features: Sequence[str]) -> np.ndarray:
    ch = case.characterisation if isinstance(case, Case) else case
    counts = ch.as_dict()
    unknown = set(counts) - set(features)
    if unknown:
        raise ReductionError(f"features {sorted(unknown)} not in the vector space")
    return np.array([counts.get(f, 0) for f in features], dtype=np.float64)


def discretize(vector: np.ndarray, features: Sequence[str], kind: Kind) -> Characterisation:
    """Round a (centroid) vector back into a characterisation.

    Counts round half-up; set membership needs a value of at least 0.5.
    """
    if Kind(kind) is Kind.SET:
        return Characterisation.of_set(f for f, v in zip(features, vector) if v >= 0.5)
    rounded = np.floor(np.asarray(vector, dtype=np.float64) + 0.5).astype(np.int64)
    return Characterisation.of_counts({f: int(v) for f, v in zip(features, rounded) if v > 0})


def _plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def _lloyd(points, centroids, max_iterations):
    labels, d2 = _kernels.assign_nearest(points, centroids)
    for _ in range(max_iterations):
        k = len(centroids)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        sizes = np.bincount(labels, minlength=k)
        new = centroids.copy()
        filled = sizes > 0
        new[filled] = sums[filled] / sizes[filled, None]
        if not filled.all():
            # re-seed empty clusters from the points farthest from their centroid
            far = np.argsort(-d2, kind="stable")
            for c, idx in zip(np.flatnonzero(~filled), far):
                new[c] = points[idx]
        centroids = new
        new_labels, d2 = _kernels.assign_nearest(points, centroids)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return centroids, labels, float(d2.sum())


def kmeans(points, k: int, config: ClusteringConfig | None = None):
    """Lloyd's algorithm from k-means++ seeds; best of ``config.restarts`` by inertia.

    Returns ``(centroids, assignments, inertia)``.
    """
    config = config or ClusteringConfig(k=k)
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ReductionError("kmeans needs a non-empty 2-d point array")
    if k > len(points):
        raise ReductionError(f"k={k} exceeds the {len(points)} points; clamp k first")
    rng = np.random.default_rng(config.seed)
    best = None
    for _ in range(config.restarts):
        seeds = _plus_plus(points, k, rng)
        result = _lloyd(points, seeds, config.max_iterations)
        if best is None or result[2] < best[2]:
            best = result
    return best


def reduce_casebase(
    cases: Sequence[Case],
    config: ClusteringConfig,
    outcomes: Sequence[Hashable] | None = None,
) -> list[Case]:
    """Replace each outcome class's cases by discretised k-means centroids.

    ``k`` is clamped to the number of distinct characterisations in a class.
    Centroid confidence is the mean member confidence; centroids below
    ``config.threshold`` are dropped.
    """
    by_class: "OrderedDict[Hashable, list[Case]]" = OrderedDict()
    for outcome in outcomes or ():
        by_class[outcome] = []
    for case in cases:
        by_class.setdefault(case.outcome, []).append(case)
    for outcome, members in by_class.items():
        if not members:
            raise ReductionError(f"class {outcome!r} has no cases to cluster")
    if not by_class:
        return []
    kinds = {c.characterisation.kind for c in cases}
    if len(kinds) > 1:
        raise ReductionError("cases mix characterisation kinds")
    kind = kinds.pop()
    features = feature_space(cases)
    reduced = []
    for ci, (outcome, members) in enumerate(by_class.items()):
        points = np.array([vectorize(c, features) for c in members]).reshape(len(members), -1)
        distinct = len({c.characterisation for c in members})
        k = min(config.k, distinct)
        if k < config.k:
            log.info("class %r: clamping k from %d to %d distinct cases", outcome, config.k, k)
        class_config = ClusteringConfig(
            k=k, threshold=config.threshold, seed=config.seed + ci,
            max_iterations=config.max_iterations, restarts=config.restarts,
        )
        centroids, labels, _ = kmeans(points, k, class_config)
        conf = np.array([c.confidence for c in members])
        for j, centroid in enumerate(centroids):
            member = labels == j
            if not member.any():
                continue
            confidence = float(conf[member].mean())
            if config.threshold is not None and confidence < config.threshold:
                continue
            reduced.append(
                Case(
                    discretize(centroid, features, kind),
                    outcome,
                    min(max(confidence, 0.0), 1.0),
                    f"centroid:{outcome}:{j}:n={int(member.sum())}",
                )
            )
    return reduced
