"""Camera profiles, K-Means camera clustering and negative-sample selection."""

from __future__ import annotations

import csv
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

ProportionVector = Dict[str, float]


@dataclass
class CameraProfile:
    camera_id: str
    vector: ProportionVector
    observation_count: int


@dataclass
class ClusterAssignment:
    k: int
    centroids: List[ProportionVector]
    membership: Dict[str, int]
    vocabulary: List[str] = field(default_factory=list)
    wcss_history: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def wcss(self) -> float:
        return self.wcss_history[-1] if self.wcss_history else 0.0


def build_profile(observations: Iterable[Tuple[str, str]]) -> List[CameraProfile]:
    """Per-camera label frequencies, cameras in order of first appearance."""
    counts: Dict[str, Counter] = {}
    for camera_id, label in observations:
        counts.setdefault(camera_id, Counter())[label] += 1
    profiles = []
    for camera_id, counter in counts.items():
        total = sum(counter.values())
        vector = {label: counter[label] / total for label in sorted(counter)}
        profiles.append(CameraProfile(camera_id, vector, total))
    return profiles


def vocabulary_of(profiles: Iterable[CameraProfile]) -> List[str]:
    return sorted({label for p in profiles for label in p.vector})


def profile_matrix(profiles: Sequence[CameraProfile], vocabulary: Sequence[str]) -> np.ndarray:
    index = {label: j for j, label in enumerate(vocabulary)}
    X = np.zeros((len(profiles), len(vocabulary)))
    for i, p in enumerate(profiles):
        for label, value in p.vector.items():
            X[i, index[label]] = value
    return X


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def wcss(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(((X - centroids[labels]) ** 2).sum())


def lloyd(X: np.ndarray, k: int, seed: int, max_iters: int = 100):
    """Lloyd's iteration on the rows of ``X``.

    Initial centroids are ``k`` distinct rows drawn with ``seed``.  A cluster
    that ends an update step empty is re-seeded with the point farthest from
    its current centroid (each such point is used once per step).  Stops at
    an assignment fixed point or after ``max_iters`` update steps.

    Returns ``(labels, centroids, wcss_history, iterations, converged)``;
    ``wcss_history[t]`` is the objective after update step ``t``.
    """
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = X[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1, dtype=np.int64)
    history: List[float] = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        d = _sq_dists(X, centroids)
        new_labels = np.argmin(d, axis=1)  # ties go to the lowest cluster index
        if np.array_equal(new_labels, labels):
            converged = True
            it -= 1
            break
        labels = new_labels
        sizes = np.bincount(labels, minlength=k)
        for j in range(k):
            if sizes[j]:
                centroids[j] = X[labels == j].mean(axis=0)
        history.append(wcss(X, labels, centroids))
        empty = np.flatnonzero(sizes == 0)
        if len(empty):
            # labels are left as they are; the next assignment step moves the
            # re-seeding points, which can only lower the objective
            own = ((X - centroids[labels]) ** 2).sum(axis=1)
            for j in empty:
                far = int(np.argmax(own))
                centroids[j] = X[far]
                own[far] = -1.0
    return labels, centroids, history, it, converged


def kmeans(profiles: Sequence[CameraProfile], k: int, seed: int = 0, max_iters: int = 100) -> ClusterAssignment:
    profiles = [p for p in profiles if p.observation_count > 0]
    vocab = vocabulary_of(profiles)
    X = profile_matrix(profiles, vocab)
    labels, centroids, history, iters, converged = lloyd(X, k, seed, max_iters)
    return ClusterAssignment(
        k=k,
        centroids=[dict(zip(vocab, map(float, row))) for row in centroids],
        membership={p.camera_id: int(c) for p, c in zip(profiles, labels)},
        vocabulary=vocab,
        wcss_history=history,
        iterations=iters,
        converged=converged,
    )


def largest_remainder(weights: Mapping[str, float], n: int, capacity: Mapping[str, int]) -> Dict[str, int]:
    """Integer quotas summing to ``min(n, sum(capacity))``, proportional to ``weights``.

    Floors of the exact shares first, then the leftover units by largest
    fractional remainder (ties by class name).  A class whose quota would
    exceed its capacity is capped and the rest is re-shared among the
    others; once every weighted class is full, zero-weight classes fill the
    remainder equally.
    """
    quotas = {c: 0 for c in capacity}
    remaining = min(n, sum(capacity.values()))
    open_ = [c for c in sorted(capacity) if capacity[c] > 0]
    while remaining > 0 and open_:
        w = {c: max(weights.get(c, 0.0), 0.0) for c in open_}
        total = sum(w.values())
        if total <= 0:
            w = {c: 1.0 for c in open_}
            total = float(len(open_))
        shares = {c: remaining * w[c] / total for c in open_}
        alloc = {c: int(np.floor(shares[c])) for c in open_}
        leftover = remaining - sum(alloc.values())
        for c in sorted(open_, key=lambda c: (-(shares[c] - alloc[c]), c))[:leftover]:
            alloc[c] += 1
        capped = False
        for c in open_:
            room = capacity[c] - quotas[c]
            if alloc[c] >= room:
                quotas[c] += room
                remaining -= room
                capped = True
        if not capped:
            for c in open_:
                quotas[c] += alloc[c]
            remaining = 0
        open_ = [c for c in open_ if quotas[c] < capacity[c]]
    return quotas


def select_negative_samples(
    cluster_profile: Mapping[str, float],
    query_class: str,
    pool: Mapping[str, Sequence],
    n: int,
    seed: int = 0,
) -> list:
    """Draw ``n`` negative training samples, classes weighted by the cluster profile.

    Per-class quotas come from :func:`largest_remainder`, then samples are
    drawn uniformly without replacement inside each class.  Asking for more
    than the pool holds returns the whole (non-query) pool.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    classes = sorted(c for c in pool if c != query_class and len(pool[c]) > 0)
    if not classes:
        raise ValueError("pool has no samples outside the query class")
    capacity = {c: len(pool[c]) for c in classes}
    quotas = largest_remainder({c: cluster_profile.get(c, 0.0) for c in classes}, n, capacity)
    rng = np.random.default_rng(seed)
    chosen = []
    for c in classes:
        q = quotas[c]
        if q == 0:
            continue
        idx = rng.choice(capacity[c], size=q, replace=False)
        chosen.extend(pool[c][i] for i in idx)
    return chosen


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

PathLike = Union[str, os.PathLike]


def read_observations(path: PathLike) -> List[Tuple[str, str]]:
    """Rows of a ``camera_id,label`` CSV (header row required)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["camera_id", "label"]:
            raise ValueError(f"{path}: expected header 'camera_id,label'")
        return [(row[0].strip(), row[1].strip()) for row in reader if row and any(cell.strip() for cell in row)]


def assignment_to_json(assignment: ClusterAssignment) -> str:
    doc = {
        "k": assignment.k,
        "membership": assignment.membership,
        "centroids": assignment.centroids,
        "wcss": assignment.wcss,
        "iterations": assignment.iterations,
    }
    return json.dumps(doc, indent=2, sort_keys=True)
