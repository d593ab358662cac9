"""Confidence oracles standing in for the edge and cloud CNNs, plus the
two-threshold decision rule applied at the edge."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import kernels
from .vision import BoundingBox

# stream tag for the confidence uniforms; other modules use other tags
CONFIDENCE_STREAM = 1


class Decision(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class ImagePackage:
    package_id: int
    camera_id: str
    capture_time: float
    byte_size: int
    true_label: str
    box: Optional[BoundingBox] = None

    def __post_init__(self):
        if self.byte_size <= 0:
            raise ValueError("byte_size must be > 0")
        if self.capture_time < 0:
            raise ValueError("capture_time must be >= 0")


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    confidence: float

    @property
    def positive(self) -> bool:
        return self.decision is Decision.POSITIVE


@dataclass(frozen=True)
class SyntheticClassifierSpec:
    """Beta-distributed confidences for query-class and other packages."""

    positive_shape: Tuple[float, float] = (8.0, 2.0)
    negative_shape: Tuple[float, float] = (2.0, 8.0)
    seed: int = 0

    def __post_init__(self):
        if min(self.positive_shape + self.negative_shape) <= 0:
            raise ValueError("beta shape parameters must be > 0")


def confidences(
    package_ids: Sequence[int], is_query: Sequence[bool], spec: SyntheticClassifierSpec
) -> np.ndarray:
    """Vectorised :func:`edge_classify`.

    One uniform per ``(spec.seed, package_id)`` from a counter-based
    generator, pushed through the inverse beta CDF of whichever shape
    applies.  Devices with different specs but the same seed therefore see
    correlated (common random number) confidences for the same package.
    """
    ids = np.asarray(package_ids, dtype=np.int64)
    pos = np.asarray(is_query, dtype=bool)
    u = kernels.keyed_uniform(spec.seed, ids, CONFIDENCE_STREAM)
    out = np.empty(len(ids))
    a, b = spec.positive_shape
    out[pos] = stats.beta.ppf(u[pos], a, b)
    a, b = spec.negative_shape
    out[~pos] = stats.beta.ppf(u[~pos], a, b)
    return np.clip(out, 0.0, 1.0)


def edge_classify(pkg: ImagePackage, spec: SyntheticClassifierSpec, query_class: str) -> float:
    return float(confidences([pkg.package_id], [pkg.true_label == query_class], spec)[0])


def check_thresholds(alpha: float, beta: float) -> None:
    if not 0.0 <= beta <= 0.5 <= alpha <= 1.0:
        raise ValueError(f"thresholds must satisfy 0 <= beta <= 0.5 <= alpha <= 1, got alpha={alpha}, beta={beta}")


def decide(f: float, alpha: float, beta: float) -> Verdict:
    check_thresholds(alpha, beta)
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"confidence must be in [0, 1], got {f}")
    if f > alpha:
        return Verdict(Decision.POSITIVE, f)
    if f < beta:
        return Verdict(Decision.NEGATIVE, f)
    return Verdict(Decision.UNCERTAIN, f)


def cloud_classify(pkg: ImagePackage, query_class: str) -> Verdict:
    if pkg.true_label == query_class:
        return Verdict(Decision.POSITIVE, 1.0)
    return Verdict(Decision.NEGATIVE, 0.0)
