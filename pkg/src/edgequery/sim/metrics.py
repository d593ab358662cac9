"""Run metrics, the F-measure, and summary CSV output."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .trace import EventTrace

SUMMARY_HEADER = "scheme,mean_latency_s,var_latency_s2,bandwidth_bytes,f2"


@dataclass(frozen=True)
class FScoreParams:
    lam: float = 2.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")


def f_measure(tp: int, fp: int, fn: int, lam: float = 2.0) -> Tuple[float, bool]:
    """``(F_lambda, degenerate)``; degenerate matrices score 0 with the flag set."""
    if tp + fp == 0 or tp + fn == 0 or tp == 0:
        return 0.0, (tp + fp == 0 or tp + fn == 0)
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    l2 = lam * lam
    return (1 + l2) * p * r / (l2 * p + r), False


@dataclass
class RunMetrics:
    latencies: Dict[int, float] = field(default_factory=dict)
    upload_bytes: int = 0
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    detected: int = 0
    queue_series: Dict[int, List[Tuple[float, int]]] = field(default_factory=dict)

    @property
    def finalized(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def latency_values(self) -> List[float]:
        return [self.latencies[k] for k in sorted(self.latencies)]

    @property
    def mean_latency(self) -> Optional[float]:
        return _mean(self.latency_values())

    @property
    def var_latency(self) -> Optional[float]:
        return _var(self.latency_values())

    def record_verdict(self, positive: bool, truth: bool) -> None:
        if positive and truth:
            self.tp += 1
        elif positive:
            self.fp += 1
        elif truth:
            self.fn += 1
        else:
            self.tn += 1


def fscore(metrics: RunMetrics, params: FScoreParams = FScoreParams()) -> float:
    return f_measure(metrics.tp, metrics.fp, metrics.fn, params.lam)[0]


def fscore_degenerate(metrics: RunMetrics) -> bool:
    return f_measure(metrics.tp, metrics.fp, metrics.fn)[1]


def _mean(values: Sequence[float]) -> Optional[float]:
    if not values:
        return None
    return math.fsum(values) / len(values)


def _var(values: Sequence[float]) -> Optional[float]:
    m = _mean(values)
    if m is None:
        return None
    return math.fsum((v - m) ** 2 for v in values) / len(values)


def metrics_from_trace(trace: EventTrace) -> RunMetrics:
    """Recompute run metrics from trace records alone."""
    m = RunMetrics()
    capture: Dict[int, float] = {}
    truth: Dict[int, bool] = {}
    for r in trace:
        if r.kind == "detect":
            m.detected += 1
            capture[r.pkg] = r.extra["capture"]
            truth[r.pkg] = bool(r.extra["truth"])
        elif r.kind == "upload_end":
            m.upload_bytes += int(r.extra["bytes"])
        elif r.kind in ("enqueue", "infer_end"):
            m.queue_series.setdefault(r.dev, []).append((r.t, int(r.extra["q"])))
        elif r.kind == "verdict":
            m.latencies[r.pkg] = r.t - capture[r.pkg]
            m.record_verdict(r.extra["decision"] == "positive", truth[r.pkg])
    return m


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    mean_latency_s: Optional[float]
    var_latency_s2: Optional[float]
    bandwidth_bytes: float
    f2: float

    @classmethod
    def from_runs(cls, scheme: str, runs: Iterable[RunMetrics], params: FScoreParams = FScoreParams()) -> "SummaryRow":
        """Pool packages over runs; bandwidth is the per-run mean."""
        runs = list(runs)
        lat: List[float] = []
        tp = fp = fn = 0
        for r in runs:
            lat.extend(r.latency_values())
            tp, fp, fn = tp + r.tp, fp + r.fp, fn + r.fn
        total_bytes = sum(r.upload_bytes for r in runs)
        bw = total_bytes // len(runs) if total_bytes % len(runs) == 0 else total_bytes / len(runs)
        return cls(scheme, _mean(lat), _var(lat), bw, f_measure(tp, fp, fn, params.lam)[0])

    def to_csv(self) -> str:
        return ",".join([self.scheme, _fmt(self.mean_latency_s), _fmt(self.var_latency_s2), _fmt(self.bandwidth_bytes), _fmt(self.f2)])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def summary_csv(rows: Iterable[SummaryRow]) -> str:
    out = io.StringIO()
    out.write(SUMMARY_HEADER + "\n")
    for row in rows:
        out.write(row.to_csv() + "\n")
    return out.getvalue()
